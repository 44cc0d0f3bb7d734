#ifndef OPTILOG_BYTES_HPP
#define OPTILOG_BYTES_HPP

#include <bit>
#include <cstdint>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace optilog {

// Canonical encoding for state comparison: fixed-width little-endian integers,
// callers emit sets in ReplicaId order.
class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }

    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void id(ReplicaId r) { u32(idx(r)); }

    void str(std::string_view s)
    {
        u64(s.size());
        out_.insert(out_.end(), s.begin(), s.end());
    }

    template <typename Range>
    void ids(const Range& r)
    {
        u64(static_cast<std::uint64_t>(std::size(r)));
        for (ReplicaId x : r)
            id(x);
    }

    const std::vector<std::uint8_t>& bytes() const { return out_; }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

} // namespace optilog

#endif
