#ifndef OPTILOG_LATENCY_HPP
#define OPTILOG_LATENCY_HPP

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bytes.hpp"
#include "core.hpp"

namespace optilog {

struct LatencyVector {
    ReplicaId author{};
    std::vector<Micros> entries; // indexed by replica, round-trip microseconds

    bool operator==(const LatencyVector&) const = default;
};

inline LatencyVector build_latency_vector(const std::map<ReplicaId, std::optional<Micros>>& round_trips,
                                          ReplicaId author, const SystemParams& params)
{
    if (!params.contains(author))
        throw std::invalid_argument("author not in replica set");
    LatencyVector v{author, std::vector<Micros>(params.n, kInfinite)};
    for (const auto& [peer, rtt] : round_trips) {
        if (!params.contains(peer))
            throw std::invalid_argument("measurement for unknown replica");
        if (rtt && *rtt < 0)
            throw std::invalid_argument("negative latency");
        v.entries[idx(peer)] = rtt.value_or(kInfinite);
    }
    v.entries[idx(author)] = 0;
    return v;
}

inline bool well_formed(const LatencyVector& v, std::size_t n)
{
    if (idx(v.author) >= n || v.entries.size() != n || v.entries[idx(v.author)] != 0)
        return false;
    for (Micros e : v.entries)
        if (e < 0)
            return false;
    return true;
}

// Symmetric matrix derived from the latest directed report of every author.
class LatencyMatrix {
public:
    LatencyMatrix() = default;
    explicit LatencyMatrix(std::size_t n) : n_(n), reported_(n * n, 0), lat_(n * n, 0) {}

    static LatencyMatrix from_rows(const std::vector<std::vector<Micros>>& rows)
    {
        LatencyMatrix m(rows.size());
        for (std::size_t a = 0; a < m.n_; ++a) {
            if (rows[a].size() != m.n_)
                throw std::invalid_argument("latency rows must be square");
            for (std::size_t b = 0; b < m.n_; ++b) {
                if (rows[a][b] < 0)
                    throw std::invalid_argument("negative latency");
                if (a == b && rows[a][b] != 0)
                    throw std::invalid_argument("diagonal must be 0");
                m.reported_[a * m.n_ + b] = rows[a][b];
            }
        }
        m.rederive();
        return m;
    }

    static LatencyMatrix uniform(std::size_t n, Micros rtt)
    {
        std::vector<std::vector<Micros>> rows(n, std::vector<Micros>(n, rtt));
        for (std::size_t i = 0; i < n; ++i)
            rows[i][i] = 0;
        return from_rows(rows);
    }

    std::size_t size() const { return n_; }
    std::uint64_t generation() const { return generation_; }

    Micros at(std::size_t a, std::size_t b) const { return lat_[a * n_ + b]; }
    Micros operator()(ReplicaId a, ReplicaId b) const { return at(idx(a), idx(b)); }

    // Expected one-way delay of a single message over the link.
    Micros one_way(ReplicaId a, ReplicaId b) const
    {
        const Micros rtt = (*this)(a, b);
        return is_infinite(rtt) ? kInfinite : (rtt + 1) / 2;
    }

    Micros reported(ReplicaId author, ReplicaId peer) const { return reported_[idx(author) * n_ + idx(peer)]; }

    void apply(const LatencyVector& v)
    {
        if (!well_formed(v, n_))
            throw std::invalid_argument("malformed latency vector");
        const std::size_t a = idx(v.author);
        for (std::size_t b = 0; b < n_; ++b) {
            reported_[a * n_ + b] = v.entries[b];
            if (a != b) {
                const Micros s = std::max(reported_[a * n_ + b], reported_[b * n_ + a]);
                lat_[a * n_ + b] = s;
                lat_[b * n_ + a] = s;
            }
        }
        ++generation_;
    }

    std::vector<std::vector<Micros>> rows() const
    {
        std::vector<std::vector<Micros>> r(n_, std::vector<Micros>(n_));
        for (std::size_t a = 0; a < n_; ++a)
            for (std::size_t b = 0; b < n_; ++b)
                r[a][b] = at(a, b);
        return r;
    }

    void serialize(ByteWriter& w) const
    {
        w.u64(n_);
        w.u64(generation_);
        for (Micros v : reported_)
            w.i64(v);
    }

    bool operator==(const LatencyMatrix&) const = default;

private:
    void rederive()
    {
        for (std::size_t a = 0; a < n_; ++a)
            for (std::size_t b = 0; b < n_; ++b)
                lat_[a * n_ + b] = a == b ? 0 : std::max(reported_[a * n_ + b], reported_[b * n_ + a]);
    }

    std::size_t n_ = 0;
    std::uint64_t generation_ = 0;
    std::vector<Micros> reported_; // row = author; 0 until the author reports
    std::vector<Micros> lat_;
};

inline LatencyMatrix apply_latency_vector(LatencyMatrix m, const LatencyVector& v)
{
    m.apply(v);
    return m;
}

inline void write_csv(std::ostream& os, const std::vector<std::vector<Micros>>& rows)
{
    const std::size_t n = rows.size();
    os << "replica";
    for (std::size_t b = 0; b < n; ++b)
        os << ',' << b;
    os << '\n';
    for (std::size_t a = 0; a < n; ++a) {
        os << a;
        for (std::size_t b = 0; b < n; ++b) {
            os << ',';
            if (is_infinite(rows[a][b]))
                os << "inf";
            else
                os << rows[a][b];
        }
        os << '\n';
    }
}

inline void write_csv(std::ostream& os, const LatencyMatrix& m) { write_csv(os, m.rows()); }

// Reads the CSV export format; errors name the offending line.
inline std::vector<std::vector<Micros>> read_csv_rows(std::istream& is)
{
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        return cells;
    };
    auto fail = [](std::size_t line, const std::string& what) {
        throw std::runtime_error("latency csv line " + std::to_string(line) + ": " + what);
    };

    std::string line;
    std::size_t line_no = 0;
    std::size_t n = 0;
    std::vector<std::vector<Micros>> rows;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto cells = split(line);
        if (n == 0) {
            if (cells.size() < 2)
                fail(line_no, "header needs at least one replica column");
            n = cells.size() - 1;
            continue;
        }
        if (cells.size() != n + 1)
            fail(line_no, "expected " + std::to_string(n + 1) + " cells, got " + std::to_string(cells.size()));
        std::vector<Micros> row;
        for (std::size_t b = 1; b < cells.size(); ++b) {
            if (cells[b] == "inf") {
                row.push_back(kInfinite);
                continue;
            }
            try {
                std::size_t used = 0;
                const long long v = std::stoll(cells[b], &used);
                if (used != cells[b].size() || v < 0)
                    throw std::invalid_argument("bad");
                row.push_back(v);
            } catch (const std::exception&) {
                fail(line_no, "bad latency value '" + cells[b] + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (n == 0)
        throw std::runtime_error("latency csv: empty input");
    if (rows.size() != n)
        throw std::runtime_error("latency csv: expected " + std::to_string(n) + " rows, got " +
                                 std::to_string(rows.size()));
    return rows;
}

inline LatencyMatrix read_csv(std::istream& is) { return LatencyMatrix::from_rows(read_csv_rows(is)); }

} // namespace optilog

#endif
