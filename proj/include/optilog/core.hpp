#ifndef OPTILOG_CORE_HPP
#define OPTILOG_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace optilog {

enum class ReplicaId : std::uint32_t {};

constexpr ReplicaId rid(std::uint32_t v) { return ReplicaId{v}; }
constexpr std::uint32_t idx(ReplicaId r) { return static_cast<std::uint32_t>(r); }

using View = std::uint64_t;
using Round = std::uint64_t;
using Micros = std::int64_t;

inline constexpr Micros kInfinite = std::numeric_limits<Micros>::max();

constexpr bool is_infinite(Micros v) { return v == kInfinite; }

constexpr Micros add_latency(Micros a, Micros b)
{
    if (is_infinite(a) || is_infinite(b))
        return kInfinite;
    return a + b;
}

constexpr Micros millis(std::int64_t ms) { return ms * 1000; }

// Latency-slack multiplier in parts per million. Keeping delta integral makes
// floor(sum) >= sum(floor) hold exactly, which the no-false-suspicion argument
// relies on.
struct Slack {
    std::int64_t ppm = 1'000'000;

    static Slack from(double delta)
    {
        if (!(delta >= 1.0))
            throw std::invalid_argument("delta must be >= 1");
        return Slack{static_cast<std::int64_t>(std::llround(delta * 1e6))};
    }

    double factor() const { return static_cast<double>(ppm) / 1e6; }

    Micros apply(Micros d) const
    {
        if (is_infinite(d))
            return kInfinite;
        // d * ppm may overflow for absurd d; widen through long double
        const long double v = static_cast<long double>(d) * ppm / 1'000'000.0L;
        if (v >= static_cast<long double>(kInfinite))
            return kInfinite;
        return (d / 1'000'000) * ppm + ((d % 1'000'000) * ppm) / 1'000'000;
    }
};

struct SystemParams {
    std::uint32_t n = 4;
    std::uint32_t f = 1;
    std::uint32_t q = 3;
    double delta = 1.2;
    std::uint64_t window_w = 50;
    std::vector<ReplicaId> replica_set;

    static SystemParams make(std::uint32_t n, std::uint32_t f, double delta = 1.2,
                             std::uint64_t window_w = 50)
    {
        SystemParams p;
        p.n = n;
        p.f = f;
        p.q = n - f;
        p.delta = delta;
        p.window_w = window_w;
        for (std::uint32_t i = 0; i < n; ++i)
            p.replica_set.push_back(rid(i));
        p.validate();
        return p;
    }

    // Largest f allowed for n replicas.
    static SystemParams for_n(std::uint32_t n, double delta = 1.2, std::uint64_t window_w = 50)
    {
        if (n < 1)
            throw std::invalid_argument("n must be >= 1");
        return make(n, (n - 1) / 3, delta, window_w);
    }

    void validate() const
    {
        if (n < 3 * f + 1)
            throw std::invalid_argument("n must be >= 3f+1");
        if (q != n - f)
            throw std::invalid_argument("q must equal n-f");
        if (!(delta >= 1.0))
            throw std::invalid_argument("delta must be >= 1");
        if (replica_set.size() != n)
            throw std::invalid_argument("replica_set must hold n replicas");
        for (std::uint32_t i = 0; i < n; ++i)
            if (idx(replica_set[i]) != i)
                throw std::invalid_argument("replica_set must be 0..n-1 in order");
    }

    Slack slack() const { return Slack::from(delta); }
    bool contains(ReplicaId r) const { return idx(r) < n; }
};

// Seeded generator with platform-independent derived draws (the standard
// distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound)
    {
        if (bound == 0)
            throw std::invalid_argument("Rng::below(0)");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    std::int64_t between(std::int64_t lo, std::int64_t hi)
    {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // Uniform in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

// Stateless seed derivation so parallel or reordered consumers see the same
// streams.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::string to_string(ReplicaId r) { return std::to_string(idx(r)); }

} // namespace optilog

#endif
