#ifndef OPTILOG_PBFT_SCORE_HPP
#define OPTILOG_PBFT_SCORE_HPP

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "latency.hpp"
#include "suspicion.hpp"

namespace optilog {

namespace detail {

// k-th smallest value (1-based) with its position.
inline std::pair<Micros, std::size_t> kth_smallest(const std::vector<Micros>& v, std::size_t k)
{
    std::vector<std::size_t> pos(v.size());
    for (std::size_t i = 0; i < pos.size(); ++i)
        pos[i] = i;
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    const std::size_t p = pos.at(k - 1);
    return {v[p], p};
}

} // namespace detail

// Timeouts for the three-phase all-to-all pattern. With u > 0 every quorum is
// taken at the (q+u)-th arrival, i.e. any u members are assumed silent.
inline TimeoutTable pbft_timeouts(const StarConfig& cfg, const LatencyMatrix& lat, const SystemParams& params,
                                  std::size_t u = 0)
{
    if (u > params.f)
        throw std::invalid_argument("u must not exceed f");
    const std::uint32_t n = params.n;
    const std::size_t k = params.q + u;
    const ReplicaId leader = cfg.leader;
    TimeoutTable t;

    auto one_way = [&](std::uint32_t a, std::uint32_t b) { return a == b ? Micros{0} : lat.one_way(rid(a), rid(b)); };

    std::vector<Micros> propose(n);
    for (std::uint32_t a = 0; a < n; ++a) {
        propose[a] = one_way(idx(leader), a);
        if (rid(a) != leader) {
            const TimeoutKey key{MessageType::Propose, rid(a), leader};
            t.d_m[key] = propose[a];
            t.derivation[key] = {std::nullopt, leader, rid(a)};
        }
    }

    // The predecessor of a replica's own write is the Propose it received.
    auto own_write_origin = [&](std::uint32_t a) -> std::optional<TimeoutKey> {
        if (rid(a) == leader)
            return std::nullopt;
        return TimeoutKey{MessageType::Propose, rid(a), leader};
    };

    std::vector<Micros> write_quorum(n);
    std::vector<std::optional<TimeoutKey>> write_quorum_key(n);
    for (std::uint32_t b = 0; b < n; ++b) {
        std::vector<Micros> arrivals(n);
        for (std::uint32_t a = 0; a < n; ++a) {
            arrivals[a] = add_latency(propose[a], one_way(a, b));
            if (a != b) {
                const TimeoutKey key{MessageType::Write, rid(b), rid(a)};
                t.d_m[key] = arrivals[a];
                t.derivation[key] = {own_write_origin(a), rid(a), rid(b)};
            }
        }
        const auto [v, from] = detail::kth_smallest(arrivals, k);
        write_quorum[b] = v;
        write_quorum_key[b] = from == b ? own_write_origin(b)
                                        : std::optional{TimeoutKey{MessageType::Write, rid(b), rid(static_cast<std::uint32_t>(from))}};
    }

    std::vector<Micros> accepts_at_leader(n);
    for (std::uint32_t a = 0; a < n; ++a) {
        for (std::uint32_t b = 0; b < n; ++b) {
            const Micros d = add_latency(write_quorum[a], one_way(a, b));
            if (a != b) {
                const TimeoutKey key{MessageType::Accept, rid(b), rid(a)};
                t.d_m[key] = d;
                t.derivation[key] = {write_quorum_key[a], rid(a), rid(b)};
            }
            if (rid(b) == leader)
                accepts_at_leader[a] = d;
        }
    }
    t.round_duration = detail::kth_smallest(accepts_at_leader, k).first;
    return t;
}

inline Micros pbft_score(const StarConfig& cfg, const LatencyMatrix& lat, const SystemParams& params, std::size_t u)
{
    return pbft_timeouts(cfg, lat, params, u).round_duration;
}

} // namespace optilog

#endif
