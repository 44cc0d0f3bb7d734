// Independent reference implementations used only by tests. They favour
// enumeration over cleverness and share no code paths with the library beyond
// the plain data types.
#ifndef OPTILOG_TEST_ORACLES_HPP
#define OPTILOG_TEST_ORACLES_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "optilog/optilog.hpp"

namespace oracle {

using optilog::Micros;
using optilog::ReplicaId;
using optilog::kInfinite;
using optilog::rid;
using optilog::idx;

using EdgeList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// Lexicographically smallest maximum independent set over `vertices`.
inline std::vector<std::uint32_t> brute_mis(const std::vector<std::uint32_t>& vertices, const EdgeList& edges)
{
    const std::size_t m = vertices.size();
    std::vector<std::uint32_t> best;
    bool have = false;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        std::vector<std::uint32_t> set;
        for (std::size_t i = 0; i < m; ++i)
            if (mask >> i & 1)
                set.push_back(vertices[i]);
        bool independent = true;
        for (const auto& [a, b] : edges)
            if (std::count(set.begin(), set.end(), a) && std::count(set.begin(), set.end(), b))
                independent = false;
        if (!independent)
            continue;
        std::sort(set.begin(), set.end());
        if (!have || set.size() > best.size() || (set.size() == best.size() && set < best)) {
            best = set;
            have = true;
        }
    }
    return best;
}

inline std::vector<std::uint32_t> ids(const std::vector<ReplicaId>& v)
{
    std::vector<std::uint32_t> out;
    for (ReplicaId r : v)
        out.push_back(idx(r));
    return out;
}

inline EdgeList edges_of(const optilog::SuspicionState& s)
{
    EdgeList out;
    for (const auto& [a, b] : s.edges())
        out.emplace_back(idx(a), idx(b));
    return out;
}

// The score definition taken literally: every subset M of intermediates whose subtrees
// cover k-1 votes, minimising the slowest member.
inline Micros brute_tree_score(const optilog::TreeConfig& t, const optilog::LatencyMatrix& lat, std::size_t k)
{
    if (k <= 1)
        return 0;
    const std::size_t b = t.intermediates.size();
    Micros best = kInfinite;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << b); ++mask) {
        std::size_t covered = 0;
        Micros worst = 0;
        for (std::size_t j = 0; j < b; ++j) {
            if (!(mask >> j & 1))
                continue;
            covered += t.children[j].size() + 1;
            Micros agg = 0;
            bool inf = false;
            for (ReplicaId c : t.children[j]) {
                const Micros l = lat(t.intermediates[j], c);
                if (l == kInfinite)
                    inf = true;
                agg = std::max(agg, l);
            }
            const Micros up = lat(t.intermediates[j], t.root);
            const Micros cost = inf || up == kInfinite ? kInfinite : agg + up;
            worst = std::max(worst, cost);
        }
        if (covered >= k - 1)
            best = std::min(best, worst);
    }
    return best;
}

// Minimum over all k-subsets of the maximum element, by enumeration.
inline Micros min_max_over_subsets(const std::vector<Micros>& v, std::size_t k)
{
    const std::size_t m = v.size();
    Micros best = kInfinite;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcountll(mask)) != k)
            continue;
        Micros worst = 0;
        for (std::size_t i = 0; i < m; ++i)
            if (mask >> i & 1)
                worst = std::max(worst, v[i]);
        best = std::min(best, worst);
    }
    return best;
}

inline Micros plus(Micros a, Micros b) { return a == kInfinite || b == kInfinite ? kInfinite : a + b; }

struct PbftSchedule {
    std::vector<Micros> propose;                  // at each replica
    std::vector<std::vector<Micros>> write;       // [from][to]
    std::vector<Micros> write_quorum;             // at each replica
    std::vector<std::vector<Micros>> accept;      // [from][to]
    Micros round = 0;
};

// Three-phase all-to-all schedule with one-way delay ceil(rtt/2), own
// messages at creation time, quorums of `k` found by subset enumeration.
inline PbftSchedule pbft_schedule(std::uint32_t leader, const std::vector<std::vector<Micros>>& rtt, std::size_t k)
{
    const std::size_t n = rtt.size();
    auto hop = [&](std::size_t a, std::size_t b) -> Micros {
        if (a == b)
            return 0;
        return rtt[a][b] == kInfinite ? kInfinite : (rtt[a][b] + 1) / 2;
    };
    PbftSchedule s;
    s.propose.resize(n);
    for (std::size_t a = 0; a < n; ++a)
        s.propose[a] = hop(leader, a);
    s.write.assign(n, std::vector<Micros>(n));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            s.write[a][b] = plus(s.propose[a], hop(a, b));
    s.write_quorum.resize(n);
    for (std::size_t b = 0; b < n; ++b) {
        std::vector<Micros> in;
        for (std::size_t a = 0; a < n; ++a)
            in.push_back(s.write[a][b]);
        s.write_quorum[b] = min_max_over_subsets(in, k);
    }
    s.accept.assign(n, std::vector<Micros>(n));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            s.accept[a][b] = plus(s.write_quorum[a], hop(a, b));
    std::vector<Micros> at_leader;
    for (std::size_t a = 0; a < n; ++a)
        at_leader.push_back(s.accept[a][leader]);
    s.round = min_max_over_subsets(at_leader, k);
    return s;
}

// Exhaustive optimum of the tree score over every assignment of root,
// intermediates (as a set, then labelled by their leaf groups) and leaves for
// a perfect tree. Feasible for n = 13 (about 4.8 million trees).
inline Micros exhaustive_tree_optimum(const optilog::LatencyMatrix& lat, std::uint32_t n, std::uint32_t b, std::size_t k)
{
    Micros best = kInfinite;
    std::vector<std::uint32_t> all(n);
    for (std::uint32_t i = 0; i < n; ++i)
        all[i] = i;
    for (std::uint32_t root = 0; root < n; ++root) {
        std::vector<std::uint32_t> rest;
        for (std::uint32_t i = 0; i < n; ++i)
            if (i != root)
                rest.push_back(i);
        std::vector<bool> pick(rest.size(), false);
        std::fill(pick.begin(), pick.begin() + b, true);
        do {
            std::vector<std::uint32_t> inter, leaves;
            for (std::size_t i = 0; i < rest.size(); ++i)
                (pick[i] ? inter : leaves).push_back(rest[i]);
            // Label every leaf with its intermediate; groups of exactly b.
            std::vector<std::uint32_t> label;
            for (std::uint32_t j = 0; j < b; ++j)
                for (std::uint32_t c = 0; c < b; ++c)
                    label.push_back(j);
            do {
                std::vector<optilog::SubtreeCost> costs(b, optilog::SubtreeCost{0, b + 1});
                for (std::size_t i = 0; i < leaves.size(); ++i)
                    costs[label[i]].cost = std::max(costs[label[i]].cost, lat(rid(inter[label[i]]), rid(leaves[i])));
                Micros worst_needed = kInfinite;
                // Greedy is proven elsewhere; here a direct subset minimum.
                for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << b); ++mask) {
                    std::size_t covered = 0;
                    Micros worst = 0;
                    for (std::uint32_t j = 0; j < b; ++j)
                        if (mask >> j & 1) {
                            covered += b + 1;
                            worst = std::max(worst, costs[j].cost + lat(rid(inter[j]), rid(root)));
                        }
                    if (covered >= k - 1)
                        worst_needed = std::min(worst_needed, worst);
                }
                best = std::min(best, worst_needed);
            } while (std::next_permutation(label.begin(), label.end()));
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return best;
}

inline bool vertex_disjoint(const std::vector<optilog::Edge>& mg)
{
    std::set<ReplicaId> seen;
    for (const auto& [a, b] : mg)
        if (!seen.insert(a).second || !seen.insert(b).second)
            return false;
    return true;
}

// No graph edge can be added to `mg` without sharing a vertex.
inline bool maximal(const std::vector<optilog::Edge>& mg, const std::vector<std::pair<ReplicaId, ReplicaId>>& edges)
{
    std::set<ReplicaId> used;
    for (const auto& [a, b] : mg) {
        used.insert(a);
        used.insert(b);
    }
    for (const auto& [a, b] : edges)
        if (!used.count(a) && !used.count(b))
            return false;
    return true;
}

inline std::set<ReplicaId> triangles(const std::vector<optilog::Edge>& mg, const optilog::SuspicionState& s)
{
    std::set<ReplicaId> used, t;
    for (const auto& [a, b] : mg) {
        used.insert(a);
        used.insert(b);
    }
    for (ReplicaId v : s.vertices()) {
        if (used.count(v))
            continue;
        for (const auto& [x, y] : mg)
            if (s.graph().has_edge(v, x) && s.graph().has_edge(v, y))
                t.insert(v);
    }
    return t;
}

} // namespace oracle

#endif
