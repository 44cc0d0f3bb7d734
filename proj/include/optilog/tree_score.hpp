#ifndef OPTILOG_TREE_SCORE_HPP
#define OPTILOG_TREE_SCORE_HPP

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "latency.hpp"
#include "suspicion.hpp"

namespace optilog {

struct SubtreeCost {
    Micros cost;      // agg(i) + lat[i][root]
    std::size_t size; // |Ch(i)| + 1
};

// min over M with sum(size) >= k-1 of max cost in M. Taking subtrees in
// ascending cost until the sizes cover k-1 is optimal: if the prefix stops at
// cost c, every subtree cheaper than c together still falls short, so any
// covering M must contain something costing at least c.
inline Micros score_from_costs(std::vector<SubtreeCost> costs, std::size_t k)
{
    if (k <= 1)
        return 0;
    std::sort(costs.begin(), costs.end(), [](const SubtreeCost& a, const SubtreeCost& b) { return a.cost < b.cost; });
    std::size_t covered = 0;
    for (const auto& c : costs) {
        if (is_infinite(c.cost))
            return kInfinite;
        covered += c.size;
        if (covered >= k - 1)
            return c.cost;
    }
    return kInfinite;
}

inline std::size_t intermediate_index(const TreeConfig& tree, ReplicaId i)
{
    auto it = std::find(tree.intermediates.begin(), tree.intermediates.end(), i);
    if (it == tree.intermediates.end())
        throw std::invalid_argument("not an intermediate of this tree");
    return static_cast<std::size_t>(it - tree.intermediates.begin());
}

inline Micros aggregation_latency(const TreeConfig& tree, const LatencyMatrix& lat, ReplicaId i)
{
    Micros agg = 0;
    for (ReplicaId c : tree.children[intermediate_index(tree, i)])
        agg = std::max(agg, lat(i, c));
    return agg;
}

inline Micros tree_score(const TreeConfig& tree, const LatencyMatrix& lat, std::size_t k)
{
    if (k < 1)
        throw std::invalid_argument("vote target k must be >= 1");
    std::vector<SubtreeCost> costs;
    costs.reserve(tree.intermediates.size());
    for (std::size_t j = 0; j < tree.intermediates.size(); ++j) {
        const ReplicaId i = tree.intermediates[j];
        costs.push_back({add_latency(aggregation_latency(tree, lat, i), lat(i, tree.root)), tree.children[j].size() + 1});
    }
    return score_from_costs(std::move(costs), k);
}

// Same score straight from a search arrangement, without building the tree.
inline Micros tree_score(const Arrangement& a, const LatencyMatrix& lat, std::size_t k)
{
    const std::uint32_t b = a.branch;
    const ReplicaId root = a.order[0];
    std::vector<SubtreeCost> costs(b, SubtreeCost{0, 1});
    for (std::size_t pos = b + 1, slot = 0; pos < a.order.size(); ++pos, ++slot) {
        const std::size_t j = slot / b;
        costs[j].cost = std::max(costs[j].cost, lat(a.order[1 + j], a.order[pos]));
        ++costs[j].size;
    }
    for (std::uint32_t j = 0; j < b; ++j)
        costs[j].cost = add_latency(costs[j].cost, lat(a.order[1 + j], root));
    return score_from_costs(std::move(costs), k);
}

inline TimeoutTable tree_timeouts(const TreeConfig& tree, const LatencyMatrix& lat, std::size_t k)
{
    TimeoutTable t;
    const ReplicaId r = tree.root;
    for (std::size_t j = 0; j < tree.intermediates.size(); ++j) {
        const ReplicaId i = tree.intermediates[j];
        const TimeoutKey propose{MessageType::Propose, i, r};
        const Micros dp = lat.one_way(r, i);
        t.d_m[propose] = dp;
        t.derivation[propose] = {std::nullopt, r, i};

        Micros slowest = dp;
        TimeoutKey slowest_key = propose;
        for (ReplicaId c : tree.children[j]) {
            const TimeoutKey fwd{MessageType::FwdPropose, c, i};
            const TimeoutKey vote{MessageType::Vote, i, c};
            const Micros df = add_latency(dp, lat.one_way(i, c));
            const Micros dv = add_latency(df, lat.one_way(c, i));
            t.d_m[fwd] = df;
            t.derivation[fwd] = {propose, i, c};
            t.d_m[vote] = dv;
            t.derivation[vote] = {fwd, c, i};
            if (slowest_key == propose || dv > slowest) {
                slowest = dv;
                slowest_key = vote;
            }
        }
        const TimeoutKey agg{MessageType::AggVote, r, i};
        t.d_m[agg] = add_latency(slowest, lat.one_way(i, r));
        t.derivation[agg] = {slowest_key, i, r};
    }
    t.round_duration = tree_score(tree, lat, k);
    return t;
}

} // namespace optilog

#endif
