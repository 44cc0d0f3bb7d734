#ifndef OPTILOG_TREE_CANDIDATES_HPP
#define OPTILOG_TREE_CANDIDATES_HPP

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "suspicion.hpp"

namespace optilog {

using Edge = std::pair<ReplicaId, ReplicaId>;

inline Edge make_edge(ReplicaId x, ReplicaId y) { return idx(x) < idx(y) ? Edge{x, y} : Edge{y, x}; }

// Opti-Tree view of the suspicion graph: a maximal set MG of vertex-disjoint
// edges and the triangle set T. MG is maintained incrementally while edges are
// only added; any removal (crash, faulty, purge) rebuilds it from insertion
// order.
class TreeSuspicionState {
public:
    TreeSuspicionState() = default;
    explicit TreeSuspicionState(const SystemParams& params) : base_(params) {}

    const SuspicionState& base() const { return base_; }
    const std::vector<Edge>& mg() const { return mg_; }
    const std::set<ReplicaId>& t_set() const { return t_; }

    bool apply(const Suspicion& s, View view) { return sync(base_.apply(s, view)); }
    bool tick(View view) { return sync(base_.tick(view)); }
    bool purge_old(View view) { return sync(base_.purge_old(view)); }
    bool repair_independence() { return sync(base_.repair_independence()); }

    bool mark_faulty(ReplicaId r)
    {
        base_.mark_faulty(r);
        return sync(true);
    }

    // Adds `e` to MG when both endpoints are free, then applies 3-augmenting
    // swaps: an MG edge (x,y) is replaced by (x,p),(y,q) when x and y have
    // distinct free neighbours p and q. Candidates are tried in MG order and
    // then edge insertion order.
    void maintain_matching(Edge e)
    {
        const UndirectedGraph& g = base_.graph();
        if (!g.has_edge(e.first, e.second))
            return;
        if (!matched(e.first) && !matched(e.second))
            mg_.push_back(make_edge(e.first, e.second));
        const auto order = base_.edges();
        for (bool swapped = true; swapped;) {
            swapped = false;
            for (std::size_t k = 0; k < mg_.size() && !swapped; ++k) {
                const auto [x, y] = mg_[k];
                const auto px = free_neighbours(x, order);
                const auto qy = free_neighbours(y, order);
                for (ReplicaId p : px) {
                    auto q = std::find_if(qy.begin(), qy.end(), [&](ReplicaId c) { return c != p; });
                    if (q == qy.end())
                        continue;
                    mg_.erase(mg_.begin() + static_cast<std::ptrdiff_t>(k));
                    mg_.push_back(make_edge(x, p));
                    mg_.push_back(make_edge(y, *q));
                    swapped = true;
                    break;
                }
            }
        }
    }

    // Vertices outside MG adjacent to both endpoints of some MG edge.
    std::set<ReplicaId> triangle_set() const
    {
        std::set<ReplicaId> t;
        const UndirectedGraph& g = base_.graph();
        for (ReplicaId v : base_.vertices()) {
            if (matched(v))
                continue;
            for (const auto& [x, y] : mg_)
                if (g.has_edge(v, x) && g.has_edge(v, y)) {
                    t.insert(v);
                    break;
                }
        }
        return t;
    }

    bool matched(ReplicaId v) const
    {
        return std::any_of(mg_.begin(), mg_.end(), [&](const Edge& e) { return e.first == v || e.second == v; });
    }

    void serialize(ByteWriter& w) const
    {
        base_.serialize(w);
        w.u64(mg_.size());
        for (const auto& [a, b] : mg_) {
            w.id(a);
            w.id(b);
        }
        w.ids(t_);
    }

private:
    std::vector<ReplicaId> free_neighbours(ReplicaId v, const std::vector<Edge>& order) const
    {
        std::vector<ReplicaId> out;
        for (const auto& [a, b] : order) {
            if (a != v && b != v)
                continue;
            const ReplicaId other = a == v ? b : a;
            if (!matched(other))
                out.push_back(other);
        }
        return out;
    }

    bool sync(bool changed)
    {
        const auto edges = base_.edges();
        if (base_.removals() != seen_removals_) {
            seen_removals_ = base_.removals();
            mg_.clear();
            for (const auto& e : edges)
                maintain_matching(e);
        } else {
            for (std::size_t i = processed_; i < edges.size(); ++i)
                maintain_matching(edges[i]);
        }
        processed_ = edges.size();
        t_ = triangle_set();
        return changed;
    }

    SuspicionState base_;
    std::vector<Edge> mg_;
    std::set<ReplicaId> t_;
    std::size_t processed_ = 0;
    std::uint64_t seen_removals_ = 0;
};

inline CandidateSet tree_candidates(const TreeSuspicionState& state)
{
    CandidateSet c;
    const auto& t = state.t_set();
    for (ReplicaId v : state.base().vertices())
        if (!state.matched(v) && !t.count(v))
            c.candidates.push_back(v);
    c.u = state.mg().size() + t.size();
    return c;
}

inline CandidateSet tree_candidates(const TreeSuspicionState& state, const std::set<ReplicaId>& faulty)
{
    CandidateSet c = tree_candidates(state);
    std::erase_if(c.candidates, [&](ReplicaId r) { return faulty.count(r) > 0; });
    return c;
}

} // namespace optilog

#endif
