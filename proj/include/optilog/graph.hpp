#ifndef OPTILOG_GRAPH_HPP
#define OPTILOG_GRAPH_HPP

#include <bitset>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "core.hpp"

namespace optilog {

inline constexpr std::size_t kMaxReplicas = 256;
using VertexSet = std::bitset<kMaxReplicas>;

class UndirectedGraph {
public:
    UndirectedGraph() = default;
    explicit UndirectedGraph(std::size_t capacity) : capacity_(capacity), adj_(capacity)
    {
        if (capacity > kMaxReplicas)
            throw std::invalid_argument("graph capacity exceeds kMaxReplicas");
    }

    static UndirectedGraph complete_vertex_set(std::size_t n)
    {
        UndirectedGraph g(n);
        for (std::size_t v = 0; v < n; ++v)
            g.present_.set(v);
        return g;
    }

    std::size_t capacity() const { return capacity_; }
    const VertexSet& vertices() const { return present_; }
    bool has_vertex(ReplicaId v) const { return idx(v) < capacity_ && present_.test(idx(v)); }
    std::size_t vertex_count() const { return present_.count(); }

    void add_vertex(ReplicaId v) { present_.set(checked(v)); }

    void remove_vertex(ReplicaId v)
    {
        const std::size_t i = checked(v);
        for (std::size_t u = 0; u < capacity_; ++u)
            if (adj_[i].test(u))
                adj_[u].reset(i);
        adj_[i].reset();
        present_.reset(i);
    }

    void add_edge(ReplicaId a, ReplicaId b)
    {
        const std::size_t i = checked(a), j = checked(b);
        if (i == j)
            throw std::invalid_argument("self loop");
        if (!present_.test(i) || !present_.test(j))
            throw std::invalid_argument("edge endpoint not in graph");
        adj_[i].set(j);
        adj_[j].set(i);
    }

    void remove_edge(ReplicaId a, ReplicaId b)
    {
        adj_[checked(a)].reset(idx(b));
        adj_[checked(b)].reset(idx(a));
    }

    bool has_edge(ReplicaId a, ReplicaId b) const
    {
        return idx(a) < capacity_ && idx(b) < capacity_ && adj_[idx(a)].test(idx(b));
    }

    const VertexSet& neighbors(ReplicaId v) const { return adj_[checked(v)]; }
    const VertexSet& neighbors(std::size_t v) const { return adj_[v]; }

    std::size_t edge_count() const
    {
        std::size_t twice = 0;
        for (const auto& row : adj_)
            twice += row.count();
        return twice / 2;
    }

private:
    std::size_t checked(ReplicaId v) const
    {
        if (idx(v) >= capacity_)
            throw std::out_of_range("vertex outside graph capacity");
        return idx(v);
    }

    std::size_t capacity_ = 0;
    VertexSet present_;
    std::vector<VertexSet> adj_;
};

namespace detail {

// Exact branch and bound for the independence number, with a node budget.
// Returns the best size found; `exact` drops to false when the budget runs out.
class AlphaSearch {
public:
    AlphaSearch(const UndirectedGraph& g, std::size_t budget) : g_(g), budget_(budget) {}

    std::size_t run(const VertexSet& cand, std::size_t stop_at)
    {
        best_ = 0;
        stop_at_ = stop_at;
        search(cand, 0);
        return best_;
    }

    bool exact() const { return exact_; }

private:
    void search(VertexSet cand, std::size_t taken)
    {
        if (best_ >= stop_at_)
            return;
        if (nodes_++ >= budget_) {
            exact_ = false;
            return;
        }
        // Vertices of degree <= 1 inside cand are always safe to take.
        bool reduced = true;
        while (reduced) {
            reduced = false;
            for (std::size_t v = cand._Find_first(); v < kMaxReplicas; v = cand._Find_next(v)) {
                if ((g_.neighbors(v) & cand).count() <= 1) {
                    cand &= ~g_.neighbors(v);
                    cand.reset(v);
                    ++taken;
                    reduced = true;
                }
            }
        }
        const std::size_t rest = cand.count();
        if (rest == 0) {
            best_ = std::max(best_, taken);
            return;
        }
        if (taken + rest <= best_)
            return;
        std::size_t pivot = kMaxReplicas, pivot_deg = 0;
        for (std::size_t v = cand._Find_first(); v < kMaxReplicas; v = cand._Find_next(v)) {
            const std::size_t d = (g_.neighbors(v) & cand).count();
            if (d > pivot_deg) {
                pivot = v;
                pivot_deg = d;
            }
        }
        VertexSet with = cand & ~g_.neighbors(pivot);
        with.reset(pivot);
        search(with, taken + 1);
        VertexSet without = cand;
        without.reset(pivot);
        search(without, taken);
    }

    const UndirectedGraph& g_;
    std::size_t budget_;
    std::size_t nodes_ = 0;
    std::size_t best_ = 0;
    std::size_t stop_at_ = kMaxReplicas + 1;
    bool exact_ = true;
};

// Lowest-id minimum-degree greedy set, the fallback when the exact search
// exhausts its budget.
inline VertexSet greedy_independent(const UndirectedGraph& g, VertexSet cand)
{
    VertexSet chosen;
    while (cand.any()) {
        std::size_t pick = kMaxReplicas, pick_deg = kMaxReplicas + 1;
        for (std::size_t v = cand._Find_first(); v < kMaxReplicas; v = cand._Find_next(v)) {
            const std::size_t d = (g.neighbors(v) & cand).count();
            if (d < pick_deg) {
                pick = v;
                pick_deg = d;
            }
        }
        chosen.set(pick);
        cand &= ~g.neighbors(pick);
        cand.reset(pick);
    }
    return chosen;
}

} // namespace detail

inline constexpr std::size_t kIndependentSetBudget = 2'000'000;

struct IndependenceResult {
    std::size_t size = 0;
    bool exact = true;
};

inline IndependenceResult independence_number(const UndirectedGraph& g,
                                              std::size_t budget = kIndependentSetBudget)
{
    detail::AlphaSearch s(g, budget);
    const std::size_t a = s.run(g.vertices(), kMaxReplicas + 1);
    return {a, s.exact()};
}

// True when an independent set of at least k vertices is found.
inline bool has_independent_set(const UndirectedGraph& g, std::size_t k,
                                std::size_t budget = kIndependentSetBudget)
{
    if (k == 0)
        return true;
    if (g.vertex_count() < k)
        return false;
    if (detail::greedy_independent(g, g.vertices()).count() >= k)
        return true;
    detail::AlphaSearch s(g, budget);
    return s.run(g.vertices(), k) >= k;
}

// Lexicographically smallest maximum independent set (as a sorted id list).
// Built greedily: take the lowest vertex that still extends to a maximum set.
inline std::vector<ReplicaId> max_independent_set(const UndirectedGraph& g,
                                                  std::size_t budget = kIndependentSetBudget)
{
    detail::AlphaSearch full(g, budget);
    std::size_t target = full.run(g.vertices(), kMaxReplicas + 1);
    std::vector<ReplicaId> out;
    if (!full.exact()) {
        const VertexSet s = detail::greedy_independent(g, g.vertices());
        for (std::size_t v = s._Find_first(); v < kMaxReplicas; v = s._Find_next(v))
            out.push_back(rid(static_cast<std::uint32_t>(v)));
        return out;
    }
    VertexSet cand = g.vertices();
    while (target > 0) {
        bool placed = false;
        for (std::size_t v = cand._Find_first(); v < kMaxReplicas; v = cand._Find_next(v)) {
            VertexSet rest = cand & ~g.neighbors(v);
            rest.reset(v);
            // Only vertices above v can join; lower ones were already ruled out.
            for (std::size_t u = rest._Find_first(); u < v; u = rest._Find_next(u))
                rest.reset(u);
            detail::AlphaSearch sub(g, budget);
            if (sub.run(rest, target - 1) >= target - 1) {
                out.push_back(rid(static_cast<std::uint32_t>(v)));
                cand = rest;
                --target;
                placed = true;
                break;
            }
        }
        if (!placed)
            break; // unreachable with an exact target
    }
    return out;
}

} // namespace optilog

#endif
