#ifndef OPTILOG_CONFIG_HPP
#define OPTILOG_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bytes.hpp"
#include "core.hpp"

namespace optilog {

class NonPerfectTreeSize : public std::invalid_argument {
public:
    explicit NonPerfectTreeSize(std::uint32_t n)
        : std::invalid_argument("no perfect height-3 tree for n=" + std::to_string(n) +
                                " (admissible: b*b+b+1, e.g. 7, 13, 21, 31, 43, 57, 73)"),
          n_(n)
    {
    }
    std::uint32_t n() const { return n_; }

private:
    std::uint32_t n_;
};

constexpr std::uint32_t perfect_tree_size(std::uint32_t b) { return b * b + b + 1; }

inline std::uint32_t branch_factor(std::uint32_t n)
{
    for (std::uint32_t b = 2; perfect_tree_size(b) <= n; ++b)
        if (perfect_tree_size(b) == n)
            return b;
    throw NonPerfectTreeSize(n);
}

// Smallest b whose perfect tree holds n replicas; used for any n >= 3.
inline std::uint32_t builder_branch_factor(std::uint32_t n)
{
    if (n < 3)
        throw std::invalid_argument("a tree needs at least 3 replicas");
    std::uint32_t b = 1;
    while (perfect_tree_size(b) < n)
        ++b;
    return b;
}

struct TreeConfig {
    ReplicaId root{};
    std::vector<ReplicaId> intermediates;
    std::vector<std::vector<ReplicaId>> children; // parallel to intermediates
    std::uint32_t branch_factor = 0;

    std::uint32_t internal_count() const { return branch_factor + 1; }

    std::size_t size() const
    {
        std::size_t s = 1 + intermediates.size();
        for (const auto& c : children)
            s += c.size();
        return s;
    }

    bool operator==(const TreeConfig&) const = default;
};

struct StarConfig {
    ReplicaId leader{};
    std::uint32_t n = 0;

    bool operator==(const StarConfig&) const = default;
};

using Configuration = std::variant<TreeConfig, StarConfig>;

enum class Topology : std::uint8_t { Tree, Star };

inline Topology topology_of(const Configuration& c)
{
    return std::holds_alternative<TreeConfig>(c) ? Topology::Tree : Topology::Star;
}

// Flat role assignment used by the search: order[0] is the root or leader,
// order[1..branch] the intermediates, the rest leaves filled left to right.
struct Arrangement {
    Topology topology = Topology::Tree;
    std::vector<ReplicaId> order;
    std::uint32_t branch = 0;

    std::size_t special_count() const { return topology == Topology::Tree ? std::size_t{branch} + 1 : 1; }

    bool operator==(const Arrangement&) const = default;
};

inline TreeConfig build_tree(const std::vector<ReplicaId>& order, std::uint32_t b)
{
    if (order.size() < std::size_t{b} + 1)
        throw std::invalid_argument("not enough replicas for the internal nodes");
    if (order.size() > perfect_tree_size(b))
        throw std::invalid_argument("branch factor too small for replica count");
    TreeConfig t;
    t.root = order[0];
    t.branch_factor = b;
    t.intermediates.assign(order.begin() + 1, order.begin() + 1 + b);
    t.children.assign(b, {});
    for (std::size_t i = b + 1, slot = 0; i < order.size(); ++i, ++slot)
        t.children[slot / b].push_back(order[i]);
    return t;
}

inline Configuration to_configuration(const Arrangement& a)
{
    if (a.topology == Topology::Star)
        return StarConfig{a.order.at(0), static_cast<std::uint32_t>(a.order.size())};
    return build_tree(a.order, a.branch);
}

inline Arrangement to_arrangement(const Configuration& c)
{
    Arrangement a;
    if (const auto* s = std::get_if<StarConfig>(&c)) {
        a.topology = Topology::Star;
        a.order.push_back(s->leader);
        for (std::uint32_t i = 0; i < s->n; ++i)
            if (rid(i) != s->leader)
                a.order.push_back(rid(i));
        return a;
    }
    const auto& t = std::get<TreeConfig>(c);
    a.topology = Topology::Tree;
    a.branch = t.branch_factor;
    a.order.push_back(t.root);
    a.order.insert(a.order.end(), t.intermediates.begin(), t.intermediates.end());
    for (const auto& ch : t.children)
        a.order.insert(a.order.end(), ch.begin(), ch.end());
    return a;
}

inline std::vector<ReplicaId> special_roles(const Configuration& c)
{
    if (const auto* s = std::get_if<StarConfig>(&c))
        return {s->leader};
    const auto& t = std::get<TreeConfig>(c);
    std::vector<ReplicaId> r{t.root};
    r.insert(r.end(), t.intermediates.begin(), t.intermediates.end());
    return r;
}

// Structural validity: every replica of 0..n-1 appears exactly once and the
// tree shape matches the builder for n.
inline bool well_formed(const Configuration& c, std::uint32_t n)
{
    if (const auto* s = std::get_if<StarConfig>(&c))
        return s->n == n && idx(s->leader) < n;
    const auto& t = std::get<TreeConfig>(c);
    if (n < 3 || t.branch_factor != builder_branch_factor(n) || t.intermediates.size() != t.branch_factor ||
        t.children.size() != t.branch_factor || t.size() != n)
        return false;
    for (const auto& ch : t.children)
        if (ch.size() > t.branch_factor)
            return false;
    std::vector<bool> seen(n, false);
    for (ReplicaId r : to_arrangement(c).order) {
        if (idx(r) >= n || seen[idx(r)])
            return false;
        seen[idx(r)] = true;
    }
    return true;
}

inline void serialize(ByteWriter& w, const Configuration& c)
{
    if (const auto* s = std::get_if<StarConfig>(&c)) {
        w.u8(1);
        w.id(s->leader);
        w.u32(s->n);
        return;
    }
    const auto& t = std::get<TreeConfig>(c);
    w.u8(0);
    w.id(t.root);
    w.u32(t.branch_factor);
    w.u64(t.intermediates.size());
    for (std::size_t i = 0; i < t.intermediates.size(); ++i) {
        w.id(t.intermediates[i]);
        w.ids(t.children[i]);
    }
}

} // namespace optilog

#endif
