#ifndef OPTILOG_CONFIG_SEARCH_HPP
#define OPTILOG_CONFIG_SEARCH_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "pbft_score.hpp"
#include "suspicion.hpp"
#include "tree_score.hpp"

namespace optilog {

class InsufficientCandidates : public std::invalid_argument {
public:
    InsufficientCandidates(std::size_t have, std::size_t need)
        : std::invalid_argument("need " + std::to_string(need) + " candidates for special roles, have " +
                                std::to_string(have))
    {
    }
};

struct AnnealingParams {
    double initial_temperature = 0; // 0: use the initial configuration's score
    double cooling_rate = 0.995;
    double convergence_ratio = 1e-3; // stop once T < ratio * T0
    std::uint64_t max_iterations = 0; // 0: no iteration cap
    std::chrono::milliseconds time_budget{0}; // 0: no wall-clock cap
    std::uint64_t seed = 1;

    void validate() const
    {
        if (!(cooling_rate > 0 && cooling_rate < 1))
            throw std::invalid_argument("cooling_rate must be in (0,1)");
        if (!(convergence_ratio > 0 && convergence_ratio < 1))
            throw std::invalid_argument("convergence_ratio must be in (0,1)");
        if (initial_temperature < 0)
            throw std::invalid_argument("initial_temperature must be >= 0");
        if (time_budget.count() < 0)
            throw std::invalid_argument("time_budget must be >= 0");
    }
};

// Positions [0, special) of the arrangement are special roles.
inline void require_candidates(const Arrangement& a, const std::set<ReplicaId>& cand)
{
    std::size_t have = 0;
    for (ReplicaId r : a.order)
        have += cand.count(r);
    if (have < a.special_count())
        throw InsufficientCandidates(have, a.special_count());
}

inline Arrangement mutate(const Arrangement& a, const std::set<ReplicaId>& cand, Rng& rng)
{
    require_candidates(a, cand);
    const std::size_t n = a.order.size();
    const std::size_t special = a.special_count();
    auto allowed = [&](std::size_t i, std::size_t j) {
        if (i == j)
            return false;
        // after the swap position i holds order[j] and vice versa
        if (i < special && !cand.count(a.order[j]))
            return false;
        if (j < special && !cand.count(a.order[i]))
            return false;
        return true;
    };
    Arrangement out = a;
    if (a.topology == Topology::Star) {
        // only the leader position matters; swap it with another candidate
        std::vector<std::size_t> options;
        for (std::size_t j = 1; j < n; ++j)
            if (allowed(0, j))
                options.push_back(j);
        if (!options.empty())
            std::swap(out.order[0], out.order[options[rng.below(options.size())]]);
        return out;
    }
    for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t i = rng.below(n), j = rng.below(n);
        if (allowed(i, j)) {
            std::swap(out.order[i], out.order[j]);
            return out;
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> options;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (allowed(i, j))
                options.emplace_back(i, j);
    if (!options.empty()) {
        const auto [i, j] = options[rng.below(options.size())];
        std::swap(out.order[i], out.order[j]);
    }
    return out;
}

inline Configuration mutate(const Configuration& c, const std::set<ReplicaId>& cand, Rng& rng)
{
    return to_configuration(mutate(to_arrangement(c), cand, rng));
}

// Uniformly random arrangement with candidates in every special position.
inline Arrangement random_arrangement(Topology topology, std::uint32_t n, const std::set<ReplicaId>& cand, Rng& rng)
{
    Arrangement a;
    a.topology = topology;
    a.branch = topology == Topology::Tree ? builder_branch_factor(n) : 0;
    std::vector<ReplicaId> special(cand.begin(), cand.end());
    std::erase_if(special, [&](ReplicaId r) { return idx(r) >= n; });
    if (special.size() < a.special_count())
        throw InsufficientCandidates(special.size(), a.special_count());
    rng.shuffle(special);
    special.resize(a.special_count());
    std::vector<ReplicaId> rest;
    for (std::uint32_t i = 0; i < n; ++i)
        if (std::find(special.begin(), special.end(), rid(i)) == special.end())
            rest.push_back(rid(i));
    rng.shuffle(rest);
    a.order = special;
    a.order.insert(a.order.end(), rest.begin(), rest.end());
    return a;
}

using ScoreFn = std::function<Micros(const Arrangement&)>;

struct SearchResult {
    Configuration config;
    Micros score = kInfinite;
    std::uint64_t iterations = 0;
};

namespace detail {

inline double score_value(Micros s) { return is_infinite(s) ? HUGE_VAL : static_cast<double>(s); }

} // namespace detail

inline SearchResult sa_search(const ScoreFn& score_fn, Topology topology, std::uint32_t n,
                              const std::set<ReplicaId>& candidates, const AnnealingParams& params)
{
    params.validate();
    Rng rng(params.seed);
    const auto started = std::chrono::steady_clock::now();
    Arrangement current = random_arrangement(topology, n, candidates, rng);
    Micros current_score = score_fn(current);
    Arrangement best = current;
    Micros best_score = current_score;

    double t0 = params.initial_temperature;
    if (t0 <= 0)
        t0 = is_infinite(current_score) ? 1e6 : static_cast<double>(current_score);
    const double threshold = params.convergence_ratio * t0;
    double temperature = t0;

    // Without a budget the search ends at convergence. With one, each converged
    // schedule restarts from the best configuration until the budget is spent.
    const bool budgeted = params.max_iterations > 0 || params.time_budget.count() > 0;
    std::uint64_t iter = 0;
    while (temperature > 0) {
        if (temperature < threshold) {
            if (!budgeted)
                break;
            temperature = t0;
            current = best;
            current_score = best_score;
        }
        if (params.max_iterations && iter >= params.max_iterations)
            break;
        if (params.time_budget.count() > 0 && (iter & 63) == 0 &&
            std::chrono::steady_clock::now() - started >= params.time_budget)
            break;
        ++iter;
        Arrangement next = mutate(current, candidates, rng);
        const Micros next_score = score_fn(next);
        const double delta = detail::score_value(next_score) - detail::score_value(current_score);
        const bool accept = next_score <= current_score ||
                            (std::isfinite(delta) && rng.unit() < std::exp(-delta / temperature));
        if (accept) {
            current = std::move(next);
            current_score = next_score;
            if (current_score < best_score) {
                best = current;
                best_score = current_score;
            }
        }
        temperature *= params.cooling_rate;
    }
    return {to_configuration(best), best_score, iter};
}

struct BasisVersion {
    std::uint64_t matrix_generation = 0;
    std::uint64_t candidate_version = 0;

    bool operator==(const BasisVersion&) const = default;
};

struct ConfigProposal {
    ReplicaId author{};
    Configuration config;
    Micros claimed_score = 0;
    BasisVersion basis;

    bool operator==(const ConfigProposal&) const = default;
};

// Everything a replica needs to re-score a proposal: identical on all
// replicas that replayed the same log prefix.
struct ScoringBasis {
    BasisVersion version;
    std::function<Micros(const Configuration&)> score;
    std::set<ReplicaId> candidates;
    std::uint32_t n = 0;
    Topology topology = Topology::Tree;
};

enum class RejectReason : std::uint8_t { None, StaleBasis, ScoreMismatch, InvalidConfiguration, DuplicateAuthor };

inline const char* to_string(RejectReason r)
{
    switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::StaleBasis: return "stale_basis";
    case RejectReason::ScoreMismatch: return "score_mismatch";
    case RejectReason::InvalidConfiguration: return "invalid_configuration";
    case RejectReason::DuplicateAuthor: return "duplicate_author";
    }
    return "?";
}

struct Decision {
    enum class Kind : std::uint8_t { Pending, Keep, Reconfigure, Rejected };
    Kind kind = Kind::Pending;
    std::optional<ConfigProposal> chosen;
    RejectReason reason = RejectReason::None;
};

struct ConfigMonitorState {
    std::optional<Configuration> current;
    std::map<ReplicaId, ConfigProposal> proposals; // accepted, awaiting f+1
    std::uint64_t reconfigurations = 0;
    std::uint64_t rejected = 0;

    void serialize(ByteWriter& w) const
    {
        w.u8(current.has_value());
        if (current)
            optilog::serialize(w, *current);
        w.u64(proposals.size());
        for (const auto& [author, p] : proposals) {
            w.id(author);
            optilog::serialize(w, p.config);
            w.i64(p.claimed_score);
            w.u64(p.basis.matrix_generation);
            w.u64(p.basis.candidate_version);
        }
        w.u64(reconfigurations);
        w.u64(rejected);
    }
};

inline bool roles_within(const Configuration& c, const std::set<ReplicaId>& cand)
{
    for (ReplicaId r : special_roles(c))
        if (!cand.count(r))
            return false;
    return true;
}

inline bool configuration_valid(const Configuration& c, const ScoringBasis& basis)
{
    return topology_of(c) == basis.topology && well_formed(c, basis.n) && roles_within(c, basis.candidates);
}

inline Decision config_monitor_step(ConfigMonitorState& state, const ConfigProposal& p, bool current_valid,
                                    const SystemParams& params, const ScoringBasis& basis,
                                    double improvement_ratio = 0.9)
{
    auto reject = [&](RejectReason r) {
        ++state.rejected;
        return Decision{Decision::Kind::Rejected, std::nullopt, r};
    };
    if (!(p.basis == basis.version))
        return reject(RejectReason::StaleBasis);
    if (!configuration_valid(p.config, basis))
        return reject(RejectReason::InvalidConfiguration);
    if (basis.score(p.config) != p.claimed_score)
        return reject(RejectReason::ScoreMismatch);
    if (state.proposals.count(p.author))
        return reject(RejectReason::DuplicateAuthor);
    state.proposals.emplace(p.author, p);
    if (state.proposals.size() < params.f + 1)
        return {};

    const ConfigProposal* best = nullptr;
    for (const auto& [author, q] : state.proposals)
        if (!best || q.claimed_score < best->claimed_score)
            best = &q; // map order makes ties go to the lowest author
    const ConfigProposal chosen = *best;
    state.proposals.clear();

    bool switch_to = !current_valid || !state.current;
    if (!switch_to) {
        const Micros now = basis.score(*state.current);
        switch_to = is_infinite(now) ? !is_infinite(chosen.claimed_score)
                                     : static_cast<double>(chosen.claimed_score) <
                                           improvement_ratio * static_cast<double>(now);
    }
    if (!switch_to)
        return {Decision::Kind::Keep, chosen, RejectReason::None};
    state.current = chosen.config;
    ++state.reconfigurations;
    return {Decision::Kind::Reconfigure, chosen, RejectReason::None};
}

struct KauriPlan {
    std::vector<TreeConfig> trees;
    bool star_fallback = true; // after the last tree Kauri reverts to a star
};

// Bins of m replicas from a seeded permutation; bin i supplies the internal
// nodes of tree i. A remainder forms one more bin padded from the first bin.
inline KauriPlan kauri_bins(const SystemParams& params, std::uint32_t m, Rng& rng)
{
    if (m < 2 || m > params.n)
        throw std::invalid_argument("internal_count must be in [2, n]");
    const std::uint32_t b = m - 1;
    std::vector<ReplicaId> perm = params.replica_set;
    rng.shuffle(perm);
    std::vector<std::vector<ReplicaId>> bins;
    for (std::size_t start = 0; start + m <= perm.size(); start += m)
        bins.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                          perm.begin() + static_cast<std::ptrdiff_t>(start + m));
    if (const std::size_t rem = perm.size() % m; rem != 0) {
        std::vector<ReplicaId> last(perm.end() - static_cast<std::ptrdiff_t>(rem), perm.end());
        for (std::size_t i = 0; last.size() < m; ++i)
            last.push_back(perm[i]);
        bins.push_back(std::move(last));
    }
    // Leaves are spread evenly, so an intermediate may carry more than b
    // children when n is not a perfect tree size for m.
    const std::size_t per = (params.n - m + b - 1) / b;
    KauriPlan plan;
    for (const auto& bin : bins) {
        TreeConfig t;
        t.root = bin[0];
        t.branch_factor = b;
        t.intermediates.assign(bin.begin() + 1, bin.end());
        t.children.assign(b, {});
        std::size_t slot = 0;
        for (ReplicaId r : perm)
            if (std::find(bin.begin(), bin.end(), r) == bin.end())
                t.children[slot++ / per].push_back(r);
        plan.trees.push_back(std::move(t));
    }
    return plan;
}

} // namespace optilog

#endif
