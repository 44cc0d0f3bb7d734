#ifndef OPTILOG_ANALYSIS_HPP
#define OPTILOG_ANALYSIS_HPP

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "config_search.hpp"
#include "simnet.hpp"
#include "tree_candidates.hpp"
#include "tree_score.hpp"

namespace optilog {

struct Interval {
    double mean = 0;
    double half_width = 0;
    double stddev = 0; // sample standard deviation
};

// Mean with a two-sided Student-t confidence interval.
inline Interval t_interval(const std::vector<double>& xs, double confidence = 0.95)
{
    Interval out;
    if (xs.empty())
        return out;
    const double n = static_cast<double>(xs.size());
    out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() < 2)
        return out;
    double ss = 0;
    for (double x : xs)
        ss += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(ss / (n - 1));
    const boost::math::students_t dist(n - 1);
    out.half_width = boost::math::quantile(boost::math::complement(dist, (1 - confidence) / 2)) * out.stddev / std::sqrt(n);
    return out;
}

enum class CurveProtocol : std::uint8_t { OptiTree, Kauri, KauriSa };

inline const char* to_string(CurveProtocol p)
{
    switch (p) {
    case CurveProtocol::OptiTree: return "opti-tree";
    case CurveProtocol::Kauri: return "kauri";
    case CurveProtocol::KauriSa: return "kauri-sa";
    }
    return "?";
}

struct CurvePoint {
    CurveProtocol protocol;
    std::size_t replication;
    std::size_t reconfiguration;
    Micros score;
};

struct CurveParams {
    std::uint32_t n = 31;
    std::size_t reconfigurations = 0; // successive targeted suspicions
    std::size_t replications = 1;
    std::uint64_t seed = 1;
    std::size_t cities = 21;
    AnnealingParams annealing;
    bool kauri_sa_until_exhausted = false; // ignore `reconfigurations` for Kauri-sa
};

namespace detail {

inline Micros search_tree(const LatencyMatrix& lat, std::uint32_t n, const std::set<ReplicaId>& cand, std::size_t k,
                          AnnealingParams ap, std::uint64_t seed, Configuration* out = nullptr)
{
    ap.seed = seed;
    const auto res = sa_search([&](const Arrangement& a) { return tree_score(a, lat, k); }, Topology::Tree, n, cand, ap);
    if (out)
        *out = res.config;
    return res.score;
}

inline std::set<ReplicaId> all_replicas(std::uint32_t n)
{
    std::set<ReplicaId> s;
    for (std::uint32_t i = 0; i < n; ++i)
        s.insert(rid(i));
    return s;
}

} // namespace detail

// One replication of the three reconfiguration curves on a synthetic world.
// Opti-Tree: each step a non-root internal node suspects the root, the root
// reciprocates, and the tree is searched again with k = q + u. Kauri-sa drops
// every internal node of the failed tree and scores with k = q + f; Kauri
// walks its precomputed bins.
inline std::vector<CurvePoint> reconfig_curve_replication(const CurveParams& cp, std::size_t rep)
{
    const SystemParams params = SystemParams::for_n(cp.n);
    const std::uint64_t seed = mix_seed(cp.seed, rep);
    const LatencyMatrix lat = LatencyMatrix::from_rows(place_replicas(synth_latency_matrix(cp.cities, seed), cp.n));
    const std::uint32_t b = builder_branch_factor(cp.n);
    const std::size_t kauri_k = std::min<std::size_t>(params.q + params.f, params.n);
    std::vector<CurvePoint> out;

    {
        TreeSuspicionState state(params);
        Rng rng(mix_seed(seed, 0x6f7074ULL));
        for (std::size_t i = 0; i <= cp.reconfigurations; ++i) {
            const CandidateSet c = tree_candidates(state);
            const std::set<ReplicaId> cand(c.candidates.begin(), c.candidates.end());
            if (cand.size() < b + 1)
                break;
            Configuration cfg;
            const Micros s = detail::search_tree(lat, cp.n, cand, std::min<std::size_t>(params.q + c.u, params.n),
                                                 cp.annealing, mix_seed(seed, 100 + i), &cfg);
            out.push_back({CurveProtocol::OptiTree, rep, i, s});
            if (i == cp.reconfigurations)
                break;
            const auto& tree = std::get<TreeConfig>(cfg);
            const ReplicaId accuser = tree.intermediates[rng.below(tree.intermediates.size())];
            const View v = i;
            state.apply({SuspicionKind::Slow, accuser, tree.root, v, MessageType::AggVote}, v);
            state.apply({SuspicionKind::False, tree.root, accuser, v, MessageType::AggVote}, v);
        }
    }

    {
        std::set<ReplicaId> cand = detail::all_replicas(cp.n);
        for (std::size_t i = 0; (cp.kauri_sa_until_exhausted || i <= cp.reconfigurations) && cand.size() >= b + 1; ++i) {
            Configuration cfg;
            const Micros s = detail::search_tree(lat, cp.n, cand, kauri_k, cp.annealing, mix_seed(seed, 200 + i), &cfg);
            out.push_back({CurveProtocol::KauriSa, rep, i, s});
            for (ReplicaId r : special_roles(cfg))
                cand.erase(r);
        }
    }

    {
        Rng rng(mix_seed(seed, 0x6b6175ULL));
        const KauriPlan plan = kauri_bins(params, b + 1, rng);
        for (std::size_t i = 0; i <= cp.reconfigurations && i < plan.trees.size(); ++i)
            out.push_back({CurveProtocol::Kauri, rep, i, tree_score(plan.trees[i], lat, kauri_k)});
    }
    return out;
}

inline std::string curve_csv(const std::vector<CurvePoint>& pts)
{
    std::ostringstream os;
    os << "protocol,replication,reconfiguration,score_us\n";
    for (const auto& p : pts)
        os << to_string(p.protocol) << ',' << p.replication << ',' << p.reconfiguration << ','
           << (is_infinite(p.score) ? std::string("inf") : std::to_string(p.score)) << '\n';
    return os.str();
}

// Random suspicion graph over n vertices with `edges` distinct edges.
inline SuspicionState random_suspicion_graph(std::uint32_t n, std::size_t edges, Rng& rng)
{
    SystemParams params = SystemParams::for_n(n);
    SuspicionState s(params);
    const std::size_t max_edges = std::size_t{n} * (n - 1) / 2;
    std::set<std::pair<std::uint32_t, std::uint32_t>> used;
    while (used.size() < std::min(edges, max_edges)) {
        auto a = static_cast<std::uint32_t>(rng.below(n));
        auto b = static_cast<std::uint32_t>(rng.below(n));
        if (a == b)
            continue;
        if (a > b)
            std::swap(a, b);
        if (used.insert({a, b}).second)
            s.apply({SuspicionKind::Slow, rid(a), rid(b), 0, MessageType::ProposalTimestamp}, 0);
    }
    return s;
}

struct BenchRow {
    std::uint32_t n;
    double mean_ms;
    double std_ms;
};

inline std::vector<BenchRow> candidate_bench(std::vector<std::uint32_t> sizes, std::size_t graphs, std::uint64_t seed)
{
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    std::vector<BenchRow> rows;
    for (std::uint32_t n : sizes) {
        Rng rng(mix_seed(seed, n));
        std::vector<double> ms;
        for (std::size_t g = 0; g < graphs; ++g) {
            const SuspicionState s = random_suspicion_graph(n, n, rng);
            const auto t0 = std::chrono::steady_clock::now();
            const CandidateSet c = base_candidates(s);
            const auto t1 = std::chrono::steady_clock::now();
            if (c.candidates.empty() && n > 0)
                throw std::logic_error("empty candidate set");
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        const Interval iv = t_interval(ms);
        rows.push_back({n, iv.mean, iv.stddev});
    }
    return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows)
{
    std::ostringstream os;
    os << "n,mean_ms,std_ms\n";
    for (const auto& r : rows)
        os << r.n << ',' << r.mean_ms << ',' << r.std_ms << '\n';
    return os.str();
}

} // namespace optilog

#endif
