#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "optilog/optilog.hpp"

using namespace optilog;
namespace fs = std::filesystem;

namespace {

const char* kRunColumns = R"(Writes to --out:
  rep_NNN.csv        one row per round:
    round                      round number (one view per round)
    epoch                      configuration epoch, +1 per reconfiguration
    leader                     root (tree) or leader (star) of the round
    timestamp_us               proposal timestamp
    committed                  1 if q votes/accepts arrived by the deadline
    commit_latency_us          commit time minus timestamp, -1 if none
    failed                     1 if not committed by timestamp + delta*D_R
    raw_suspicions             suspicions raised by correct replicas
    retained_suspicions        suspicions kept after causal filtering
    correct_pair_suspicions    retained ones between two correct replicas
    fabricated                 suspicions injected by faulty replicas
    candidates                 |Cand| at the start of the round
    u                          estimated non-crash faulty replicas
    internals_correct          1 if every special role is held by a correct replica
    predicted_dr_us            D_R of the installed configuration ("inf" if none)
    reconfigured               1 if a new configuration was installed this round
  rep_NNN.log.jsonl  the shared log, one entry per line
  summary.json       per-replication summaries plus mean and 95% t-interval
  manifest.json      scenario, base seed and per-replication seeds for `rerun`
Replication i uses seed mix(base_seed, i). OPTILOG_THREADS caps worker threads.)";

const char* kCurveColumns = R"(CSV columns:
  protocol          opti-tree | kauri-sa | kauri
  replication       replication index
  reconfiguration   number of reconfigurations so far (0 = initial tree)
  score_us          tree score with the protocol's vote target ("inf" if none))";

const char* kBenchColumns = R"(CSV columns:
  n        number of replicas
  mean_ms  mean base_candidates time over the random graphs
  std_ms   sample standard deviation)";

std::vector<std::uint32_t> parse_sizes(const std::string& text)
{
    std::vector<std::uint32_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const unsigned long v = std::stoul(item, &used);
        if (used != item.size() || v < 1)
            throw std::invalid_argument("bad size '" + item + "'");
        out.push_back(static_cast<std::uint32_t>(v));
    }
    if (out.empty())
        throw std::invalid_argument("--sizes is empty");
    return out;
}

void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    if (fs::path(path).has_parent_path())
        fs::create_directories(fs::path(path).parent_path());
    write_text(path, text);
}

void print_batch(const json& manifest, const fs::path& out)
{
    const json summary = json::parse(read_text(out / "summary.json"));
    const auto& lat = summary["mean_commit_latency_us"];
    std::cout << "reps " << manifest["reps"] << ", base seed " << manifest["base_seed"] << "\n"
              << "mean commit latency " << lat["mean"].get<double>() / 1000.0 << " ms (95% CI "
              << lat["ci95_low"].get<double>() / 1000.0 << " .. " << lat["ci95_high"].get<double>() / 1000.0 << ")\n"
              << "reconfigurations " << summary["reconfigurations"]["mean"] << ", runs reaching a working configuration "
              << summary["runs_reaching_working"] << "\n"
              << "outputs in " << out.string() << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Suspicion-driven reconfiguration simulator for tree and star BFT overlays"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = "out";
    std::size_t reps = 1;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Replicate a scenario and write per-round CSVs");
    run->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    run->add_option("--reps", reps, "Replications (>= 1)");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Base seed (default: the scenario's seed)");
    run->footer(kRunColumns);

    std::string manifest_path;
    auto* rerun = app.add_subcommand("rerun", "Reproduce a run from its manifest.json");
    rerun->add_option("manifest", manifest_path, "manifest.json written by run")->required()->check(CLI::ExistingFile);
    rerun->add_option("--out", out_dir, "Output directory")->required();

    CurveParams cp;
    std::string curve_out;
    std::uint64_t curve_iterations = 20000;
    auto* curve = app.add_subcommand("reconfig-curve", "Tree score after successive targeted suspicions");
    curve->add_option("--n", cp.n, "Replicas")->check(CLI::Range(std::uint32_t{7}, static_cast<std::uint32_t>(kMaxReplicas)));
    curve->add_option("--faults", cp.reconfigurations, "Targeted suspicions (reconfigurations)");
    curve->add_option("--reps", cp.replications, "Replications")->check(CLI::PositiveNumber);
    curve->add_option("--seed", cp.seed, "Base seed");
    curve->add_option("--cities", cp.cities, "Synthetic cities")->check(CLI::PositiveNumber);
    curve->add_option("--iterations", curve_iterations, "Annealing iterations per search (0 = until converged)");
    curve->add_flag("--kauri-sa-exhaust", cp.kauri_sa_until_exhausted, "Run Kauri-sa until candidates run out");
    curve->add_option("--out", curve_out, "CSV path (default stdout)");
    curve->footer(kCurveColumns);

    std::string sizes = "10,20,30,40,50,60,70,80,90,100", bench_out;
    std::size_t graphs = 100;
    std::uint64_t bench_seed = 1;
    auto* bench = app.add_subcommand("candidate-bench", "Time candidate computation on random suspicion graphs");
    bench->add_option("--sizes", sizes, "Comma-separated replica counts");
    bench->add_option("--graphs", graphs, "Random graphs per size")->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_seed, "Seed");
    bench->add_option("--out", bench_out, "CSV path (default stdout)");
    bench->footer(kBenchColumns);

    std::string log_path, topology = "tree";
    std::uint32_t log_n = 0;
    std::optional<std::uint32_t> log_f;
    std::optional<View> until;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a shared log and print the monitors' state");
    replay_cmd->add_option("log", log_path, "rep_NNN.log.jsonl")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--n", log_n, "Replicas")->required();
    replay_cmd->add_option("--f", log_f, "Fault bound (default (n-1)/3)");
    replay_cmd->add_option("--topology", topology, "tree or star")->check(CLI::IsMember({"tree", "star"}));
    replay_cmd->add_option("--until", until, "Stop after this view");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (reps == 0)
                throw std::invalid_argument("--reps must be >= 1");
            const ScenarioSpec spec = load_scenario(scenario_path);
            const json manifest = run_batch(spec, reps, seed.value_or(spec.seed), out_dir);
            print_batch(manifest, out_dir);
        } else if (*rerun) {
            const json manifest = rerun_manifest(manifest_path, out_dir);
            print_batch(manifest, out_dir);
        } else if (*curve) {
            cp.annealing.max_iterations = curve_iterations;
            if (cp.reconfigurations == 0 && !curve->count("--faults"))
                cp.reconfigurations = SystemParams::for_n(cp.n).f;
            std::vector<std::vector<CurvePoint>> per_rep(cp.replications);
            parallel_for(cp.replications, [&](std::size_t r) { per_rep[r] = reconfig_curve_replication(cp, r); });
            std::vector<CurvePoint> all;
            for (const auto& p : per_rep)
                all.insert(all.end(), p.begin(), p.end());
            emit(curve_out, curve_csv(all));
        } else if (*bench) {
            emit(bench_out, bench_csv(candidate_bench(parse_sizes(sizes), graphs, bench_seed)));
        } else if (*replay_cmd) {
            std::ifstream in(log_path);
            const SharedLog log = load_jsonl(in);
            const auto params = SystemParams::make(log_n, log_f.value_or((log_n - 1) / 3));
            const MonitorSet m =
                replay(log, MonitorSet(params, topology == "tree" ? Topology::Tree : Topology::Star), until);
            const CandidateSet c = m.candidates();
            json out = {{"entries", log.size()},
                        {"skipped", m.skipped()},
                        {"candidates", jsonio::ids(c.candidates)},
                        {"u", c.u},
                        {"faulty", jsonio::ids(m.misbehavior().faulty())},
                        {"crash", jsonio::ids(m.suspicion().base().crash_set())}};
            if (m.config().current)
                out["configuration"] = to_json(*m.config().current);
            std::cout << out.dump(2) << "\n";
        }
    } catch (const ScenarioError& e) {
        std::cerr << scenario_path << ":" << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
