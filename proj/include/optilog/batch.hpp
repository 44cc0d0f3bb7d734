#ifndef OPTILOG_BATCH_HPP
#define OPTILOG_BATCH_HPP

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "experiment.hpp"

namespace optilog {

// Worker count: OPTILOG_THREADS if set to a positive integer, else the
// hardware concurrency, never more than `jobs`.
inline std::size_t worker_count(std::size_t jobs)
{
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("OPTILOG_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            n = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs job(i) for i in [0, jobs) on the worker pool. The first exception is
// rethrown after all workers stop.
inline void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& job)
{
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < jobs; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = jobs;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t workers = worker_count(jobs);
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

inline std::uint64_t replication_seed(std::uint64_t base, std::size_t rep) { return mix_seed(base, rep); }

inline std::string rep_name(std::size_t rep, const char* suffix)
{
    std::ostringstream os;
    os << "rep_" << std::setw(3) << std::setfill('0') << rep << suffix;
    return os.str();
}

inline json interval_json(const std::vector<double>& xs)
{
    const Interval iv = t_interval(xs);
    return {{"mean", iv.mean}, {"ci95_low", iv.mean - iv.half_width}, {"ci95_high", iv.mean + iv.half_width},
            {"stddev", iv.stddev}, {"samples", xs.size()}};
}

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + p.string() + "'");
    out << text;
}

inline std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Replicates a scenario `reps` times into `out_dir`: rep_NNN.csv (per round),
// rep_NNN.log.jsonl (shared log), summary.json and manifest.json. Each
// replication reseeds the scenario with mix_seed(base_seed, rep).
inline json run_batch(const ScenarioSpec& scenario, std::size_t reps, std::uint64_t base_seed,
                      const std::filesystem::path& out_dir)
{
    if (reps == 0)
        throw std::invalid_argument("reps must be >= 1");
    std::filesystem::create_directories(out_dir);
    std::vector<ExperimentReport> reports(reps);
    parallel_for(reps, [&](std::size_t i) {
        ScenarioSpec s = scenario;
        s.seed = replication_seed(base_seed, i);
        reports[i] = run_experiment(s);
    });

    json files = json::array();
    json per_rep = json::array();
    std::vector<double> latency, committed_fraction, reconfigs, before_working;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto& r = reports[i];
        write_text(out_dir / rep_name(i, ".csv"), r.to_csv());
        std::ostringstream log;
        dump_jsonl(log, r.log);
        write_text(out_dir / rep_name(i, ".log.jsonl"), log.str());
        files.push_back(rep_name(i, ".csv"));
        files.push_back(rep_name(i, ".log.jsonl"));

        const json s = r.summary();
        per_rep.push_back(s);
        if (s["committed_rounds"].get<std::size_t>() > 0)
            latency.push_back(s["mean_commit_latency_us"].get<double>());
        committed_fraction.push_back(static_cast<double>(s["committed_rounds"].get<std::size_t>()) /
                                     static_cast<double>(r.rounds.size()));
        reconfigs.push_back(static_cast<double>(r.reconfigurations));
        if (r.first_working_round)
            before_working.push_back(static_cast<double>(r.reconfigurations_before_working));
    }

    const json summary = {{"reps", reps},
                          {"base_seed", base_seed},
                          {"mean_commit_latency_us", interval_json(latency)},
                          {"committed_fraction", interval_json(committed_fraction)},
                          {"reconfigurations", interval_json(reconfigs)},
                          {"reconfigurations_before_working", interval_json(before_working)},
                          {"runs_reaching_working", before_working.size()},
                          {"replications", per_rep}};
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    files.push_back("summary.json");

    json seeds = json::array();
    for (std::size_t i = 0; i < reps; ++i)
        seeds.push_back(replication_seed(base_seed, i));
    const json manifest = {{"command", "run"},
                           {"scenario", scenario_to_json(scenario)},
                           {"reps", reps},
                           {"base_seed", base_seed},
                           {"rep_seeds", seeds},
                           {"outputs", files}};
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

// Reruns a manifest written by run_batch into `out_dir`.
inline json rerun_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir)
{
    const json m = json::parse(read_text(manifest_path));
    if (m.value("command", "") != "run")
        throw std::runtime_error("manifest '" + manifest_path.string() + "' is not a run manifest");
    const ScenarioSpec s = parse_scenario(m.at("scenario").dump(2));
    return run_batch(s, m.at("reps").get<std::size_t>(), m.at("base_seed").get<std::uint64_t>(), out_dir);
}

} // namespace optilog

#endif
