#ifndef OPTILOG_EXPERIMENT_HPP
#define OPTILOG_EXPERIMENT_HPP

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json_io.hpp"
#include "log.hpp"
#include "simnet.hpp"

namespace optilog {

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct LatencySource {
    std::optional<std::size_t> cities; // synthetic geo placement
    std::uint64_t seed = 1;
    double spread = 1.0;
    std::optional<std::string> csv_path;
    std::vector<std::vector<Micros>> matrix; // inline round-trip rows
};

enum class InitialPlacement : std::uint8_t { Search, FaultyInternal };

struct ScenarioSpec {
    std::uint32_t n = 4;
    std::uint32_t f = 1;
    double delta = 1.2;
    std::uint64_t window_w = 50;
    Topology topology = Topology::Tree;
    LatencySource latency;
    std::vector<AdversarySpec> adversaries;
    AnnealingParams annealing;
    double improvement_ratio = 0.9;
    std::uint64_t rounds = 100;
    std::uint64_t seed = 1;
    Micros gst_us = 0;
    double pre_gst_jitter = 0; // 0: same bound as delta
    InitialPlacement initial = InitialPlacement::Search;
    bool stop_when_working = false;
    std::uint64_t probe_every = 0; // 0: probe once at round 0

    SystemParams params() const { return SystemParams::make(n, f, delta, window_w); }
};

namespace detail {

inline std::string pointer_token(const std::string& key)
{
    std::string out;
    for (char c : key) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

// Maps every JSON pointer in a (syntactically valid) document to the line on
// which its value starts.
inline std::map<std::string, std::size_t> json_line_index(const std::string& text)
{
    struct Frame {
        std::string pointer;
        bool object;
        std::size_t index = 0;
        std::string key;
        bool want_key = true;
    };
    std::map<std::string, std::size_t> lines;
    std::vector<Frame> stack;
    std::size_t line = 1;
    auto value_pointer = [&]() -> std::string {
        if (stack.empty())
            return "";
        const Frame& f = stack.back();
        return f.pointer + "/" + (f.object ? pointer_token(f.key) : std::to_string(f.index));
    };
    auto read_string = [&](std::size_t& i) {
        std::string s;
        for (++i; i < text.size() && text[i] != '"'; ++i) {
            if (text[i] == '\\' && i + 1 < text.size()) {
                ++i;
                s += text[i] == 'n' ? '\n' : text[i];
            } else {
                s += text[i];
            }
        }
        return s;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c)) || c == ':')
            continue;
        if (c == ',') {
            if (!stack.empty()) {
                if (stack.back().object)
                    stack.back().want_key = true;
                else
                    ++stack.back().index;
            }
            continue;
        }
        if (c == '}' || c == ']') {
            if (!stack.empty())
                stack.pop_back();
            continue;
        }
        if (c == '"' && !stack.empty() && stack.back().object && stack.back().want_key) {
            stack.back().key = read_string(i);
            stack.back().want_key = false;
            continue;
        }
        const std::string ptr = value_pointer();
        lines.emplace(ptr, line);
        if (c == '{' || c == '[') {
            stack.push_back(Frame{ptr, c == '{', 0, {}, true});
        } else if (c == '"') {
            read_string(i);
        } else {
            while (i + 1 < text.size() && !std::strchr(",}]\n \t\r", text[i + 1]))
                ++i;
        }
    }
    return lines;
}

inline std::size_t line_at(const std::string& text, std::size_t byte)
{
    const std::size_t end = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
}

// Field reader that reports the line of the offending value.
class ScenarioReader {
public:
    ScenarioReader(const json& j, std::string pointer, const std::map<std::string, std::size_t>& lines)
        : j_(j), pointer_(std::move(pointer)), lines_(lines)
    {
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        throw ScenarioError(line_of(key), what);
    }

    std::size_t line_of(const std::string& key) const
    {
        if (auto it = lines_.find(pointer_ + "/" + pointer_token(key)); it != lines_.end())
            return it->second;
        if (auto it = lines_.find(pointer_); it != lines_.end())
            return it->second;
        return 1;
    }

    void require_object(const std::vector<std::string>& known) const
    {
        if (!j_.is_object())
            throw ScenarioError(line_of(""), "expected an object");
        for (const auto& [k, v] : j_.items())
            if (std::find(known.begin(), known.end(), k) == known.end())
                fail(k, "unknown field '" + k + "'");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const { return j_.at(key); }
    std::string path(const std::string& key) const { return pointer_ + "/" + pointer_token(key); }

    ScenarioReader child(const std::string& key) const { return {j_.at(key), path(key), lines_}; }
    ScenarioReader element(const std::string& key, std::size_t i) const
    {
        return {j_.at(key).at(i), path(key) + "/" + std::to_string(i), lines_};
    }

    std::uint64_t uint(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (fallback)
                return *fallback;
            fail(key, "missing required field '" + key + "'");
        }
        const json& v = j_.at(key);
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            fail(key, "'" + key + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    double number(const std::string& key, double fallback) const
    {
        if (!has(key))
            return fallback;
        const json& v = j_.at(key);
        if (!v.is_number())
            fail(key, "'" + key + "' must be a number");
        return v.get<double>();
    }

    bool boolean(const std::string& key, bool fallback) const
    {
        if (!has(key))
            return fallback;
        if (!j_.at(key).is_boolean())
            fail(key, "'" + key + "' must be true or false");
        return j_.at(key).get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (fallback)
                return *fallback;
            fail(key, "missing required field '" + key + "'");
        }
        if (!j_.at(key).is_string())
            fail(key, "'" + key + "' must be a string");
        return j_.at(key).get<std::string>();
    }

    std::size_t array_size(const std::string& key) const
    {
        if (!j_.at(key).is_array())
            fail(key, "'" + key + "' must be an array");
        return j_.at(key).size();
    }

private:
    const json& j_;
    std::string pointer_;
    const std::map<std::string, std::size_t>& lines_;
};

inline AdversarySpec read_adversary(const ScenarioReader& r, std::uint32_t n)
{
    AdversarySpec a;
    const std::string kind = r.string("kind");
    if (kind == "crash") {
        a.kind = AdversaryKind::Crash;
        r.require_object({"kind", "members", "at_round"});
        a.from_round = r.uint("at_round", 0);
    } else if (kind == "delay_attack") {
        a.kind = AdversaryKind::DelayAttack;
        r.require_object({"kind", "members", "factor", "targets", "from_round"});
        a.factor = r.number("factor", 2.0);
        if (a.factor < 1.0)
            r.fail("factor", "factor must be >= 1");
        if (r.has("targets")) {
            for (std::size_t i = 0; i < r.array_size("targets"); ++i) {
                const json& t = r.raw("targets")[i];
                auto mt = t.is_string() ? message_type_from(t.get<std::string>()) : std::nullopt;
                if (!mt)
                    r.fail("targets", "unknown message type in targets");
                a.targets.push_back(*mt);
            }
        }
        a.from_round = r.uint("from_round", 0);
    } else if (kind == "proposal_delay") {
        a.kind = AdversaryKind::ProposalDelay;
        r.require_object({"kind", "members", "extra_ms", "extra_us", "mode", "from_round"});
        a.extra = r.has("extra_us") ? static_cast<Micros>(r.uint("extra_us"))
                                    : static_cast<Micros>(std::llround(r.number("extra_ms", 0) * 1000));
        if (a.extra < 0)
            r.fail("extra_ms", "extra delay must be non-negative");
        const std::string mode = r.string("mode", "timestamp");
        if (mode == "timestamp")
            a.stage = DelayStage::Timestamp;
        else if (mode == "send")
            a.stage = DelayStage::Send;
        else
            r.fail("mode", "mode must be \"timestamp\" or \"send\"");
        a.from_round = r.uint("from_round", 0);
    } else if (kind == "targeted_suspicion") {
        a.kind = AdversaryKind::TargetedSuspicion;
        r.require_object({"kind", "members", "victim", "reciprocate", "from_round"});
        const std::string v = r.string("victim", "root");
        if (v == "root")
            a.victim = VictimSelector::Root;
        else if (v == "parent")
            a.victim = VictimSelector::Parent;
        else if (v == "random_internal")
            a.victim = VictimSelector::RandomInternal;
        else
            r.fail("victim", "victim must be root, parent or random_internal");
        a.reciprocate = r.boolean("reciprocate", true);
        a.from_round = r.uint("from_round", 0);
    } else if (kind == "false_suspicion_flood") {
        a.kind = AdversaryKind::FalseSuspicionFlood;
        r.require_object({"kind", "members", "reciprocate", "from_round"});
        a.reciprocate = r.boolean("reciprocate", true);
        a.from_round = r.uint("from_round", 0);
    } else {
        r.fail("kind", "unknown adversary kind '" + kind + "'");
    }
    if (!r.has("members"))
        r.fail("members", "missing required field 'members'");
    for (std::size_t i = 0; i < r.array_size("members"); ++i) {
        const json& m = r.raw("members")[i];
        if (!m.is_number_integer() || m.get<std::int64_t>() < 0 || m.get<std::int64_t>() >= n)
            r.fail("members", "member ids must be integers in [0, n)");
        a.members.push_back(rid(m.get<std::uint32_t>()));
    }
    return a;
}

} // namespace detail

// Parses a scenario; relative CSV paths resolve against `base_dir`. Every
// error carries the line of the offending value.
inline ScenarioSpec parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {})
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioError(detail::line_at(text, e.byte == 0 ? 0 : e.byte - 1), "malformed JSON");
    }
    const auto lines = detail::json_line_index(text);
    const detail::ScenarioReader r(j, "", lines);
    r.require_object({"n", "f", "delta", "window_w", "topology", "latency", "adversaries", "annealing",
                      "improvement_ratio", "rounds", "seed", "gst_us", "pre_gst_jitter", "initial",
                      "stop_when_working", "probe_every"});
    ScenarioSpec s;
    s.n = static_cast<std::uint32_t>(r.uint("n"));
    s.f = static_cast<std::uint32_t>(r.has("f") ? r.uint("f") : (s.n - 1) / 3);
    if (s.n < 4 || s.n > kMaxReplicas)
        r.fail("n", "n must be in [4, " + std::to_string(kMaxReplicas) + "]");
    if (s.n < 3 * s.f + 1)
        r.fail("f", "f too large: n must be >= 3f+1");
    s.delta = r.number("delta", 1.2);
    if (s.delta < 1.0)
        r.fail("delta", "delta must be >= 1");
    s.window_w = r.uint("window_w", 50);
    if (s.window_w < 1)
        r.fail("window_w", "window_w must be >= 1");
    const std::string topo = r.string("topology", "tree");
    if (topo == "tree")
        s.topology = Topology::Tree;
    else if (topo == "star")
        s.topology = Topology::Star;
    else
        r.fail("topology", "topology must be \"tree\" or \"star\"");

    if (!r.has("latency"))
        r.fail("latency", "missing required field 'latency'");
    const auto lat = r.child("latency");
    lat.require_object({"synthetic", "csv", "matrix"});
    if (lat.has("synthetic")) {
        const auto syn = lat.child("synthetic");
        syn.require_object({"cities", "seed", "spread"});
        s.latency.cities = syn.uint("cities", s.n);
        if (*s.latency.cities < 1)
            syn.fail("cities", "cities must be >= 1");
        s.latency.seed = syn.uint("seed", 1);
        s.latency.spread = syn.number("spread", 1.0);
        if (!(s.latency.spread > 0 && s.latency.spread <= 1))
            syn.fail("spread", "spread must be in (0, 1]");
    } else if (lat.has("csv")) {
        std::filesystem::path p = lat.string("csv");
        if (p.is_relative() && !base_dir.empty())
            p = base_dir / p;
        std::ifstream in(p);
        if (!in)
            lat.fail("csv", "cannot open latency CSV '" + p.string() + "'");
        try {
            s.latency.matrix = read_csv_rows(in);
        } catch (const std::exception& e) {
            lat.fail("csv", std::string("latency CSV: ") + e.what());
        }
        s.latency.csv_path = p.string();
    } else if (lat.has("matrix")) {
        const json& m = lat.raw("matrix");
        if (!m.is_array())
            lat.fail("matrix", "matrix must be an array of rows");
        for (const auto& row : m) {
            std::vector<Micros> out;
            if (!row.is_array())
                lat.fail("matrix", "matrix rows must be arrays");
            for (const auto& v : row) {
                if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
                    lat.fail("matrix", "matrix entries must be non-negative integers (microseconds)");
                out.push_back(v.get<Micros>());
            }
            s.latency.matrix.push_back(std::move(out));
        }
    } else {
        lat.fail("", "latency needs one of synthetic, csv or matrix");
    }
    if (!s.latency.cities) {
        if (s.latency.matrix.size() != s.n)
            lat.fail(lat.has("csv") ? "csv" : "matrix", "latency matrix must be n x n");
        for (std::size_t a = 0; a < s.n; ++a)
            for (std::size_t b = 0; b < s.n; ++b)
                if (s.latency.matrix[a].size() != s.n || is_infinite(s.latency.matrix[a][b]) ||
                    (a == b && s.latency.matrix[a][b] != 0))
                    lat.fail(lat.has("csv") ? "csv" : "matrix",
                             "latency matrix must be n x n, finite, with a zero diagonal");
    }

    std::set<ReplicaId> faulty;
    if (r.has("adversaries")) {
        for (std::size_t i = 0; i < r.array_size("adversaries"); ++i) {
            const auto adv = r.element("adversaries", i);
            s.adversaries.push_back(detail::read_adversary(adv, s.n));
            faulty.insert(s.adversaries.back().members.begin(), s.adversaries.back().members.end());
            if (faulty.size() > s.f)
                adv.fail("members", "adversaries name " + std::to_string(faulty.size()) +
                                        " distinct replicas but f = " + std::to_string(s.f));
        }
    }

    if (r.has("annealing")) {
        const auto a = r.child("annealing");
        a.require_object({"initial_temperature", "cooling_rate", "convergence_ratio", "max_iterations",
                          "time_budget_ms"});
        s.annealing.initial_temperature = a.number("initial_temperature", 0);
        s.annealing.cooling_rate = a.number("cooling_rate", 0.995);
        s.annealing.convergence_ratio = a.number("convergence_ratio", 1e-3);
        s.annealing.max_iterations = a.uint("max_iterations", 0);
        s.annealing.time_budget = std::chrono::milliseconds(a.uint("time_budget_ms", 0));
        try {
            s.annealing.validate();
        } catch (const std::exception& e) {
            a.fail("cooling_rate", e.what());
        }
    }
    s.improvement_ratio = r.number("improvement_ratio", 0.9);
    if (!(s.improvement_ratio > 0 && s.improvement_ratio <= 1))
        r.fail("improvement_ratio", "improvement_ratio must be in (0, 1]");
    s.rounds = r.uint("rounds", 100);
    if (s.rounds < 1)
        r.fail("rounds", "rounds must be >= 1");
    s.seed = r.uint("seed", 1);
    s.gst_us = static_cast<Micros>(r.uint("gst_us", 0));
    s.pre_gst_jitter = r.number("pre_gst_jitter", 0);
    if (s.pre_gst_jitter != 0 && s.pre_gst_jitter < 1)
        r.fail("pre_gst_jitter", "pre_gst_jitter must be >= 1 (or 0 for delta)");
    const std::string initial = r.string("initial", "search");
    if (initial == "search")
        s.initial = InitialPlacement::Search;
    else if (initial == "faulty_internal")
        s.initial = InitialPlacement::FaultyInternal;
    else
        r.fail("initial", "initial must be \"search\" or \"faulty_internal\"");
    s.stop_when_working = r.boolean("stop_when_working", false);
    s.probe_every = r.uint("probe_every", 0);
    return s;
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open scenario '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path());
}

inline json scenario_to_json(const ScenarioSpec& s)
{
    json lat;
    if (s.latency.cities)
        lat["synthetic"] = {{"cities", *s.latency.cities}, {"seed", s.latency.seed}, {"spread", s.latency.spread}};
    else
        lat["matrix"] = s.latency.matrix;
    json advs = json::array();
    for (const auto& a : s.adversaries) {
        json j = {{"members", jsonio::ids(a.members)}};
        switch (a.kind) {
        case AdversaryKind::Crash: j["kind"] = "crash"; j["at_round"] = a.from_round; break;
        case AdversaryKind::DelayAttack: {
            j["kind"] = "delay_attack";
            j["factor"] = a.factor;
            json t = json::array();
            for (MessageType m : a.targets)
                t.push_back(to_string(m));
            j["targets"] = t;
            j["from_round"] = a.from_round;
            break;
        }
        case AdversaryKind::ProposalDelay:
            j["kind"] = "proposal_delay";
            j["extra_us"] = a.extra;
            j["mode"] = a.stage == DelayStage::Send ? "send" : "timestamp";
            j["from_round"] = a.from_round;
            break;
        case AdversaryKind::TargetedSuspicion:
            j["kind"] = "targeted_suspicion";
            j["victim"] = a.victim == VictimSelector::Root     ? "root"
                          : a.victim == VictimSelector::Parent ? "parent"
                                                               : "random_internal";
            j["reciprocate"] = a.reciprocate;
            j["from_round"] = a.from_round;
            break;
        case AdversaryKind::FalseSuspicionFlood:
            j["kind"] = "false_suspicion_flood";
            j["reciprocate"] = a.reciprocate;
            j["from_round"] = a.from_round;
            break;
        }
        advs.push_back(j);
    }
    return {{"n", s.n},
            {"f", s.f},
            {"delta", s.delta},
            {"window_w", s.window_w},
            {"topology", s.topology == Topology::Tree ? "tree" : "star"},
            {"latency", lat},
            {"adversaries", advs},
            {"annealing",
             {{"initial_temperature", s.annealing.initial_temperature},
              {"cooling_rate", s.annealing.cooling_rate},
              {"convergence_ratio", s.annealing.convergence_ratio},
              {"max_iterations", s.annealing.max_iterations},
              {"time_budget_ms", s.annealing.time_budget.count()}}},
            {"improvement_ratio", s.improvement_ratio},
            {"rounds", s.rounds},
            {"seed", s.seed},
            {"gst_us", s.gst_us},
            {"pre_gst_jitter", s.pre_gst_jitter},
            {"initial", s.initial == InitialPlacement::Search ? "search" : "faulty_internal"},
            {"stop_when_working", s.stop_when_working},
            {"probe_every", s.probe_every}};
}

inline std::vector<std::vector<Micros>> world_latency(const ScenarioSpec& s)
{
    if (s.latency.cities)
        return place_replicas(synth_latency_matrix(*s.latency.cities, s.latency.seed, s.latency.spread), s.n);
    return s.latency.matrix;
}

struct RoundRecord {
    Round round = 0;
    std::uint64_t epoch = 0;
    ReplicaId leader{};
    Micros timestamp = 0;
    bool committed = false;
    Micros commit_latency = -1;
    bool failed = false;
    std::size_t raw_suspicions = 0;
    std::size_t retained_suspicions = 0;
    std::size_t correct_pair_suspicions = 0; // retained, accuser and accused both correct
    std::size_t fabricated = 0;
    std::size_t candidates = 0;
    std::size_t u = 0;
    bool internals_correct = false;
    Micros predicted_dr = 0;
    bool reconfigured = false;
};

struct ReconfigurationEvent {
    Round round = 0;
    std::string cause;
    Micros score = 0;
    Configuration config;
    bool initial = false;
};

struct ExperimentReport {
    std::uint64_t seed = 0;
    std::vector<RoundRecord> rounds;
    std::vector<ReconfigurationEvent> events;
    std::optional<Round> first_working_round;
    std::size_t reconfigurations = 0;              // excludes the initial installation
    std::size_t reconfigurations_before_working = 0;
    std::set<ReplicaId> faulty;                    // from proofs of misbehavior
    std::set<ReplicaId> crash;
    std::vector<ReplicaId> final_candidates;
    std::size_t final_u = 0;
    std::size_t retained_correct_pairs = 0;
    SharedLog log;

    std::string to_csv() const
    {
        std::ostringstream os;
        os << "round,epoch,leader,timestamp_us,committed,commit_latency_us,failed,raw_suspicions,"
              "retained_suspicions,correct_pair_suspicions,fabricated,candidates,u,internals_correct,"
              "predicted_dr_us,reconfigured\n";
        for (const auto& r : rounds)
            os << r.round << ',' << r.epoch << ',' << idx(r.leader) << ',' << r.timestamp << ',' << r.committed << ','
               << r.commit_latency << ',' << r.failed << ',' << r.raw_suspicions << ',' << r.retained_suspicions << ','
               << r.correct_pair_suspicions << ',' << r.fabricated << ',' << r.candidates << ',' << r.u << ','
               << r.internals_correct << ',' << (is_infinite(r.predicted_dr) ? std::string("inf") : std::to_string(r.predicted_dr))
               << ',' << r.reconfigured << '\n';
        return os.str();
    }

    json summary() const
    {
        std::size_t committed = 0;
        double latency_sum = 0;
        for (const auto& r : rounds)
            if (r.committed) {
                ++committed;
                latency_sum += static_cast<double>(r.commit_latency);
            }
        json events_j = json::array();
        for (const auto& e : events)
            events_j.push_back({{"round", e.round},
                                {"cause", e.cause},
                                {"initial", e.initial},
                                {"score_us", jsonio::micros(e.score)},
                                {"config", to_json(e.config)}});
        return {{"seed", seed},
                {"rounds_run", rounds.size()},
                {"committed_rounds", committed},
                {"mean_commit_latency_us", committed ? latency_sum / static_cast<double>(committed) : 0.0},
                {"reconfigurations", reconfigurations},
                {"first_working_round", first_working_round ? json(*first_working_round) : json(nullptr)},
                {"reconfigurations_before_working", reconfigurations_before_working},
                {"retained_correct_pair_suspicions", retained_correct_pairs},
                {"faulty", jsonio::ids(faulty)},
                {"crash", jsonio::ids(crash)},
                {"final_candidates", jsonio::ids(final_candidates)},
                {"final_u", final_u},
                {"log_entries", log.size()},
                {"reconfiguration_events", events_j}};
    }
};

namespace detail {

class Experiment {
public:
    explicit Experiment(const ScenarioSpec& s)
        : spec_(s), params_(s.params()),
          world_(WorldModel::from_rows(world_latency(s), Slack::from(s.delta), s.gst_us,
                                       s.pre_gst_jitter > 0 ? std::optional{Slack::from(s.pre_gst_jitter)} : std::nullopt)),
          adv_(s.adversaries), monitors_(params_, s.topology, initial_config(s), s.improvement_ratio)
    {
        report_.seed = s.seed;
        if (monitors_.config().current)
            report_.events.push_back({0, "initial", 0, *monitors_.config().current, true});
    }

    ExperimentReport run()
    {
        for (Round r = 0; r < spec_.rounds; ++r) {
            if (!step(r))
                break;
        }
        const auto& s = monitors_.suspicion();
        report_.faulty = monitors_.misbehavior().faulty();
        report_.crash = s.base().crash_set();
        const CandidateSet c = monitors_.candidates();
        report_.final_candidates = c.candidates;
        report_.final_u = c.u;
        report_.log = log_;
        return std::move(report_);
    }

private:
    static std::optional<Configuration> initial_config(const ScenarioSpec& s)
    {
        if (s.initial != InitialPlacement::FaultyInternal)
            return std::nullopt;
        std::set<ReplicaId> bad;
        for (const auto& a : s.adversaries)
            bad.insert(a.members.begin(), a.members.end());
        Arrangement a;
        a.topology = s.topology;
        a.order.assign(bad.begin(), bad.end());
        for (std::uint32_t i = 0; i < s.n; ++i)
            if (!bad.count(rid(i)))
                a.order.push_back(rid(i));
        a.branch = s.topology == Topology::Tree ? builder_branch_factor(s.n) : 0;
        return to_configuration(a);
    }

    void emit(LogPayload p, View view)
    {
        const LogEntry& e = log_.append(std::move(p), view);
        if (auto d = monitors_.dispatch(e); d && d->kind == Decision::Kind::Reconfigure)
            last_decision_ = d;
    }

    void probe(Round r)
    {
        for (std::uint32_t p = 0; p < params_.n; ++p) {
            const ReplicaId a = rid(p);
            if (adv_.crashed(a, r))
                continue;
            std::map<ReplicaId, std::optional<Micros>> rtts;
            for (std::uint32_t q = 0; q < params_.n; ++q) {
                const ReplicaId b = rid(q);
                if (a == b)
                    continue;
                if (adv_.crashed(b, r)) {
                    rtts[b] = std::nullopt;
                    continue;
                }
                Rng rng(mix_seed(mix_seed(spec_.seed, 0x70726f6265ULL + r), p * 1024ULL + q));
                const Micros t = 0;
                rtts[b] = world_.delay(a, b, t, rng) + world_.delay(b, a, t, rng);
            }
            emit(build_latency_vector(rtts, a, params_), r);
        }
    }

    Micros score_fn_value(const Arrangement& a, std::size_t u) const
    {
        const LatencyMatrix& lat = monitors_.latency();
        if (a.topology == Topology::Tree)
            return tree_score(a, lat, monitors_.vote_target(u));
        return pbft_score(StarConfig{a.order[0], params_.n}, lat, params_, std::min<std::size_t>(u, params_.f));
    }

    // The first f+1 correct, live replicas search with distinct seeds and log
    // their proposals; the config monitor decides.
    bool reconfigure(Round r, const std::string& cause)
    {
        const CandidateSet c = monitors_.candidates();
        const std::set<ReplicaId> cand(c.candidates.begin(), c.candidates.end());
        std::vector<ReplicaId> searchers;
        for (std::uint32_t i = 0; i < params_.n && searchers.size() < params_.f + 1; ++i)
            if (adv_.correct(rid(i)) && !adv_.crashed(rid(i), r))
                searchers.push_back(rid(i));
        last_decision_.reset();
        for (ReplicaId s : searchers) {
            AnnealingParams ap = spec_.annealing;
            ap.seed = mix_seed(mix_seed(spec_.seed, r), idx(s));
            SearchResult res;
            try {
                res = sa_search([&](const Arrangement& a) { return score_fn_value(a, c.u); }, spec_.topology,
                                params_.n, cand, ap);
            } catch (const InsufficientCandidates&) {
                return false;
            }
            const ScoringBasis basis = monitors_.basis();
            emit(ConfigProposal{s, res.config, res.score, basis.version}, r);
        }
        if (!last_decision_)
            return false;
        const bool initial = report_.events.empty();
        report_.events.push_back({r, initial ? "initial" : cause, last_decision_->chosen->claimed_score,
                                  last_decision_->chosen->config, initial});
        if (!initial)
            ++report_.reconfigurations;
        ++epoch_;
        previous_timestamp_.reset();
        previous_leader_suspected_ = false;
        return true;
    }

    // Faulty leaves accuse the current victim once per victim; reciprocation
    // follows in the same view.
    std::size_t fabricate(Round r, const Configuration& cfg)
    {
        std::size_t count = 0;
        const auto special = special_roles(cfg);
        const std::set<ReplicaId> special_set(special.begin(), special.end());
        for (ReplicaId x : adv_.members()) {
            if (adv_.crashed(x, r) || special_set.count(x))
                continue;
            std::optional<ReplicaId> victim;
            if (const AdversarySpec* t = adv_.targeted(x, r)) {
                if (t->victim == VictimSelector::Root) {
                    victim = special.front();
                } else if (t->victim == VictimSelector::Parent) {
                    victim = special.front();
                    if (const auto* tree = std::get_if<TreeConfig>(&cfg))
                        for (std::size_t j = 0; j < tree->intermediates.size(); ++j)
                            if (std::find(tree->children[j].begin(), tree->children[j].end(), x) !=
                                tree->children[j].end())
                                victim = tree->intermediates[j];
                } else {
                    Rng rng(mix_seed(mix_seed(spec_.seed, 0x766963ULL + r), idx(x)));
                    victim = special[special.size() > 1 ? 1 + rng.below(special.size() - 1) : 0];
                }
            } else if (adv_.floods(x, r)) {
                Rng rng(mix_seed(mix_seed(spec_.seed, 0x666c6fULL + r), idx(x)));
                victim = rid(static_cast<std::uint32_t>(rng.below(params_.n)));
                if (*victim == x)
                    victim.reset();
            }
            if (!victim || !accused_.insert({x, *victim}).second)
                continue;
            const Suspicion s{SuspicionKind::Slow, x, *victim, r, MessageType::ProposalTimestamp};
            emit(s, r);
            reciprocate_to(s, r);
            ++count;
        }
        return count;
    }

    void reciprocate_to(const Suspicion& s, Round r)
    {
        if (!adv_.reciprocates(s.accused, r))
            return;
        if (auto back = reciprocate(s, s.accused))
            emit(*back, r);
    }

    bool step(Round r)
    {
        monitors_.advance_to(r);
        if (r == 0 || (spec_.probe_every && r % spec_.probe_every == 0))
            probe(r);

        RoundRecord rec;
        rec.round = r;
        bool reconfigured = false;
        if (!monitors_.config().current)
            reconfigured |= reconfigure(r, "no_configuration");
        if (monitors_.config().current) {
            rec.fabricated = fabricate(r, *monitors_.config().current);
            if (!monitors_.current_valid())
                reconfigured |= reconfigure(r, "invalid_configuration");
            else if (last_failed_)
                reconfigured |= reconfigure(r, "round_failed");
        }
        rec.reconfigured = reconfigured;
        last_failed_ = false;
        if (!monitors_.config().current) {
            rec.failed = true;
            last_failed_ = true;
            report_.rounds.push_back(rec);
            return true;
        }

        const Configuration cfg = *monitors_.config().current;
        const CandidateSet c = monitors_.candidates();
        rec.candidates = c.candidates.size();
        rec.u = c.u;
        rec.epoch = epoch_;
        const auto special = special_roles(cfg);
        rec.leader = special.front();
        rec.internals_correct = std::all_of(special.begin(), special.end(), [&](ReplicaId x) { return adv_.correct(x); });

        const TimeoutTable timeouts =
            std::holds_alternative<TreeConfig>(cfg)
                ? tree_timeouts(std::get<TreeConfig>(cfg), monitors_.latency(), monitors_.vote_target(c.u))
                : pbft_timeouts(std::get<StarConfig>(cfg), monitors_.latency(), params_,
                                std::min<std::size_t>(c.u, params_.f));
        rec.predicted_dr = timeouts.round_duration;

        RoundContext ctx;
        ctx.round = r;
        ctx.timestamp = clock_ + adv_.proposal_extra(rec.leader, r, DelayStage::Timestamp);
        ctx.previous_timestamp = previous_timestamp_;
        ctx.previous_leader_suspected = previous_leader_suspected_;
        ctx.seed = spec_.seed;
        rec.timestamp = ctx.timestamp;

        const RoundTrace trace = run_round(world_, cfg, timeouts, adv_, params_, ctx);
        rec.committed = trace.committed && !trace.failed;
        rec.commit_latency = trace.committed ? trace.commit_time - ctx.timestamp : -1;
        rec.failed = trace.failed;
        rec.raw_suspicions = trace.suspicions_raised.size();
        rec.retained_suspicions = trace.retained.size();
        for (const auto& s : trace.retained)
            if (adv_.correct(s.accuser) && adv_.correct(s.accused))
                ++rec.correct_pair_suspicions;
        report_.retained_correct_pairs += rec.correct_pair_suspicions;

        if (rec.committed && rec.internals_correct && !report_.first_working_round) {
            report_.first_working_round = r;
            report_.reconfigurations_before_working = report_.reconfigurations;
        }

        for (const auto& s : trace.retained) {
            emit(s, r);
            reciprocate_to(s, r);
        }
        for (const auto& cpl : trace.complaints)
            emit(cpl, r);

        last_failed_ = trace.failed;
        previous_leader_suspected_ = trace.leader_suspected_someone;
        previous_timestamp_ = trace.committed ? std::optional{ctx.timestamp} : std::nullopt;
        if (trace.committed)
            clock_ = trace.commit_time;
        else if (!is_infinite(trace.deadline))
            clock_ = trace.deadline;
        else
            clock_ = ctx.timestamp + millis(1000);
        report_.rounds.push_back(rec);
        return !(spec_.stop_when_working && report_.first_working_round);
    }

    const ScenarioSpec& spec_;
    SystemParams params_;
    WorldModel world_;
    AdversaryModel adv_;
    MonitorSet monitors_;
    SharedLog log_;
    ExperimentReport report_;
    std::optional<Decision> last_decision_;
    std::set<std::pair<ReplicaId, ReplicaId>> accused_;
    std::uint64_t epoch_ = 0;
    Micros clock_ = 0;
    std::optional<Micros> previous_timestamp_;
    bool previous_leader_suspected_ = false;
    bool last_failed_ = false;
};

} // namespace detail

inline ExperimentReport run_experiment(const ScenarioSpec& scenario)
{
    return detail::Experiment(scenario).run();
}

} // namespace optilog

#endif
