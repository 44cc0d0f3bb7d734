#ifndef OPTILOG_LOG_HPP
#define OPTILOG_LOG_HPP

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "config_search.hpp"
#include "json_io.hpp"
#include "latency.hpp"
#include "misbehavior.hpp"
#include "pbft_score.hpp"
#include "suspicion.hpp"
#include "tree_candidates.hpp"
#include "tree_score.hpp"

namespace optilog {

// A payload that failed to decode; kept so the log stays gapless and the
// garbage is visible, but never applied.
struct MalformedPayload {
    std::string kind;
    ReplicaId author{};
    std::string body;

    bool operator==(const MalformedPayload&) const = default;
};

using LogPayload = std::variant<LatencyVector, Suspicion, Complaint, ConfigProposal, MalformedPayload>;

inline ReplicaId author_of(const LogPayload& p)
{
    struct {
        ReplicaId operator()(const LatencyVector& v) const { return v.author; }
        ReplicaId operator()(const Suspicion& s) const { return s.accuser; }
        ReplicaId operator()(const Complaint& c) const { return c.accuser; }
        ReplicaId operator()(const ConfigProposal& p) const { return p.author; }
        ReplicaId operator()(const MalformedPayload& m) const { return m.author; }
    } visitor;
    return std::visit(visitor, p);
}

inline const char* kind_of(const LogPayload& p)
{
    switch (p.index()) {
    case 0: return "latency";
    case 1: return "suspicion";
    case 2: return "complaint";
    case 3: return "proposal";
    }
    return std::get<MalformedPayload>(p).kind.c_str();
}

struct LogEntry {
    std::uint64_t sequence = 0;
    View view = 0;
    LogPayload payload;

    ReplicaId author() const { return author_of(payload); }
};

class SharedLog {
public:
    const LogEntry& append(LogPayload payload, View view)
    {
        entries_.push_back({entries_.size(), view, std::move(payload)});
        return entries_.back();
    }

    const std::vector<LogEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<LogEntry> entries_;
};

inline LogEntry append(SharedLog& log, LogPayload payload, View view) { return log.append(std::move(payload), view); }

// The monitors every replica runs over the shared log. Fed the same entries,
// two instances end in byte-identical states.
class MonitorSet {
public:
    MonitorSet(const SystemParams& params, Topology topology, std::optional<Configuration> initial = std::nullopt,
               double improvement_ratio = 0.9)
        : params_(params), topology_(topology), improvement_ratio_(improvement_ratio), latency_(params.n),
          suspicion_(params)
    {
        config_.current = std::move(initial);
    }

    const SystemParams& params() const { return params_; }
    Topology topology() const { return topology_; }
    const LatencyMatrix& latency() const { return latency_; }
    const TreeSuspicionState& suspicion() const { return suspicion_; }
    const MisbehaviorMonitor& misbehavior() const { return misbehavior_; }
    const ConfigMonitorState& config() const { return config_; }
    std::uint64_t skipped() const { return skipped_; }
    std::optional<View> view() const { return view_; }

    CandidateSet candidates() const
    {
        if (topology_ == Topology::Tree)
            return tree_candidates(suspicion_, misbehavior_.faulty());
        return base_candidates(suspicion_.base());
    }

    // Vote target k = q + u, capped at n.
    std::size_t vote_target(std::size_t u) const { return std::min<std::size_t>(params_.q + u, params_.n); }

    Micros score(const Configuration& c, std::size_t u) const
    {
        if (const auto* t = std::get_if<TreeConfig>(&c))
            return tree_score(*t, latency_, vote_target(u));
        return pbft_score(std::get<StarConfig>(c), latency_, params_, std::min<std::size_t>(u, params_.f));
    }

    ScoringBasis basis() const
    {
        const CandidateSet c = candidates();
        ScoringBasis b;
        b.version = {latency_.generation(), suspicion_.base().version()};
        b.candidates = std::set<ReplicaId>(c.candidates.begin(), c.candidates.end());
        b.n = params_.n;
        b.topology = topology_;
        b.score = [this, u = c.u](const Configuration& cfg) { return score(cfg, u); };
        return b;
    }

    bool current_valid() const
    {
        if (!config_.current)
            return false;
        const CandidateSet c = candidates();
        return roles_within(*config_.current, std::set<ReplicaId>(c.candidates.begin(), c.candidates.end()));
    }

    // Processes view ticks up to and including `view`.
    void advance_to(View view)
    {
        View next = view_ ? *view_ + 1 : 0;
        for (; next <= view; ++next) {
            suspicion_.tick(next);
            suspicion_.purge_old(next);
        }
        if (!view_ || view > *view_)
            view_ = view;
    }

    std::optional<Decision> dispatch(const LogEntry& e)
    {
        if (view_ && e.view < *view_) {
            ++skipped_;
            return std::nullopt;
        }
        advance_to(e.view);
        const std::uint32_t n = params_.n;
        auto valid_id = [n](ReplicaId r) { return idx(r) < n; };

        if (const auto* v = std::get_if<LatencyVector>(&e.payload)) {
            if (!well_formed(*v, n))
                return skip();
            latency_.apply(*v);
        } else if (const auto* s = std::get_if<Suspicion>(&e.payload)) {
            if (!valid_id(s->accuser) || !valid_id(s->accused) || s->accuser == s->accused)
                return skip();
            if (suspicion_.apply(*s, e.view))
                suspicion_.repair_independence();
        } else if (const auto* c = std::get_if<Complaint>(&e.payload)) {
            if (!valid_id(c->accuser) || !valid_id(c->accused) || c->accuser == c->accused)
                return skip();
            if (auto blamed = misbehavior_.apply(*c)) {
                suspicion_.mark_faulty(*blamed);
                suspicion_.repair_independence();
            }
        } else if (const auto* p = std::get_if<ConfigProposal>(&e.payload)) {
            if (!valid_id(p->author))
                return skip();
            const bool valid = current_valid();
            return config_monitor_step(config_, *p, valid, params_, basis(), improvement_ratio_);
        } else {
            return skip();
        }
        return std::nullopt;
    }

    std::vector<std::uint8_t> serialize() const
    {
        ByteWriter w;
        w.u32(params_.n);
        w.u32(params_.f);
        w.u8(static_cast<std::uint8_t>(topology_));
        w.u8(view_.has_value());
        w.u64(view_.value_or(0));
        latency_.serialize(w);
        suspicion_.serialize(w);
        misbehavior_.serialize(w);
        config_.serialize(w);
        w.u64(skipped_);
        return w.take();
    }

private:
    std::optional<Decision> skip()
    {
        ++skipped_;
        return std::nullopt;
    }

    SystemParams params_;
    Topology topology_;
    double improvement_ratio_;
    LatencyMatrix latency_;
    TreeSuspicionState suspicion_;
    MisbehaviorMonitor misbehavior_;
    ConfigMonitorState config_;
    std::optional<View> view_;
    std::uint64_t skipped_ = 0;
};

inline MonitorSet replay(const SharedLog& log, MonitorSet monitors, std::optional<View> until = std::nullopt)
{
    for (const auto& e : log.entries())
        monitors.dispatch(e);
    if (until)
        monitors.advance_to(*until);
    return monitors;
}

inline json payload_body(const LogPayload& p)
{
    struct {
        json operator()(const LatencyVector& v) const { return to_json(v); }
        json operator()(const Suspicion& s) const { return to_json(s); }
        json operator()(const Complaint& c) const { return to_json(c); }
        json operator()(const ConfigProposal& c) const { return to_json(c); }
        json operator()(const MalformedPayload& m) const
        {
            return json::parse(m.body, nullptr, false).is_discarded() ? json(m.body) : json::parse(m.body);
        }
    } visitor;
    return std::visit(visitor, p);
}

inline void dump_jsonl(std::ostream& os, const SharedLog& log)
{
    for (const auto& e : log.entries()) {
        const json line = {{"seq", e.sequence},
                           {"view", e.view},
                           {"kind", kind_of(e.payload)},
                           {"author", idx(e.author())},
                           {"body", payload_body(e.payload)}};
        os << line.dump() << '\n';
    }
}

inline LogPayload decode_payload(const std::string& kind, ReplicaId author, const json& body)
{
    try {
        LogPayload p;
        if (kind == "latency")
            p = latency_vector_from_json(body);
        else if (kind == "suspicion")
            p = suspicion_from_json(body);
        else if (kind == "complaint")
            p = complaint_from_json(body);
        else if (kind == "proposal")
            p = proposal_from_json(body);
        else
            return MalformedPayload{kind, author, body.dump()};
        if (author_of(p) != author)
            return MalformedPayload{kind, author, body.dump()};
        return p;
    } catch (const std::exception&) {
        return MalformedPayload{kind, author, body.dump()};
    }
}

// Framing errors (unparsable line, missing seq/view, sequence gap) throw with
// the line number; bad bodies become MalformedPayload entries.
inline SharedLog load_jsonl(std::istream& is)
{
    SharedLog log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty())
            continue;
        auto fail = [&](const std::string& what) {
            throw JsonFormatError("log line " + std::to_string(line_no) + ": " + what);
        };
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            fail("not a JSON object");
        std::uint64_t seq = 0;
        View view = 0;
        std::string kind;
        ReplicaId author{};
        try {
            seq = jsonio::uint_field(j, "seq");
            view = jsonio::uint_field(j, "view");
            kind = jsonio::field(j, "kind").get<std::string>();
            author = jsonio::replica_field(j, "author");
            (void)jsonio::field(j, "body");
        } catch (const std::exception& ex) {
            fail(ex.what());
        }
        if (seq != log.size())
            fail("sequence gap: expected " + std::to_string(log.size()) + ", got " + std::to_string(seq));
        log.append(decode_payload(kind, author, j.at("body")), view);
    }
    return log;
}

} // namespace optilog

#endif
