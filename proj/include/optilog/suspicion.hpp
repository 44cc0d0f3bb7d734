#ifndef OPTILOG_SUSPICION_HPP
#define OPTILOG_SUSPICION_HPP

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bytes.hpp"
#include "core.hpp"
#include "graph.hpp"

namespace optilog {

enum class SuspicionKind : std::uint8_t { Slow, False };

// ProposalTimestamp tags condition (a) suspicions; the others name the
// protocol message whose late or missing arrival raised condition (b).
enum class MessageType : std::uint8_t { ProposalTimestamp, Propose, Write, Accept, FwdPropose, Vote, AggVote };

inline constexpr std::size_t kMessageTypeCount = 7;

inline const char* to_string(SuspicionKind k) { return k == SuspicionKind::Slow ? "slow" : "false"; }

inline const char* to_string(MessageType t)
{
    switch (t) {
    case MessageType::ProposalTimestamp: return "proposal_timestamp";
    case MessageType::Propose: return "propose";
    case MessageType::Write: return "write";
    case MessageType::Accept: return "accept";
    case MessageType::FwdPropose: return "fwd_propose";
    case MessageType::Vote: return "vote";
    case MessageType::AggVote: return "agg_vote";
    }
    return "?";
}

inline std::optional<MessageType> message_type_from(const std::string& s)
{
    for (std::size_t i = 0; i < kMessageTypeCount; ++i)
        if (s == to_string(static_cast<MessageType>(i)))
            return static_cast<MessageType>(i);
    return std::nullopt;
}

struct Suspicion {
    SuspicionKind kind = SuspicionKind::Slow;
    ReplicaId accuser{};
    ReplicaId accused{};
    Round round = 0;
    MessageType message_type = MessageType::ProposalTimestamp;

    bool operator==(const Suspicion&) const = default;
};

struct TimeoutKey {
    MessageType type;
    ReplicaId recipient;
    ReplicaId sender;

    auto operator<=>(const TimeoutKey&) const = default;
};

// How a d_m value was obtained: an earlier message's d plus one link.
struct Derivation {
    std::optional<TimeoutKey> previous;
    ReplicaId from{};
    ReplicaId to{};
};

struct TimeoutTable {
    std::map<TimeoutKey, Micros> d_m;
    Micros round_duration = 0;
    std::map<TimeoutKey, Derivation> derivation;

    std::optional<Micros> find(MessageType t, ReplicaId recipient, ReplicaId sender) const
    {
        auto it = d_m.find({t, recipient, sender});
        if (it == d_m.end())
            return std::nullopt;
        return it->second;
    }

    Micros get(MessageType t, ReplicaId recipient, ReplicaId sender) const
    {
        auto v = find(t, recipient, sender);
        if (!v)
            throw std::out_of_range("no timeout for message");
        return *v;
    }
};

// A message the observer expected this round. Offsets are relative to the
// proposal timestamp. When `base_offset` is set, the clock for this message
// starts there instead, and its timeout is d_m - base_d (used for votes timed
// from the forwarded proposal).
struct ExpectedMessage {
    MessageType type;
    ReplicaId sender;
    std::optional<Micros> arrival;
    Micros base_offset = 0;
    Micros base_d = 0;
};

struct RoundObservations {
    Round round = 0;
    Micros proposal_timestamp = 0;
    std::optional<Micros> previous_timestamp;
    std::vector<ExpectedMessage> expected;
};

inline std::vector<Suspicion> check_round(const RoundObservations& obs, const TimeoutTable& timeouts, Slack slack,
                                          ReplicaId observer, ReplicaId leader)
{
    std::vector<Suspicion> out;
    if (observer != leader && obs.previous_timestamp) {
        const Micros gap = obs.proposal_timestamp - *obs.previous_timestamp;
        if (gap > slack.apply(timeouts.round_duration))
            out.push_back({SuspicionKind::Slow, observer, leader, obs.round, MessageType::ProposalTimestamp});
    }
    for (const auto& m : obs.expected) {
        if (m.sender == observer)
            continue;
        const Micros d = timeouts.get(m.type, observer, m.sender);
        if (is_infinite(d))
            continue; // nothing can be expected over an unreachable link
        const Micros allowed = slack.apply(d - m.base_d);
        if (!m.arrival || *m.arrival - m.base_offset > allowed)
            out.push_back({SuspicionKind::Slow, observer, m.sender, obs.round, m.type});
    }
    return out;
}

// Condition (c). Correct replicas always consider themselves timely; the
// simulator passes `timely = false` for replicas it models as actually slow.
inline std::optional<Suspicion> reciprocate(const Suspicion& incoming, ReplicaId self_id, bool timely = true)
{
    if (incoming.kind != SuspicionKind::Slow || incoming.accused != self_id || !timely)
        return std::nullopt;
    return Suspicion{SuspicionKind::False, self_id, incoming.accuser, incoming.round, incoming.message_type};
}

// Rank of each message type in a protocol's causal order; lower is earlier.
using CausalOrder = std::array<int, kMessageTypeCount>;

inline CausalOrder star_causal_order() { return {0, 1, 2, 3, 99, 99, 99}; }
inline CausalOrder tree_causal_order() { return {0, 1, 99, 99, 2, 3, 4}; }

inline std::vector<Suspicion> filter_suspicions(const std::vector<Suspicion>& raw, bool previous_round_leader_suspected,
                                                const CausalOrder& order)
{
    std::vector<Suspicion> kept;
    for (const auto& s : raw)
        if (!(previous_round_leader_suspected && s.message_type == MessageType::ProposalTimestamp))
            kept.push_back(s);
    if (kept.empty())
        return kept;
    int first = order[static_cast<std::size_t>(kept.front().message_type)];
    for (const auto& s : kept)
        first = std::min(first, order[static_cast<std::size_t>(s.message_type)]);
    std::erase_if(kept, [&](const Suspicion& s) { return order[static_cast<std::size_t>(s.message_type)] != first; });
    return kept;
}

struct PurgeRecord {
    enum class Kind : std::uint8_t { Edge, Crash };
    Kind kind;
    ReplicaId a; // Edge: lower endpoint; Crash: the crashed replica
    ReplicaId b;
    std::uint64_t order; // log position of the originating suspicion

    bool operator==(const PurgeRecord&) const = default;
};

// Suspicion graph G over V = replicas \ Faulty \ Crash, plus the Crash set,
// reciprocation deadlines and purge bookkeeping.
class SuspicionState {
public:
    SuspicionState() = default;
    explicit SuspicionState(const SystemParams& params)
        : n_(params.n), f_(params.f), window_(params.window_w), g_(UndirectedGraph::complete_vertex_set(params.n))
    {
    }

    std::size_t n() const { return n_; }
    std::size_t f() const { return f_; }
    const UndirectedGraph& graph() const { return g_; }
    const std::set<ReplicaId>& crash_set() const { return crash_; }
    const std::set<ReplicaId>& faulty() const { return faulty_; }
    const std::vector<PurgeRecord>& records() const { return records_; }
    std::optional<View> last_suspicion_view() const { return last_suspicion_view_; }
    std::uint64_t version() const { return version_; }
    std::uint64_t removals() const { return removals_; }
    bool in_v(ReplicaId r) const { return g_.has_vertex(r); }

    std::vector<ReplicaId> vertices() const
    {
        std::vector<ReplicaId> v;
        for (std::uint32_t i = 0; i < n_; ++i)
            if (g_.has_vertex(rid(i)))
                v.push_back(rid(i));
        return v;
    }

    // Edges in insertion order.
    std::vector<std::pair<ReplicaId, ReplicaId>> edges() const
    {
        std::vector<std::pair<ReplicaId, ReplicaId>> e;
        for (const auto& r : records_)
            if (r.kind == PurgeRecord::Kind::Edge)
                e.emplace_back(r.a, r.b);
        return e;
    }

    std::optional<View> pending_deadline(ReplicaId accuser, ReplicaId accused) const
    {
        auto it = pending_.find({accuser, accused});
        if (it == pending_.end())
            return std::nullopt;
        return it->second.deadline;
    }

    // Returns true when the suspicion changed the state.
    bool apply(const Suspicion& s, View view)
    {
        if (s.accuser == s.accused || !in_v(s.accuser) || !in_v(s.accused))
            return false;
        last_suspicion_view_ = view;
        const std::uint64_t order = next_order_++;
        const auto [a, b] = normalized(s.accuser, s.accused);
        if (!g_.has_edge(a, b)) {
            g_.add_edge(a, b);
            records_.push_back({PurgeRecord::Kind::Edge, a, b, order});
        }
        if (s.kind == SuspicionKind::Slow)
            pending_.try_emplace({s.accuser, s.accused}, Pending{view + f_ + 1, edge_order(a, b)});
        else
            pending_.erase({s.accused, s.accuser});
        ++version_;
        return true;
    }

    // Moves replicas whose reciprocation window closed into Crash.
    bool tick(View view)
    {
        bool changed = false;
        for (;;) {
            auto expired = std::find_if(pending_.begin(), pending_.end(),
                                        [&](const auto& p) { return p.second.deadline <= view; });
            if (expired == pending_.end())
                break;
            const ReplicaId accused = expired->first.second;
            const std::uint64_t order = expired->second.order;
            pending_.erase(expired);
            if (!in_v(accused))
                continue;
            drop_vertex(accused);
            crash_.insert(accused);
            insert_record({PurgeRecord::Kind::Crash, accused, accused, order});
            changed = true;
        }
        if (changed) {
            ++version_;
            ++removals_;
        }
        return changed;
    }

    // Stability purge (one record per call once W views passed without a
    // suspicion) followed by independence repair.
    bool purge_old(View view)
    {
        bool changed = false;
        if (last_suspicion_view_ && view >= *last_suspicion_view_ + window_ && !records_.empty()) {
            remove_record(0);
            changed = true;
        }
        return repair_independence() || changed;
    }

    // Removes the oldest records until G holds an independent set of n-f.
    bool repair_independence()
    {
        bool changed = false;
        while (!records_.empty() && !has_independent_set(g_, n_ - f_)) {
            remove_record(0);
            changed = true;
        }
        return changed;
    }

    void mark_faulty(ReplicaId r)
    {
        if (idx(r) >= n_ || faulty_.count(r))
            return;
        faulty_.insert(r);
        if (in_v(r))
            drop_vertex(r);
        if (crash_.erase(r))
            std::erase_if(records_, [&](const PurgeRecord& x) { return x.kind == PurgeRecord::Kind::Crash && x.a == r; });
        ++version_;
        ++removals_;
    }

    void serialize(ByteWriter& w) const
    {
        w.u64(n_);
        w.u64(f_);
        w.u64(window_);
        std::vector<ReplicaId> v = vertices();
        w.ids(v);
        w.ids(crash_);
        w.ids(faulty_);
        w.u64(records_.size());
        for (const auto& r : records_) {
            w.u8(static_cast<std::uint8_t>(r.kind));
            w.id(r.a);
            w.id(r.b);
            w.u64(r.order);
        }
        w.u64(pending_.size());
        for (const auto& [key, p] : pending_) {
            w.id(key.first);
            w.id(key.second);
            w.u64(p.deadline);
            w.u64(p.order);
        }
        w.u8(last_suspicion_view_.has_value());
        w.u64(last_suspicion_view_.value_or(0));
        w.u64(next_order_);
    }

private:
    struct Pending {
        View deadline;
        std::uint64_t order;
    };

    static std::pair<ReplicaId, ReplicaId> normalized(ReplicaId x, ReplicaId y)
    {
        return idx(x) < idx(y) ? std::pair{x, y} : std::pair{y, x};
    }

    std::uint64_t edge_order(ReplicaId a, ReplicaId b) const
    {
        for (const auto& r : records_)
            if (r.kind == PurgeRecord::Kind::Edge && r.a == a && r.b == b)
                return r.order;
        return next_order_;
    }

    void insert_record(const PurgeRecord& rec)
    {
        auto pos = std::upper_bound(records_.begin(), records_.end(), rec.order,
                                    [](std::uint64_t o, const PurgeRecord& r) { return o < r.order; });
        records_.insert(pos, rec);
    }

    void drop_vertex(ReplicaId r)
    {
        g_.remove_vertex(r);
        std::erase_if(records_, [&](const PurgeRecord& x) {
            return x.kind == PurgeRecord::Kind::Edge && (x.a == r || x.b == r);
        });
        std::erase_if(pending_, [&](const auto& p) { return p.first.first == r || p.first.second == r; });
    }

    void remove_record(std::size_t i)
    {
        const PurgeRecord rec = records_[i];
        records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(i));
        if (rec.kind == PurgeRecord::Kind::Edge) {
            g_.remove_edge(rec.a, rec.b);
            pending_.erase({rec.a, rec.b});
            pending_.erase({rec.b, rec.a});
        } else {
            crash_.erase(rec.a);
            g_.add_vertex(rec.a);
        }
        ++version_;
        ++removals_;
    }

    std::size_t n_ = 0;
    std::size_t f_ = 0;
    std::uint64_t window_ = 50;
    UndirectedGraph g_;
    std::set<ReplicaId> crash_;
    std::set<ReplicaId> faulty_;
    std::vector<PurgeRecord> records_;
    std::map<std::pair<ReplicaId, ReplicaId>, Pending> pending_;
    std::optional<View> last_suspicion_view_;
    std::uint64_t next_order_ = 0;
    std::uint64_t version_ = 0;
    std::uint64_t removals_ = 0;
};

inline SuspicionState monitor_apply(SuspicionState state, const Suspicion& s, View current_view)
{
    state.apply(s, current_view);
    return state;
}

inline SuspicionState tick_view(SuspicionState state, View current_view)
{
    state.tick(current_view);
    return state;
}

inline SuspicionState purge_old(SuspicionState state, View current_view)
{
    state.purge_old(current_view);
    return state;
}

struct CandidateSet {
    std::vector<ReplicaId> candidates; // ascending
    std::size_t u = 0;

    bool contains(ReplicaId r) const { return std::binary_search(candidates.begin(), candidates.end(), r); }
};

inline CandidateSet base_candidates(const SuspicionState& state)
{
    CandidateSet c;
    c.candidates = max_independent_set(state.graph());
    c.u = state.graph().vertex_count() - c.candidates.size();
    return c;
}

} // namespace optilog

#endif
