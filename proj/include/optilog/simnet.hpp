#ifndef OPTILOG_SIMNET_HPP
#define OPTILOG_SIMNET_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <set>
#include <tuple>
#include <vector>

#include "config.hpp"
#include "latency.hpp"
#include "misbehavior.hpp"
#include "suspicion.hpp"

namespace optilog {

// Round-trip latencies between cities placed uniformly on a sphere: 1 ms plus
// a great-circle term reaching 250 ms at the antipode. Values are even so a
// message's one-way share is exact. `spread` < 1 confines the cities to a
// spherical cap of angular radius spread*pi (a continent instead of the globe).
inline std::vector<std::vector<Micros>> synth_latency_matrix(std::size_t city_count, std::uint64_t seed,
                                                             double spread = 1.0)
{
    if (city_count < 1)
        throw std::invalid_argument("city_count must be >= 1");
    if (!(spread > 0 && spread <= 1))
        throw std::invalid_argument("spread must be in (0, 1]");
    const double z_min = std::cos(spread * std::numbers::pi);
    Rng rng(seed);
    std::vector<std::array<double, 3>> pts;
    for (std::size_t i = 0; i < city_count; ++i) {
        const double z = 1 - rng.unit() * (1 - z_min);
        const double phi = 2 * std::numbers::pi * rng.unit();
        const double r = std::sqrt(std::max(0.0, 1 - z * z));
        pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
    }
    std::vector<std::vector<Micros>> m(city_count, std::vector<Micros>(city_count, 0));
    for (std::size_t a = 0; a < city_count; ++a)
        for (std::size_t b = a + 1; b < city_count; ++b) {
            const double dot = pts[a][0] * pts[b][0] + pts[a][1] * pts[b][1] + pts[a][2] * pts[b][2];
            const double angle = std::acos(std::clamp(dot, -1.0, 1.0));
            const Micros one_way = 500 + std::llround(angle / std::numbers::pi * 124'500.0);
            m[a][b] = m[b][a] = 2 * one_way;
        }
    return m;
}

// Replica i sits in city i mod C; co-located replicas are 1 ms apart.
inline std::vector<std::vector<Micros>> place_replicas(const std::vector<std::vector<Micros>>& cities, std::size_t n)
{
    const std::size_t c = cities.size();
    std::vector<std::vector<Micros>> m(n, std::vector<Micros>(n, 0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b)
                m[a][b] = a % c == b % c ? millis(1) : cities[a % c][b % c];
    return m;
}

struct WorldModel {
    std::size_t n = 0;
    std::vector<Micros> actual; // round-trip, row-major
    Slack slack;                // post-GST jitter bound
    Micros gst_time = 0;
    Slack pre_gst;              // jitter bound before GST

    static WorldModel from_rows(const std::vector<std::vector<Micros>>& rows, Slack slack, Micros gst = 0,
                                std::optional<Slack> pre_gst = std::nullopt)
    {
        WorldModel w;
        w.n = rows.size();
        w.slack = slack;
        w.gst_time = gst;
        w.pre_gst = pre_gst.value_or(slack);
        for (const auto& row : rows) {
            if (row.size() != w.n)
                throw std::invalid_argument("world latency must be square");
            for (Micros v : row)
                if (v < 0 || is_infinite(v))
                    throw std::invalid_argument("world latency must be finite and non-negative");
            w.actual.insert(w.actual.end(), row.begin(), row.end());
        }
        return w;
    }

    Micros rtt(ReplicaId a, ReplicaId b) const { return actual[idx(a) * n + idx(b)]; }
    Micros one_way(ReplicaId a, ReplicaId b) const { return a == b ? 0 : rtt(a, b) / 2; }

    // One-way delivery delay with a jitter factor drawn from [1, bound].
    Micros delay(ReplicaId a, ReplicaId b, Micros send_time, Rng& rng) const
    {
        const Slack bound = send_time < gst_time ? pre_gst : slack;
        const std::int64_t ppm = rng.between(1'000'000, std::max<std::int64_t>(bound.ppm, 1'000'000));
        return Slack{ppm}.apply(one_way(a, b));
    }
};

enum class AdversaryKind : std::uint8_t { Crash, DelayAttack, ProposalDelay, TargetedSuspicion, FalseSuspicionFlood };
enum class VictimSelector : std::uint8_t { Root, Parent, RandomInternal };
enum class DelayStage : std::uint8_t { Timestamp, Send };

struct AdversarySpec {
    AdversaryKind kind = AdversaryKind::Crash;
    std::vector<ReplicaId> members;
    Round from_round = 0;
    double factor = 1.0;               // DelayAttack: multiplier on outgoing delays
    std::vector<MessageType> targets;  // DelayAttack: empty means every message
    Micros extra = 0;                  // ProposalDelay
    DelayStage stage = DelayStage::Timestamp;
    VictimSelector victim = VictimSelector::Root;
    bool reciprocate = true;
};

class AdversaryModel {
public:
    AdversaryModel() = default;
    explicit AdversaryModel(std::vector<AdversarySpec> specs) : specs_(std::move(specs))
    {
        for (const auto& s : specs_)
            for (ReplicaId r : s.members)
                faulty_.insert(r);
    }

    const std::vector<AdversarySpec>& specs() const { return specs_; }
    const std::set<ReplicaId>& members() const { return faulty_; }
    bool faulty(ReplicaId r) const { return faulty_.count(r) > 0; }
    bool correct(ReplicaId r) const { return !faulty(r); }

    bool crashed(ReplicaId r, Round round) const { return find(r, AdversaryKind::Crash, round) != nullptr; }

    double delay_factor(ReplicaId sender, MessageType t, Round round) const
    {
        const AdversarySpec* s = find(sender, AdversaryKind::DelayAttack, round);
        if (!s || (!s->targets.empty() && std::find(s->targets.begin(), s->targets.end(), t) == s->targets.end()))
            return 1.0;
        return s->factor;
    }

    Micros proposal_extra(ReplicaId leader, Round round, DelayStage stage) const
    {
        const AdversarySpec* s = find(leader, AdversaryKind::ProposalDelay, round);
        return s && s->stage == stage ? s->extra : 0;
    }

    // Targeted-suspicion members stay silent whenever they hold a special role.
    bool omits_as_internal(ReplicaId r, Round round) const
    {
        return find(r, AdversaryKind::TargetedSuspicion, round) != nullptr;
    }

    const AdversarySpec* targeted(ReplicaId r, Round round) const
    {
        return find(r, AdversaryKind::TargetedSuspicion, round);
    }

    bool floods(ReplicaId r, Round round) const { return find(r, AdversaryKind::FalseSuspicionFlood, round) != nullptr; }

    bool reciprocates(ReplicaId r, Round round) const
    {
        if (correct(r))
            return true;
        if (crashed(r, round))
            return false;
        for (const auto& s : specs_)
            if (std::find(s.members.begin(), s.members.end(), r) != s.members.end() && !s.reciprocate)
                return false;
        return true;
    }

private:
    const AdversarySpec* find(ReplicaId r, AdversaryKind kind, Round round) const
    {
        for (const auto& s : specs_)
            if (s.kind == kind && round >= s.from_round &&
                std::find(s.members.begin(), s.members.end(), r) != s.members.end())
                return &s;
        return nullptr;
    }

    std::vector<AdversarySpec> specs_;
    std::set<ReplicaId> faulty_;
};

struct Arrival {
    MessageType type;
    ReplicaId sender;
    ReplicaId recipient;
    Micros time;
};

struct RoundTrace {
    Round round = 0;
    Micros proposal_timestamp = 0;
    std::vector<Arrival> arrivals;
    bool committed = false;
    Micros commit_time = kInfinite;
    Micros deadline = kInfinite;
    std::size_t votes_by_deadline = 0;
    bool failed = false;
    std::vector<Suspicion> suspicions_raised; // every correct observer, unfiltered
    std::vector<Suspicion> retained;          // after per-observer filtering
    std::vector<Complaint> complaints;
    bool leader_suspected_someone = false;    // leader raised a condition-(b) suspicion
};

struct RoundContext {
    Round round = 0;
    Micros timestamp = 0;                     // proposal timestamp carried by the proposal
    std::optional<Micros> previous_timestamp; // same configuration, previous round
    bool previous_leader_suspected = false;
    std::uint64_t seed = 0;
};

namespace detail {

struct Event {
    Micros time;
    std::uint32_t sender;
    std::uint32_t receiver;
    MessageType tag;
    bool timer;

    // Deliveries precede timers at the same instant: an arrival exactly at its
    // timeout is on time.
    bool operator>(const Event& o) const
    {
        return std::tie(time, timer, sender, receiver, tag) > std::tie(o.time, o.timer, o.sender, o.receiver, o.tag);
    }
};

class EventQueue {
public:
    void push(const Event& e) { q_.push(e); }
    bool empty() const { return q_.empty(); }
    Event pop()
    {
        Event e = q_.top();
        q_.pop();
        return e;
    }

private:
    std::priority_queue<Event, std::vector<Event>, std::greater<>> q_;
};

// Shared plumbing for both message patterns: delivery with jitter and
// adversarial slowdown, and arrival bookkeeping.
class RoundSim {
public:
    RoundSim(const WorldModel& world, const AdversaryModel& adv, const RoundContext& ctx, RoundTrace& trace)
        : world_(world), adv_(adv), ctx_(ctx), trace_(trace), rng_(mix_seed(ctx.seed, ctx.round))
    {
    }

    bool active(ReplicaId r) const { return !adv_.crashed(r, ctx_.round); }

    void send(ReplicaId from, ReplicaId to, MessageType t, Micros now)
    {
        if (!active(from))
            return;
        Micros d = world_.delay(from, to, now, rng_);
        const double factor = adv_.delay_factor(from, t, ctx_.round);
        if (factor != 1.0)
            d = static_cast<Micros>(std::llround(static_cast<double>(d) * factor));
        queue_.push({now + d, idx(from), idx(to), t, false});
    }

    void timer(ReplicaId at, MessageType t, Micros when) { queue_.push({when, idx(at), idx(at), t, true}); }

    template <typename Handler>
    void run(Handler&& handle)
    {
        while (!queue_.empty()) {
            const Event e = queue_.pop();
            if (!e.timer) {
                if (!active(rid(e.receiver)))
                    continue;
                arrival_[{e.tag, e.sender, e.receiver}] = e.time;
                trace_.arrivals.push_back({e.tag, rid(e.sender), rid(e.receiver), e.time});
            }
            handle(e);
        }
    }

    std::optional<Micros> arrival(MessageType t, ReplicaId from, ReplicaId to) const
    {
        auto it = arrival_.find({t, idx(from), idx(to)});
        if (it == arrival_.end())
            return std::nullopt;
        return it->second;
    }

private:
    const WorldModel& world_;
    const AdversaryModel& adv_;
    const RoundContext& ctx_;
    RoundTrace& trace_;
    Rng rng_;
    EventQueue queue_;
    std::map<std::tuple<MessageType, std::uint32_t, std::uint32_t>, Micros> arrival_;
};

inline void finish_checks(RoundTrace& trace, const std::map<ReplicaId, RoundObservations>& observations,
                          const TimeoutTable& timeouts, Slack slack, ReplicaId leader, const RoundContext& ctx,
                          const CausalOrder& order)
{
    for (const auto& [observer, obs] : observations) {
        auto raw = check_round(obs, timeouts, slack, observer, leader);
        if (observer == leader && !raw.empty())
            trace.leader_suspected_someone = true;
        trace.suspicions_raised.insert(trace.suspicions_raised.end(), raw.begin(), raw.end());
        auto kept = filter_suspicions(raw, ctx.previous_leader_suspected, order);
        trace.retained.insert(trace.retained.end(), kept.begin(), kept.end());
    }
}

} // namespace detail

inline RoundTrace run_tree_round(const WorldModel& world, const TreeConfig& tree, const TimeoutTable& timeouts,
                                 const AdversaryModel& adv, const SystemParams& params, const RoundContext& ctx)
{
    RoundTrace trace;
    trace.round = ctx.round;
    trace.proposal_timestamp = ctx.timestamp;
    detail::RoundSim sim(world, adv, ctx, trace);
    const Slack slack = world.slack;
    const Round round = ctx.round;
    const ReplicaId root = tree.root;
    const Micros t0 = ctx.timestamp;
    const std::size_t b = tree.intermediates.size();

    std::map<ReplicaId, std::size_t> slot;
    std::map<ReplicaId, ReplicaId> parent;
    for (std::size_t j = 0; j < b; ++j) {
        slot[tree.intermediates[j]] = j;
        for (ReplicaId c : tree.children[j])
            parent[c] = tree.intermediates[j];
    }

    struct Inter {
        std::optional<Micros> propose_at;
        std::set<ReplicaId> votes;
        bool sent = false;
    };
    std::vector<Inter> inter(b);
    std::size_t votes_at_root = 1;
    std::vector<std::pair<Micros, std::size_t>> vote_log{{t0, 1}};

    auto silent = [&](ReplicaId r) { return adv.omits_as_internal(r, round); };

    auto send_aggregate = [&](std::size_t j, Micros now) {
        if (inter[j].sent)
            return;
        inter[j].sent = true;
        sim.send(tree.intermediates[j], root, MessageType::AggVote, now);
    };

    if (!silent(root)) {
        const Micros start = t0 + adv.proposal_extra(root, round, DelayStage::Send);
        for (ReplicaId i : tree.intermediates)
            sim.send(root, i, MessageType::Propose, start);
    }

    sim.run([&](const detail::Event& e) {
        const ReplicaId to = rid(e.receiver);
        const ReplicaId from = rid(e.sender);
        switch (e.tag) {
        case MessageType::Propose: {
            const std::size_t j = slot.at(to);
            inter[j].propose_at = e.time;
            if (silent(to))
                break;
            if (tree.children[j].empty()) {
                send_aggregate(j, e.time);
                break;
            }
            Micros latest = e.time;
            const Micros dp = timeouts.get(MessageType::Propose, to, root);
            for (ReplicaId c : tree.children[j]) {
                sim.send(to, c, MessageType::FwdPropose, e.time);
                const Micros dv = timeouts.get(MessageType::Vote, to, c);
                if (!is_infinite(dv))
                    latest = std::max(latest, e.time + slack.apply(dv - dp));
            }
            sim.timer(to, MessageType::Vote, latest);
            break;
        }
        case MessageType::FwdPropose:
            sim.send(to, from, MessageType::Vote, e.time);
            break;
        case MessageType::Vote: {
            if (e.timer) {
                send_aggregate(slot.at(to), e.time);
                break;
            }
            const std::size_t j = slot.at(to);
            if (inter[j].sent)
                break;
            inter[j].votes.insert(from);
            if (inter[j].votes.size() == tree.children[j].size())
                send_aggregate(j, e.time);
            break;
        }
        case MessageType::AggVote: {
            const std::size_t j = slot.at(from);
            // The aggregate carries the sender's vote, its children's votes, and
            // a suspicion for every child that did not vote in time.
            AggregateVote agg{from, {from}, {}};
            for (ReplicaId c : tree.children[j]) {
                if (inter[j].votes.count(c))
                    agg.votes.push_back(c);
                else
                    agg.suspicions.push_back({SuspicionKind::Slow, from, c, round, MessageType::Vote});
            }
            if (adv.correct(root)) {
                if (auto complaint = check_aggregate(agg, tree.children[j].size(), root))
                    trace.complaints.push_back(*complaint);
            }
            votes_at_root += agg.votes.size();
            vote_log.emplace_back(e.time, agg.votes.size());
            if (!trace.committed && votes_at_root >= params.q) {
                trace.committed = true;
                trace.commit_time = e.time;
            }
            break;
        }
        default:
            break;
        }
    });

    trace.deadline = is_infinite(timeouts.round_duration) ? kInfinite : t0 + slack.apply(timeouts.round_duration);
    for (const auto& [t, v] : vote_log)
        if (t <= trace.deadline)
            trace.votes_by_deadline += v;
    trace.failed = !trace.committed || trace.commit_time > trace.deadline || !sim.active(root) || silent(root);
    if (!sim.active(root) || silent(root)) {
        trace.committed = false;
        trace.commit_time = kInfinite;
    }

    std::map<ReplicaId, RoundObservations> obs;
    for (std::uint32_t i = 0; i < params.n; ++i) {
        const ReplicaId r = rid(i);
        if (adv.faulty(r))
            continue;
        RoundObservations o;
        o.round = round;
        o.proposal_timestamp = t0;
        o.previous_timestamp = ctx.previous_timestamp;
        if (r == root) {
            for (ReplicaId m : tree.intermediates) {
                auto a = sim.arrival(MessageType::AggVote, m, root);
                o.expected.push_back({MessageType::AggVote, m, a ? std::optional{*a - t0} : std::nullopt});
            }
        } else if (auto it = slot.find(r); it != slot.end()) {
            const std::size_t j = it->second;
            auto p = inter[j].propose_at;
            o.expected.push_back({MessageType::Propose, root, p ? std::optional{*p - t0} : std::nullopt});
            if (p) {
                const Micros dp = timeouts.get(MessageType::Propose, r, root);
                for (ReplicaId c : tree.children[j]) {
                    auto a = sim.arrival(MessageType::Vote, c, r);
                    o.expected.push_back(
                        {MessageType::Vote, c, a ? std::optional{*a - t0} : std::nullopt, *p - t0, dp});
                }
            }
        }
        obs.emplace(r, std::move(o));
    }
    detail::finish_checks(trace, obs, timeouts, slack, root, ctx, tree_causal_order());
    return trace;
}

inline RoundTrace run_star_round(const WorldModel& world, const StarConfig& star, const TimeoutTable& timeouts,
                                 const AdversaryModel& adv, const SystemParams& params, const RoundContext& ctx)
{
    RoundTrace trace;
    trace.round = ctx.round;
    trace.proposal_timestamp = ctx.timestamp;
    detail::RoundSim sim(world, adv, ctx, trace);
    const Slack slack = world.slack;
    const Round round = ctx.round;
    const ReplicaId leader = star.leader;
    const Micros t0 = ctx.timestamp;
    const std::uint32_t n = params.n;

    std::vector<std::size_t> writes(n, 0), accepts(n, 0);
    std::vector<bool> accepted(n, false);
    std::vector<Micros> accept_times; // at the leader

    auto broadcast = [&](ReplicaId from, MessageType t, Micros now) {
        for (std::uint32_t b = 0; b < n; ++b)
            if (rid(b) != from)
                sim.send(from, rid(b), t, now);
    };
    auto on_accept = [&](ReplicaId at, Micros now) {
        if (++accepts[idx(at)] == params.q && at == leader) {
            trace.committed = true;
            trace.commit_time = now;
        }
        if (at == leader)
            accept_times.push_back(now);
    };
    auto on_write = [&](ReplicaId at, Micros now) {
        if (++writes[idx(at)] == params.q && !accepted[idx(at)] && sim.active(at)) {
            accepted[idx(at)] = true;
            broadcast(at, MessageType::Accept, now);
            on_accept(at, now);
        }
    };
    auto on_propose = [&](ReplicaId at, Micros now) {
        if (!sim.active(at))
            return;
        broadcast(at, MessageType::Write, now);
        on_write(at, now);
    };

    const bool leader_silent = !sim.active(leader) || adv.omits_as_internal(leader, round);
    if (!leader_silent) {
        const Micros start = t0 + adv.proposal_extra(leader, round, DelayStage::Send);
        broadcast(leader, MessageType::Propose, start);
        on_propose(leader, start);
    }

    sim.run([&](const detail::Event& e) {
        const ReplicaId to = rid(e.receiver);
        switch (e.tag) {
        case MessageType::Propose: on_propose(to, e.time); break;
        case MessageType::Write: on_write(to, e.time); break;
        case MessageType::Accept: on_accept(to, e.time); break;
        default: break;
        }
    });

    trace.deadline = is_infinite(timeouts.round_duration) ? kInfinite : t0 + slack.apply(timeouts.round_duration);
    for (Micros t : accept_times)
        if (t <= trace.deadline)
            ++trace.votes_by_deadline;
    trace.failed = !trace.committed || trace.commit_time > trace.deadline;

    std::map<ReplicaId, RoundObservations> obs;
    for (std::uint32_t i = 0; i < n; ++i) {
        const ReplicaId r = rid(i);
        if (adv.faulty(r))
            continue;
        RoundObservations o;
        o.round = round;
        o.proposal_timestamp = t0;
        o.previous_timestamp = ctx.previous_timestamp;
        auto rel = [&](std::optional<Micros> a) { return a ? std::optional{*a - t0} : std::nullopt; };
        if (r != leader)
            o.expected.push_back({MessageType::Propose, leader, rel(sim.arrival(MessageType::Propose, leader, r))});
        for (std::uint32_t s = 0; s < n; ++s) {
            if (s == i)
                continue;
            o.expected.push_back({MessageType::Write, rid(s), rel(sim.arrival(MessageType::Write, rid(s), r))});
            o.expected.push_back({MessageType::Accept, rid(s), rel(sim.arrival(MessageType::Accept, rid(s), r))});
        }
        obs.emplace(r, std::move(o));
    }
    detail::finish_checks(trace, obs, timeouts, slack, leader, ctx, star_causal_order());
    return trace;
}

inline RoundTrace run_round(const WorldModel& world, const Configuration& config, const TimeoutTable& timeouts,
                            const AdversaryModel& adv, const SystemParams& params, const RoundContext& ctx)
{
    if (const auto* t = std::get_if<TreeConfig>(&config))
        return run_tree_round(world, *t, timeouts, adv, params, ctx);
    return run_star_round(world, std::get<StarConfig>(config), timeouts, adv, params, ctx);
}

} // namespace optilog

#endif
