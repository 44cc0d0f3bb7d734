#ifndef OPTILOG_MISBEHAVIOR_HPP
#define OPTILOG_MISBEHAVIOR_HPP

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bytes.hpp"
#include "suspicion.hpp"

namespace optilog {

enum class ComplaintKind : std::uint8_t { Equivocation, InvalidAggregate, InvalidVote, InvalidProposal, InvalidComplaint };

inline const char* to_string(ComplaintKind k)
{
    switch (k) {
    case ComplaintKind::Equivocation: return "equivocation";
    case ComplaintKind::InvalidAggregate: return "invalid_aggregate";
    case ComplaintKind::InvalidVote: return "invalid_vote";
    case ComplaintKind::InvalidProposal: return "invalid_proposal";
    case ComplaintKind::InvalidComplaint: return "invalid_complaint";
    }
    return "?";
}

inline std::optional<ComplaintKind> complaint_kind_from(const std::string& s)
{
    for (int i = 0; i <= static_cast<int>(ComplaintKind::InvalidComplaint); ++i)
        if (s == to_string(static_cast<ComplaintKind>(i)))
            return static_cast<ComplaintKind>(i);
    return std::nullopt;
}

// Stand-in for a cryptographic proof: the simulator's oracle decides validity
// when it creates the blob, and the flag travels with it.
struct Evidence {
    std::string blob;
    bool valid = false;

    bool operator==(const Evidence&) const = default;
};

struct Complaint {
    ReplicaId accuser{};
    ReplicaId accused{};
    ComplaintKind kind = ComplaintKind::Equivocation;
    Evidence evidence;

    bool operator==(const Complaint&) const = default;
};

struct Verdict {
    bool valid = false;
    std::set<ReplicaId> faulty;
};

inline Verdict verify_complaint(const Complaint& c, std::set<ReplicaId> faulty)
{
    const bool valid = c.evidence.valid;
    faulty.insert(valid ? c.accused : c.accuser);
    return {valid, std::move(faulty)};
}

struct AggregateVote {
    ReplicaId intermediate{};
    std::vector<ReplicaId> votes; // includes the intermediate's own vote
    std::vector<Suspicion> suspicions;
};

// An intermediate with `children` children must account for each of them
// plus itself, either with a vote or with a suspicion.
inline std::optional<Complaint> check_aggregate(const AggregateVote& agg, std::size_t children, ReplicaId checker)
{
    if (agg.votes.size() + agg.suspicions.size() >= children + 1)
        return std::nullopt;
    return Complaint{checker, agg.intermediate, ComplaintKind::InvalidAggregate,
                     Evidence{"aggregate:" + to_string(agg.intermediate) + ":" + std::to_string(agg.votes.size()) + "+" +
                                  std::to_string(agg.suspicions.size()) + "<" + std::to_string(children + 1),
                              true}};
}

class MisbehaviorMonitor {
public:
    const std::set<ReplicaId>& faulty() const { return faulty_; }

    // Returns the replica that entered F, if any. Repeats of a
    // (accuser, accused, kind) triple are ignored.
    std::optional<ReplicaId> apply(const Complaint& c)
    {
        if (!seen_.insert({c.accuser, c.accused, c.kind}).second)
            return std::nullopt;
        const ReplicaId blamed = c.evidence.valid ? c.accused : c.accuser;
        auto v = verify_complaint(c, faulty_);
        const bool added = v.faulty.size() != faulty_.size();
        faulty_ = std::move(v.faulty);
        return added ? std::optional{blamed} : std::nullopt;
    }

    void serialize(ByteWriter& w) const
    {
        w.ids(faulty_);
        w.u64(seen_.size());
        for (const auto& [a, b, k] : seen_) {
            w.id(a);
            w.id(b);
            w.u8(static_cast<std::uint8_t>(k));
        }
    }

private:
    std::set<ReplicaId> faulty_;
    std::set<std::tuple<ReplicaId, ReplicaId, ComplaintKind>> seen_;
};

} // namespace optilog

#endif
