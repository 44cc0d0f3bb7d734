#include <gtest/gtest.h>

#include "optilog/json_io.hpp"
#include "optilog/misbehavior.hpp"

using namespace optilog;

namespace {

const ReplicaId A = rid(0), B = rid(1), C = rid(2);

Complaint complaint(ReplicaId from, ReplicaId against, bool valid, ComplaintKind k = ComplaintKind::Equivocation)
{
    return {from, against, k, Evidence{"blob", valid}};
}

Suspicion sus(ReplicaId from, ReplicaId to) { return {SuspicionKind::Slow, from, to, 0, MessageType::Vote}; }

} // namespace

TEST(VerifyComplaint, ValidConvictsAccused)
{
    const auto v = verify_complaint(complaint(A, B, true), {});
    EXPECT_TRUE(v.valid);
    EXPECT_EQ(v.faulty, std::set<ReplicaId>{B});
}

TEST(VerifyComplaint, InvalidConvictsAccuser)
{
    const auto v = verify_complaint(complaint(A, B, false), {});
    EXPECT_FALSE(v.valid);
    EXPECT_EQ(v.faulty, std::set<ReplicaId>{A});
}

TEST(VerifyComplaint, DuplicateIsIdempotent)
{
    const auto once = verify_complaint(complaint(A, B, true), {});
    const auto twice = verify_complaint(complaint(C, B, true), once.faulty);
    EXPECT_EQ(twice.faulty, once.faulty);
}

TEST(MisbehaviorMonitor, RepeatedTripleIgnored)
{
    MisbehaviorMonitor m;
    EXPECT_EQ(m.apply(complaint(A, B, true)), B);
    EXPECT_EQ(m.apply(complaint(A, B, true)), std::nullopt);
    EXPECT_EQ(m.apply(complaint(A, B, true, ComplaintKind::InvalidVote)), std::nullopt); // B already in F
    EXPECT_EQ(m.faulty().size(), 1u);
}

TEST(MisbehaviorMonitor, FaultyAccuserCannotGrowFArbitrarily)
{
    // A floods invalid complaints against everyone: only A lands in F.
    MisbehaviorMonitor m;
    for (std::uint32_t i = 1; i < 10; ++i)
        m.apply(complaint(A, rid(i), false));
    EXPECT_EQ(m.faulty(), std::set<ReplicaId>{A});
}

TEST(MisbehaviorMonitor, FIsMonotone)
{
    MisbehaviorMonitor m;
    Rng rng(4);
    std::size_t last = 0;
    for (int i = 0; i < 500; ++i) {
        m.apply(complaint(rid(static_cast<std::uint32_t>(rng.below(20))), rid(static_cast<std::uint32_t>(rng.below(20))),
                          rng.below(2) == 0, static_cast<ComplaintKind>(rng.below(5))));
        EXPECT_GE(m.faulty().size(), last);
        last = m.faulty().size();
    }
}

TEST(CheckAggregate, FullVotesOk)
{
    EXPECT_FALSE(check_aggregate({A, {A, B, C, rid(3)}, {}}, 3, B));
}

TEST(CheckAggregate, VotesPlusSuspicionsOk)
{
    EXPECT_FALSE(check_aggregate({A, {A, B}, {sus(A, C), sus(A, rid(3))}}, 3, B));
}

TEST(CheckAggregate, ShortAggregateComplains)
{
    const auto c = check_aggregate({A, {A, B, C}, {}}, 3, rid(9));
    ASSERT_TRUE(c);
    EXPECT_EQ(c->kind, ComplaintKind::InvalidAggregate);
    EXPECT_EQ(c->accused, A);
    EXPECT_EQ(c->accuser, rid(9));
    EXPECT_TRUE(c->evidence.valid);
}

TEST(SuspicionGraph, NeverContainsFaulty)
{
    SuspicionState s(SystemParams::make(7, 2));
    MisbehaviorMonitor m;
    s.apply({SuspicionKind::False, A, B, 0, MessageType::Vote}, 0);
    if (auto convicted = m.apply(complaint(C, B, true)))
        s.mark_faulty(*convicted);
    s.apply({SuspicionKind::False, C, B, 0, MessageType::Vote}, 1);
    EXPECT_FALSE(s.in_v(B));
    EXPECT_EQ(s.graph().edge_count(), 0u);
}

TEST(ComplaintJson, RoundTrip)
{
    const auto c = complaint(A, C, true, ComplaintKind::InvalidAggregate);
    EXPECT_EQ(complaint_from_json(to_json(c)), c);
}
