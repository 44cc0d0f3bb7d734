#include <gtest/gtest.h>

#include "optilog/bytes.hpp"
#include "optilog/core.hpp"

using namespace optilog;

TEST(SystemParams, QuorumIsNMinusF)
{
    const auto p = SystemParams::make(13, 4);
    EXPECT_EQ(p.q, 9u);
    EXPECT_EQ(p.replica_set.size(), 13u);
    EXPECT_EQ(SystemParams::for_n(21).f, 6u);
    EXPECT_EQ(SystemParams::for_n(4).f, 1u);
}

TEST(SystemParams, RejectsTooManyFaults)
{
    EXPECT_THROW(SystemParams::make(6, 2), std::invalid_argument);
    EXPECT_THROW(SystemParams::make(4, 1, 0.9), std::invalid_argument);
}

TEST(Slack, AppliesIntegerParts)
{
    const Slack s = Slack::from(1.2);
    EXPECT_EQ(s.ppm, 1'200'000);
    EXPECT_EQ(s.apply(millis(100)), millis(120));
    EXPECT_EQ(s.apply(millis(30)), millis(36));
    EXPECT_EQ(s.apply(kInfinite), kInfinite);
    EXPECT_EQ(Slack::from(1.0).apply(12345), 12345);
}

TEST(Slack, FloorOfSumCoversSumOfFloors)
{
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const Slack s{rng.between(1'000'000, 1'500'000)};
        const Micros a = rng.between(0, 300'000);
        const Micros b = rng.between(0, 300'000);
        EXPECT_GE(s.apply(a + b), s.apply(a) + s.apply(b));
    }
}

TEST(Latency, InfinityPropagates)
{
    EXPECT_EQ(add_latency(kInfinite, 5), kInfinite);
    EXPECT_EQ(add_latency(3, 4), 7);
}

TEST(Rng, SameSeedSameStream)
{
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(a.below(1000), b.below(1000));
    EXPECT_THROW(a.below(0), std::invalid_argument);
}

TEST(Rng, DrawsStayInRange)
{
    Rng r(3);
    for (int i = 0; i < 10000; ++i) {
        const auto v = r.between(-5, 5);
        EXPECT_GE(v, -5);
        EXPECT_LE(v, 5);
        const double u = r.unit();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Rng, MixSeedSeparatesStreams)
{
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(9, 9), mix_seed(9, 9));
}

TEST(Bytes, LittleEndianFixedWidth)
{
    ByteWriter w;
    w.u32(0x01020304);
    const auto bytes = w.take();
    ASSERT_EQ(bytes.size(), 4u);
    EXPECT_EQ(bytes[0], 0x04);
    EXPECT_EQ(bytes[3], 0x01);
}
