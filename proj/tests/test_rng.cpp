#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "relaysel/rng.hpp"

using namespace relaysel;

TEST(Rng, SplitMixReferenceValue) {
    // First output of the reference SplitMix64 generator seeded with 0.
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
    RngStream s(0);
    EXPECT_EQ(s.next_u64(), 0xE220A8397B1DCDAFULL);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    const RngPlan a(42), b(42), c(43);
    RngStream ta = a.policy_ties(), tb = b.policy_ties(), tc = c.policy_ties();
    for (int i = 0; i < 100; ++i) {
        const auto x = ta.next_u64();
        EXPECT_EQ(x, tb.next_u64());
        EXPECT_NE(x, tc.next_u64());
    }
    std::set<std::uint64_t> keys{a.stream_key("policy_ties"), a.stream_key("channel_A"), a.stream_key("channel_W"),
                                 c.stream_key("policy_ties")};
    EXPECT_EQ(keys.size(), 4u);
}

TEST(Rng, ChannelDrawsIgnoreQueryOrder) {
    const RngPlan plan(7);
    std::vector<double> forward;
    for (int n = 0; n < 50; ++n) forward.push_back(plan.channel_uniform(Channel::A, 3, n));
    for (int n = 49; n >= 0; --n) {
        plan.channel_uniform(Channel::W, 1, n);
        EXPECT_EQ(plan.channel_uniform(Channel::A, 3, n), forward[static_cast<std::size_t>(n)]);
    }
    EXPECT_NE(plan.channel_uniform(Channel::A, 3, 0), plan.channel_uniform(Channel::W, 3, 0));
    EXPECT_NE(plan.channel_uniform(Channel::A, 3, 0), plan.channel_uniform(Channel::A, 4, 0));
}

TEST(Rng, ChannelSuccessRate) {
    const RngPlan plan(11);
    int hits = 0;
    const int n = 200000;
    for (int s = 0; s < n; ++s) hits += plan.channel_success(Channel::W, 0, s, 0.3);
    EXPECT_NEAR(hits / double(n), 0.3, 4 * std::sqrt(0.21 / n));
}

TEST(Rng, BoundedDrawIsUniform) {
    RngStream s(5);
    const int k = 7, n = 700000;
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
        const auto v = s.below(k);
        ASSERT_LT(v, static_cast<std::uint64_t>(k));
        ++count[static_cast<std::size_t>(v)];
    }
    double chi2 = 0.0;
    const double e = n / double(k);
    for (int c : count) chi2 += (c - e) * (c - e) / e;
    EXPECT_LT(chi2, 22.458);  // chi-square(6) upper 0.001 quantile
    EXPECT_EQ(RngStream(1).below(1), 0u);
}

TEST(Rng, UnitIntervalBounds) {
    EXPECT_EQ(to_unit(0), 0.0);
    EXPECT_LT(to_unit(~0ULL), 1.0);
}
