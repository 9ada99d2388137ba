#include <gtest/gtest.h>

#include <vector>

#include "relaysel/policies.hpp"

using namespace relaysel;

namespace {

struct Fixture {
    std::vector<int> queues;
    std::vector<RelayParams> params;
    std::vector<IndexTable> tables;
    RngStream rng{123};

    PolicyContext ctx() { return {0, queues, params, tables, &rng}; }
};

Fixture make(std::vector<int> q, std::vector<double> f, std::vector<double> l) {
    Fixture fx;
    fx.queues = std::move(q);
    for (std::size_t i = 0; i < f.size(); ++i) fx.params.push_back({f[i], l[i], 1.0, 20});
    return fx;
}

// Counts selections over n draws and returns the chi-square statistic
// against a uniform split over `expected` relays.
double tie_chi2(PolicyKind kind, Fixture& fx, const std::vector<std::size_t>& expected, int n = 100000) {
    std::vector<int> count(fx.queues.size(), 0);
    for (int i = 0; i < n; ++i) ++count[select(kind, fx.ctx())];
    double chi2 = 0.0;
    const double e = n / double(expected.size());
    std::size_t in_set = 0;
    for (std::size_t idx : expected) {
        chi2 += (count[idx] - e) * (count[idx] - e) / e;
        in_set += static_cast<std::size_t>(count[idx]);
    }
    EXPECT_EQ(in_set, static_cast<std::size_t>(n)) << "selected a relay outside the tied set";
    return chi2;
}

}  // namespace

TEST(Random, SingleRelay) {
    auto fx = make({3}, {0.3}, {0.6});
    for (int i = 0; i < 10; ++i) EXPECT_EQ(select_random(fx.ctx()), 0u);
}

TEST(Random, FrequenciesAreUniform) {
    auto fx = make({0, 0, 0, 0, 0}, {0.3, 0.3, 0.3, 0.3, 0.3}, {0.6, 0.6, 0.6, 0.6, 0.6});
    std::vector<int> count(5, 0);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) ++count[select_random(fx.ctx())];
    for (int c : count) EXPECT_NEAR(c / double(n), 0.2, 0.002);
}

TEST(Random, SeedReplaysSequence) {
    auto a = make({0, 0, 0}, {0.3, 0.3, 0.3}, {0.6, 0.6, 0.6});
    auto b = make({0, 0, 0}, {0.3, 0.3, 0.3}, {0.6, 0.6, 0.6});
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(select_random(a.ctx()), select_random(b.ctx()));
}

TEST(LoadBased, ArgminAndTies) {
    auto fx = make({3, 1, 2}, {0.3, 0.3, 0.3}, {0.6, 0.6, 0.6});
    EXPECT_EQ(select_load_based(fx.ctx()), 1u);
    fx.queues = {2, 2, 5};
    EXPECT_LT(tie_chi2(PolicyKind::LoadBased, fx, {0, 1}), 10.828);
    fx.queues = {4, 4, 4};
    EXPECT_LT(tie_chi2(PolicyKind::LoadBased, fx, {0, 1, 2}), 13.816);
}

TEST(Mmrs, Examples) {
    auto fx = make({0, 0, 0, 0, 0}, {0.68, 0.63, 0.55, 0.44, 0.38}, {0.71, 0.64, 0.6, 0.56, 0.47});
    EXPECT_EQ(select_mmrs(fx.ctx()), 0u);
    auto g = make({0, 0}, {0.2, 0.9}, {0.9, 0.3});
    EXPECT_EQ(select_mmrs(g.ctx()), 1u);
    auto h = make({0, 0}, {0.5, 0.5}, {0.5, 0.5});
    EXPECT_LT(tie_chi2(PolicyKind::MMRS, h, {0, 1}), 10.828);
}

TEST(Mlrs, Examples) {
    auto fx = make({4, 2}, {0.3, 0.3}, {0.5, 0.9});
    EXPECT_EQ(select_mlrs(fx.ctx()), 0u);
    auto empty = make({0, 0, 0, 0}, {0.3, 0.3, 0.3, 0.3}, {0.4, 0.5, 0.6, 0.7});
    EXPECT_LT(tie_chi2(PolicyKind::MLRS, empty, {0, 1, 2, 3}), 16.266);
    auto tie = make({1, 1}, {0.3, 0.3}, {0.6, 0.6});
    EXPECT_LT(tie_chi2(PolicyKind::MLRS, tie, {0, 1}), 10.828);
}

TEST(Whittle, PicksSmallestIndex) {
    auto fx = make({0, 7}, {0.3, 0.3}, {0.6, 0.6});
    const IndexTable t = build_table(fx.params[0]);
    fx.tables = {t, t};
    EXPECT_EQ(select_whittle(fx.ctx()), 0u);
    fx.queues = {6, 6};
    EXPECT_LT(tie_chi2(PolicyKind::Whittle, fx, {0, 1}), 10.828);
}

TEST(Whittle, SelectionInvariantUnderCommonCostScaling) {
    std::vector<RelayParams> base{{0.3, 0.6, 4.0, 15}, {0.25, 0.7, 6.0, 15}, {0.4, 0.8, 2.5, 15}};
    std::vector<IndexTable> t1, t2;
    for (auto p : base) {
        t1.push_back(build_table(p));
        p.C *= 17.0;
        t2.push_back(build_table(p));
    }
    std::vector<int> q(3);
    RngStream r1(9), r2(9);
    for (int a = 0; a <= 15; a += 3)
        for (int b = 0; b <= 15; b += 5)
            for (int c = 0; c <= 15; c += 4) {
                q = {a, b, c};
                PolicyContext c1{0, q, base, t1, &r1}, c2{0, q, base, t2, &r2};
                EXPECT_EQ(select_whittle(c1), select_whittle(c2));
            }
}

TEST(Whittle, MissingTablesIsConfigError) {
    auto fx = make({0, 0}, {0.3, 0.3}, {0.6, 0.6});
    EXPECT_THROW(select_whittle(fx.ctx()), ConfigError);
}

TEST(Policy, NamesRoundTrip) {
    for (PolicyKind k : {PolicyKind::Random, PolicyKind::LoadBased, PolicyKind::MMRS, PolicyKind::MLRS,
                         PolicyKind::Whittle})
        EXPECT_EQ(parse_policy(policy_name(k)), k);
    EXPECT_THROW(parse_policy("best"), ConfigError);
}
