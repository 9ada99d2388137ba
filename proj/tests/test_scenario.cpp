#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "relaysel/scenario.hpp"

using namespace relaysel;
namespace fs = std::filesystem;

namespace {

const std::string kDir = RELAYSEL_SCENARIO_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("relaysel_scn_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmall = R"({
  "name": "small",
  "T": 3000,
  "buffer": [20, 20, 20],
  "relays": [{"f": 0.3, "l": 0.6, "C": 5}, {"f": 0.3, "l": 0.6, "C": 5}, {"f": 0.2, "l": 0.7, "C": 2}],
  "policies": ["random", "whittle"],
  "seeds": [1, 2, 3],
  "sweep": {"variable": "M", "values": [2, 3]}
})";

}  // namespace

TEST(Config, HeteroScenarioLoadsWithWarning) {
    std::ostringstream diag;
    const auto s = load_config(kDir + "/hetero5.json", &diag);
    EXPECT_EQ(s.base().relays.size(), 5u);
    EXPECT_EQ(s.horizon, 30000);
    EXPECT_EQ(s.base().relays[4].K, 500);
    EXPECT_EQ(s.policies.size(), 5u);
    EXPECT_EQ(s.seeds.size(), 8u);
    EXPECT_NE(diag.str().find("warning"), std::string::npos);
}

TEST(Config, CommonFirstHopSweep) {
    const auto s = load_config(kDir + "/f_sweep_wide.json", nullptr);
    ASSERT_TRUE(s.sweep);
    EXPECT_EQ(s.sweep->variable, SweepVariable::FCommon);
    EXPECT_EQ(s.point_count(), 8u);
    const auto c = s.system_at(7);
    EXPECT_EQ(c.relays.size(), 12u);
    for (const auto& r : c.relays) EXPECT_DOUBLE_EQ(r.f, 0.8);
    EXPECT_DOUBLE_EQ(c.relays[11].l, 0.856);
}

TEST(Config, AllShippedScenariosParse) {
    for (const auto& e : fs::directory_iterator(kDir)) EXPECT_NO_THROW(load_config(e.path().string(), nullptr)) << e.path();
}

TEST(Config, ZeroCostNamesField) {
    std::string text = kSmall;
    text.replace(text.find("\"C\": 2"), 6, "\"C\": 0");
    try {
        parse_config(text, "x.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("relays[2].C"), std::string::npos) << e.what();
    }
}

TEST(Config, MalformedJsonReportsLine) {
    try {
        parse_config("{\n  \"name\": \"a\",\n  \"T\": ,\n}", "bad.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Config, SchemaViolations) {
    auto expect_error = [](std::string text, const std::string& from, const std::string& to, const std::string& needle) {
        text.replace(text.find(from), from.size(), to);
        try {
            parse_config(text);
            ADD_FAILURE() << "accepted: " << to;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_error(kSmall, R"(["random", "whittle"])", "[]", "no policies requested");
    expect_error(kSmall, R"("random", "whittle")", R"("random", "best")", "policies[1]");
    expect_error(kSmall, R"("random", "whittle")", R"("random", "random")", "duplicate");
    expect_error(kSmall, "[2, 3]", "[2, 4]", "sweep.values[1]");
    expect_error(kSmall, "\"T\": 3000", "\"T\": 0", "'T'");
    expect_error(kSmall, "[20, 20, 20]", "[20, 20]", "buffer");
    expect_error(kSmall, "[20, 20, 20]", "[20, 0, 20]", "buffer");
    expect_error(kSmall, "\"seeds\"", "\"seed\"", "unknown key");
    expect_error(kSmall, R"("variable": "M", "values": [2, 3])", R"("variable": "f_common", "values": [0.2])",
                 "relays[0].f");
    expect_error(kSmall, "\"f\": 0.3, \"l\": 0.6, \"C\": 5}, {", "\"l\": 0.6, \"C\": 5}, {", "relays[0].f");
    expect_error(kSmall, "[1, 2, 3]", "[1, -2]", "seeds[1]");
}

TEST(Config, ScalarBufferAppliesToAll) {
    std::string text = kSmall;
    text.replace(text.find("[20, 20, 20]"), 12, "7");
    const auto s = parse_config(text);
    for (const auto& r : s.relays) EXPECT_EQ(r.K, 7);
}

TEST(Cache, IdempotentAndShared) {
    const auto dir = scratch("cache");
    const auto spec = parse_config(kSmall);
    std::ostringstream diag;
    const auto first = precompute_tables(spec, dir.string(), 2, &diag);
    // Relays 0 and 1 are identical, so two tables cover all points.
    EXPECT_EQ(first.computed, 2u);
    EXPECT_EQ(first.loaded, 0u);
    const auto second = precompute_tables(spec, dir.string(), 2, &diag);
    EXPECT_EQ(second.computed, 0u);
    EXPECT_EQ(second.loaded, 2u);
    for (const auto& [key, t] : first.by_key) EXPECT_EQ(t.lambda, second.by_key.at(key).lambda);
    EXPECT_TRUE(diag.str().empty());
}

TEST(Cache, CorruptEntryIsRebuilt) {
    const auto dir = scratch("corrupt");
    const auto spec = parse_config(kSmall);
    precompute_tables(spec, dir.string(), 1, nullptr);
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::ofstream(e.path(), std::ios::trunc) << "{ not json";
        ++n;
        break;
    }
    ASSERT_EQ(n, 1u);
    std::ostringstream diag;
    const auto again = precompute_tables(spec, dir.string(), 1, &diag);
    EXPECT_EQ(again.computed, 1u);
    EXPECT_EQ(again.loaded, 1u);
    EXPECT_NE(diag.str().find("warning"), std::string::npos);
    EXPECT_EQ(precompute_tables(spec, dir.string(), 1, nullptr).computed, 0u);
}

TEST(Run, RowsOrderedByPointThenPolicy) {
    const auto dir = scratch("rows");
    const auto spec = parse_config(kSmall);
    RunOptions opt;
    opt.out_prefix = (dir / "out").string();
    opt.threads = 3;
    opt.diag = nullptr;
    const auto res = run_scenario(spec, opt);
    ASSERT_EQ(res.rows.size(), 4u);
    EXPECT_EQ(*res.rows[0].sweep_value, 2.0);
    EXPECT_EQ(res.rows[0].policy, PolicyKind::Random);
    EXPECT_EQ(res.rows[1].policy, PolicyKind::Whittle);
    EXPECT_EQ(*res.rows[3].sweep_value, 3.0);

    const std::string csv = slurp(res.csv_path);
    EXPECT_NE(csv.find("# seeds: 1,2,3\n"), std::string::npos);
    EXPECT_NE(csv.find("# config_hash: " + hex64(res.config_hash)), std::string::npos);
    EXPECT_NE(csv.find(csv_header()), std::string::npos);
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    EXPECT_NE(csv.find("\nsmall,2,random,3,"), std::string::npos);
    EXPECT_NE(csv.find("\nsmall,3,whittle,3,"), std::string::npos);

    const auto summary = nlohmann::json::parse(slurp(res.json_path));
    EXPECT_EQ(summary["rows"].size(), 4u);
    EXPECT_EQ(summary["seeds"], nlohmann::json({1, 2, 3}));
    EXPECT_EQ(summary["config"]["name"], "small");
}

TEST(Run, OutputIndependentOfThreads) {
    const auto dir = scratch("threads");
    const auto spec = parse_config(kSmall);
    RunOptions opt;
    opt.diag = nullptr;
    opt.out_prefix = (dir / "a").string();
    opt.threads = 1;
    const auto a = run_scenario(spec, opt);
    opt.out_prefix = (dir / "b").string();
    opt.threads = 8;
    const auto b = run_scenario(spec, opt);
    EXPECT_EQ(slurp(a.csv_path), slurp(b.csv_path));
    EXPECT_EQ(slurp(a.json_path), slurp(b.json_path));
}

TEST(Run, PartialResultsFlushedOnFailure) {
    const auto dir = scratch("partial");
    auto spec = parse_config(kSmall);
    // A table covering only state 0 makes every Whittle run fail at its first arrival.
    TableSet broken = precompute_tables(spec, {}, 1, nullptr);
    for (auto& [key, t] : broken.by_key) {
        t.relay.K = 0;
        t.grid = {0};
        t.lambda = {0.0};
    }
    RunOptions opt;
    opt.diag = nullptr;
    opt.out_prefix = (dir / "p").string();
    EXPECT_THROW(run_scenario(spec, opt, &broken), std::domain_error);
    const std::string csv = slurp(opt.out_prefix + ".csv");
    EXPECT_NE(csv.find(",random,"), std::string::npos);
    EXPECT_EQ(csv.find(",whittle,"), std::string::npos);
}

TEST(Run, FormatsFullPrecision) {
    EXPECT_EQ(format_real(0.1), "0.10000000000000001");
    EXPECT_EQ(format_real(5.0), "5");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
}
