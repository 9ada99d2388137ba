// Command-line front end: validate, index, simulate.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "relaysel/scenario.hpp"

namespace {

int report_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relay selection experiments: Whittle index and baseline policies"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string cache_dir = "relaysel_cache";
    std::string on_fail = "retry";
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());

    auto* validate_cmd = app.add_subcommand("validate", "Parse and check a scenario file");
    validate_cmd->add_option("--config", config, "Scenario JSON file")->required();

    auto* index_cmd = app.add_subcommand("index", "Precompute Whittle index tables into the cache");
    index_cmd->add_option("--config", config, "Scenario JSON file")->required();
    index_cmd->add_option("--cache-dir", cache_dir, "Index table cache directory")->capture_default_str();
    index_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* sim_cmd = app.add_subcommand("simulate", "Run every sweep point, policy and seed; write CSV and JSON");
    sim_cmd->add_option("--config", config, "Scenario JSON file")->required();
    sim_cmd->add_option("--out", out, "Output prefix (default: the scenario's output or name)");
    sim_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--on-fail", on_fail, "Source behaviour after a failed first hop")
        ->check(CLI::IsMember({"retry", "drop"}))
        ->capture_default_str();
    sim_cmd->add_option("--cache-dir", cache_dir, "Index table cache directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        const relaysel::ScenarioSpec spec = relaysel::load_config(config);

        if (*validate_cmd) {
            std::printf("%s: ok (%zu relays listed, %zu sweep point%s, %zu policies, %zu seeds, T=%lld)\n",
                        spec.name.c_str(), spec.relays.size(), spec.point_count(), spec.point_count() == 1 ? "" : "s",
                        spec.policies.size(), spec.seeds.size(), static_cast<long long>(spec.horizon));
            return 0;
        }

        if (*index_cmd) {
            const auto set = relaysel::precompute_tables(spec, cache_dir, threads);
            std::printf("%zu tables: %zu computed, %zu loaded from %s\n", set.by_key.size(), set.computed, set.loaded,
                        cache_dir.c_str());
            return 0;
        }

        relaysel::RunOptions opt;
        opt.out_prefix = out;
        opt.threads = threads;
        opt.on_fail = on_fail == "drop" ? relaysel::OnFail::Drop : relaysel::OnFail::Retry;
        opt.cache_dir = cache_dir;
        const auto res = relaysel::run_scenario(spec, opt);
        std::printf("wrote %s (%zu rows) and %s\n", res.csv_path.c_str(), res.rows.size(), res.json_path.c_str());
        return 0;
    } catch (const relaysel::ConfigError& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
