#pragma once

// Experiment orchestration: JSON scenario files, index-table caching and
// CSV/JSON result files.
//
// Scenario schema (top level):
//   name: string
//   T: integer >= 1
//   buffer: integer | [integer]      one per relay, or shared
//   relays: [{f, l, C}]              f (l) may be omitted under an f_common (l_common) sweep
//   policies: ["random" | "load" | "mmrs" | "mlrs" | "whittle"]
//   seeds: [u64]
//   sweep?: {variable: "M" | "f_common" | "l_common", values: [number]}
//   whittle?: {beta, max_iter, tol_lambda, dense_prefix, grid_stride, mode}
//   output?: string                  default result prefix
//   description?: string

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "relaysel/model.hpp"
#include "relaysel/parallel.hpp"
#include "relaysel/policies.hpp"
#include "relaysel/rng.hpp"
#include "relaysel/sim.hpp"
#include "relaysel/table_io.hpp"
#include "relaysel/whittle.hpp"

namespace relaysel {

enum class SweepVariable { M, FCommon, LCommon };

inline std::string_view sweep_name(SweepVariable v) {
    switch (v) {
        case SweepVariable::M: return "M";
        case SweepVariable::FCommon: return "f_common";
        case SweepVariable::LCommon: return "l_common";
    }
    return "?";
}

struct Sweep {
    SweepVariable variable = SweepVariable::M;
    std::vector<double> values;
};

struct RelaySpec {
    std::optional<double> f, l;
    double C = 1.0;
    int K = 1;
};

struct ScenarioSpec {
    std::string name;
    std::int64_t horizon = 1;
    std::vector<RelaySpec> relays;
    std::vector<PolicyKind> policies;
    std::vector<std::uint64_t> seeds;
    std::optional<Sweep> sweep;
    WhittleConfig whittle;
    std::string output;
    nlohmann::json source;  // the parsed file, echoed into summaries
    std::vector<Diagnostic> diagnostics;

    std::size_t point_count() const { return sweep ? sweep->values.size() : 1; }
    std::optional<double> point_value(std::size_t i) const {
        if (!sweep) return std::nullopt;
        return sweep->values.at(i);
    }
    SystemConfig system_at(std::size_t i) const;
    SystemConfig base() const { return system_at(0); }
    bool wants(PolicyKind k) const { return std::find(policies.begin(), policies.end(), k) != policies.end(); }
};

inline SystemConfig ScenarioSpec::system_at(std::size_t i) const {
    SystemConfig c;
    c.horizon = horizon;
    c.seed = seeds.empty() ? 0 : seeds.front();
    std::size_t m = relays.size();
    const std::optional<double> v = point_value(i);
    if (sweep && sweep->variable == SweepVariable::M) m = static_cast<std::size_t>(*v);
    for (std::size_t r = 0; r < m; ++r) {
        const RelaySpec& s = relays[r];
        RelayParams p;
        p.f = sweep && sweep->variable == SweepVariable::FCommon ? *v : s.f.value_or(0.0);
        p.l = sweep && sweep->variable == SweepVariable::LCommon ? *v : s.l.value_or(0.0);
        p.C = s.C;
        p.K = s.K;
        c.relays.push_back(p);
    }
    return c;
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void field_error(const std::string& src, const std::string& field, const std::string& msg) {
    throw ConfigError(src + ": field '" + field + "': " + msg);
}

inline double get_real(const std::string& src, const nlohmann::json& j, const std::string& field) {
    if (!j.is_number()) field_error(src, field, "expected a number, got " + std::string(j.type_name()));
    return j.get<double>();
}

inline std::int64_t get_int(const std::string& src, const nlohmann::json& j, const std::string& field) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
        const double d = j.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    field_error(src, field, "expected an integer, got " + j.dump());
}

inline void reject_unknown(const std::string& src, const nlohmann::json& obj, const std::string& where,
                           std::initializer_list<std::string_view> known) {
    for (const auto& [k, _] : obj.items()) {
        bool ok = false;
        for (auto name : known) ok = ok || k == name;
        if (!ok) field_error(src, where.empty() ? k : where + "." + k, "unknown key");
    }
}

inline IndexMode parse_mode(const std::string& src, const nlohmann::json& j) {
    if (!j.is_string()) field_error(src, "whittle.mode", "expected a string");
    const auto s = j.get<std::string>();
    if (s == "iterative") return IndexMode::Iterative;
    if (s == "affine") return IndexMode::AffineSolve;
    if (s == "both") return IndexMode::Both;
    field_error(src, "whittle.mode", "expected iterative, affine or both, got \"" + s + "\"");
}

}  // namespace detail

inline std::string_view mode_name(IndexMode m) {
    switch (m) {
        case IndexMode::Iterative: return "iterative";
        case IndexMode::AffineSolve: return "affine";
        case IndexMode::Both: return "both";
    }
    return "?";
}

// Parses and validates a scenario. `src` only labels error messages.
inline ScenarioSpec parse_config(const std::string& text, const std::string& src = "<config>") {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(src + ": malformed JSON at " + detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) +
                          ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(src + ": top level must be a JSON object");
    detail::reject_unknown(src, j, "",
                           {"name", "T", "buffer", "relays", "policies", "seeds", "sweep", "whittle", "output",
                            "description"});
    for (const char* k : {"name", "T", "buffer", "relays", "policies", "seeds"})
        if (!j.contains(k)) detail::field_error(src, k, "required");

    ScenarioSpec s;
    s.source = j;
    if (!j["name"].is_string() || j["name"].get<std::string>().empty())
        detail::field_error(src, "name", "expected a non-empty string");
    s.name = j["name"].get<std::string>();
    if (j.contains("output") && (!j["output"].is_string() || j["output"].get<std::string>().empty()))
        detail::field_error(src, "output", "expected a non-empty string");
    s.output = j.contains("output") ? j["output"].get<std::string>() : s.name;
    s.horizon = detail::get_int(src, j["T"], "T");
    if (s.horizon < 1) detail::field_error(src, "T", "must be >= 1");

    if (j.contains("sweep")) {
        const json& sw = j["sweep"];
        if (!sw.is_object()) detail::field_error(src, "sweep", "expected an object");
        detail::reject_unknown(src, sw, "sweep", {"variable", "values"});
        if (!sw.contains("variable") || !sw["variable"].is_string())
            detail::field_error(src, "sweep.variable", "expected \"M\", \"f_common\" or \"l_common\"");
        Sweep sweep;
        const auto var = sw["variable"].get<std::string>();
        if (var == "M") sweep.variable = SweepVariable::M;
        else if (var == "f_common") sweep.variable = SweepVariable::FCommon;
        else if (var == "l_common") sweep.variable = SweepVariable::LCommon;
        else detail::field_error(src, "sweep.variable", "expected \"M\", \"f_common\" or \"l_common\", got \"" + var + "\"");
        if (!sw.contains("values") || !sw["values"].is_array() || sw["values"].empty())
            detail::field_error(src, "sweep.values", "expected a non-empty array");
        for (std::size_t i = 0; i < sw["values"].size(); ++i) {
            const std::string field = "sweep.values[" + std::to_string(i) + "]";
            if (sweep.variable == SweepVariable::M) {
                const auto m = detail::get_int(src, sw["values"][i], field);
                if (m < 1) detail::field_error(src, field, "M must be >= 1");
                sweep.values.push_back(static_cast<double>(m));
            } else {
                const double v = detail::get_real(src, sw["values"][i], field);
                if (!(v > 0.0 && v < 1.0)) detail::field_error(src, field, "probability must lie in (0, 1)");
                sweep.values.push_back(v);
            }
        }
        s.sweep = sweep;
    }
    const bool sweep_f = s.sweep && s.sweep->variable == SweepVariable::FCommon;
    const bool sweep_l = s.sweep && s.sweep->variable == SweepVariable::LCommon;

    const json& rel = j["relays"];
    if (!rel.is_array() || rel.empty()) detail::field_error(src, "relays", "expected a non-empty array");
    for (std::size_t i = 0; i < rel.size(); ++i) {
        const std::string at = "relays[" + std::to_string(i) + "]";
        if (!rel[i].is_object()) detail::field_error(src, at, "expected an object");
        detail::reject_unknown(src, rel[i], at, {"f", "l", "C"});
        RelaySpec r;
        for (const char* k : {"f", "l"}) {
            const bool swept = (k[0] == 'f') ? sweep_f : sweep_l;
            const std::string field = at + "." + k;
            if (rel[i].contains(k)) {
                if (swept) detail::field_error(src, field, "conflicts with the " + std::string(k) + "_common sweep");
                (k[0] == 'f' ? r.f : r.l) = detail::get_real(src, rel[i][k], field);
            } else if (!swept) {
                detail::field_error(src, field, "required");
            }
        }
        if (!rel[i].contains("C")) detail::field_error(src, at + ".C", "required");
        r.C = detail::get_real(src, rel[i]["C"], at + ".C");
        s.relays.push_back(r);
    }

    const json& buf = j["buffer"];
    if (buf.is_array()) {
        if (buf.size() != s.relays.size())
            detail::field_error(src, "buffer", "has " + std::to_string(buf.size()) + " entries for " +
                                                   std::to_string(s.relays.size()) + " relays");
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const auto k = detail::get_int(src, buf[i], "buffer[" + std::to_string(i) + "]");
            s.relays[i].K = static_cast<int>(std::clamp<std::int64_t>(k, INT32_MIN, INT32_MAX));
        }
    } else {
        const auto k = detail::get_int(src, buf, "buffer");
        for (auto& r : s.relays) r.K = static_cast<int>(std::clamp<std::int64_t>(k, INT32_MIN, INT32_MAX));
    }

    const json& pol = j["policies"];
    if (!pol.is_array()) detail::field_error(src, "policies", "expected an array");
    if (pol.empty()) throw ConfigError(src + ": no policies requested");
    for (std::size_t i = 0; i < pol.size(); ++i) {
        const std::string field = "policies[" + std::to_string(i) + "]";
        if (!pol[i].is_string()) detail::field_error(src, field, "expected a policy name");
        try {
            const PolicyKind k = parse_policy(pol[i].get<std::string>());
            if (s.wants(k)) detail::field_error(src, field, "duplicate policy");
            s.policies.push_back(k);
        } catch (const ConfigError& e) {
            if (std::string_view(e.what()).starts_with(src)) throw;
            detail::field_error(src, field, e.what());
        }
    }

    const json& seeds = j["seeds"];
    if (!seeds.is_array() || seeds.empty()) detail::field_error(src, "seeds", "expected a non-empty array");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!seeds[i].is_number_unsigned())
            detail::field_error(src, "seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
        s.seeds.push_back(seeds[i].get<std::uint64_t>());
    }

    if (j.contains("whittle")) {
        const json& w = j["whittle"];
        if (!w.is_object()) detail::field_error(src, "whittle", "expected an object");
        detail::reject_unknown(src, w, "whittle", {"beta", "max_iter", "tol_lambda", "dense_prefix", "grid_stride", "mode"});
        if (w.contains("beta")) s.whittle.beta = detail::get_real(src, w["beta"], "whittle.beta");
        if (w.contains("max_iter")) s.whittle.max_iter = detail::get_int(src, w["max_iter"], "whittle.max_iter");
        if (w.contains("tol_lambda")) s.whittle.tol_lambda = detail::get_real(src, w["tol_lambda"], "whittle.tol_lambda");
        if (w.contains("dense_prefix"))
            s.whittle.dense_prefix = static_cast<int>(detail::get_int(src, w["dense_prefix"], "whittle.dense_prefix"));
        if (w.contains("grid_stride") && !w["grid_stride"].is_null())
            s.whittle.grid_stride = static_cast<int>(detail::get_int(src, w["grid_stride"], "whittle.grid_stride"));
        if (w.contains("mode")) s.whittle.mode = detail::parse_mode(src, w["mode"]);
        try {
            check(s.whittle);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(src + ": " + e.what());
        }
    }

    if (s.sweep && s.sweep->variable == SweepVariable::M) {
        for (std::size_t i = 0; i < s.sweep->values.size(); ++i)
            if (s.sweep->values[i] > static_cast<double>(s.relays.size()))
                detail::field_error(src, "sweep.values[" + std::to_string(i) + "]",
                                    "M = " + std::to_string(static_cast<long long>(s.sweep->values[i])) +
                                        " exceeds the " + std::to_string(s.relays.size()) + " relays listed");
    }

    // Type invariants per relay, checked with the swept value filled in.
    for (std::size_t pt = 0; pt < s.point_count(); ++pt) {
        const SystemConfig c = s.system_at(pt);
        for (std::size_t i = 0; i < c.relays.size(); ++i) {
            for (const Diagnostic& d : validate(c.relays[i], "relays[" + std::to_string(i) + "]"))
                if (d.severity == Severity::Error) {
                    std::string field = d.field;
                    if (field.ends_with(".K")) field = "buffer";
                    detail::field_error(src, field, d.message);
                }
        }
        for (const Diagnostic& d : validate(c)) {
            if (d.severity == Severity::Error) detail::field_error(src, d.field, d.message);
            std::string msg = d.message;
            if (s.sweep) msg += " (at " + std::string(sweep_name(s.sweep->variable)) + " = " +
                                format_real(*s.point_value(pt)) + ")";
            s.diagnostics.push_back({d.severity, d.field, msg});
        }
    }
    return s;
}

inline ScenarioSpec load_config(const std::string& path, std::ostream* diag = &std::cerr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    ScenarioSpec s = parse_config(ss.str(), path);
    if (diag)
        for (const auto& d : s.diagnostics) *diag << path << ": warning: " << d.field << ": " << d.message << '\n';
    return s;
}

// ---- index-table cache --------------------------------------------------

inline std::string table_key(const RelayParams& p, const WhittleConfig& cfg) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "f=%.17g;l=%.17g;C=%.17g;K=%d;beta=%.17g;iter=%" PRId64 ";tol=%.17g;mode=%s;dense=%d;stride=%d",
                  p.f, p.l, p.C, p.K, cfg.beta, cfg.max_iter, cfg.tol_lambda, std::string(mode_name(cfg.mode)).c_str(),
                  cfg.dense_prefix, cfg.stride_for(p.K));
    return buf;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

struct TableSet {
    std::map<std::string, IndexTable> by_key;
    std::size_t computed = 0;
    std::size_t loaded = 0;

    std::vector<IndexTable> for_config(const SystemConfig& c, const WhittleConfig& cfg) const {
        std::vector<IndexTable> out;
        for (std::size_t i = 0; i < c.relays.size(); ++i) {
            IndexTable t = by_key.at(table_key(c.relays[i], cfg));
            t.relay_id = static_cast<int>(i);
            out.push_back(std::move(t));
        }
        return out;
    }
};

// One table per distinct relay parameter set over every sweep point. With a
// non-empty cache_dir, tables are read from and written to
// <cache_dir>/<hash>.json; unreadable or mismatched entries are rebuilt.
inline TableSet precompute_tables(const ScenarioSpec& spec, const std::string& cache_dir = {},
                                  unsigned threads = 1, std::ostream* diag = &std::cerr) {
    std::map<std::string, RelayParams> wanted;
    for (std::size_t pt = 0; pt < spec.point_count(); ++pt)
        for (const RelayParams& p : spec.system_at(pt).relays) wanted.emplace(table_key(p, spec.whittle), p);

    namespace fs = std::filesystem;
    if (!cache_dir.empty()) fs::create_directories(cache_dir);
    auto path_for = [&](const std::string& key) {
        return (fs::path(cache_dir) / (hex64(fnv1a64(key)) + ".json")).string();
    };

    TableSet set;
    std::vector<std::pair<std::string, RelayParams>> todo;
    for (const auto& [key, p] : wanted) {
        if (!cache_dir.empty()) {
            const std::string path = path_for(key);
            if (fs::exists(path)) {
                try {
                    IndexTable t = load_table(path);
                    if (!(t.relay == p)) throw TableFormatError("parameters do not match the cache key");
                    set.by_key.emplace(key, std::move(t));
                    ++set.loaded;
                    continue;
                } catch (const std::exception& e) {
                    if (diag) *diag << "warning: discarding cached index table " << path << ": " << e.what() << '\n';
                }
            }
        }
        todo.emplace_back(key, p);
    }

    std::vector<IndexTable> built(todo.size());
    const auto errors = parallel_for(todo.size(), threads, [&](std::size_t i) {
        built[i] = build_table(todo[i].second, spec.whittle);
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (std::size_t i = 0; i < todo.size(); ++i) {
        const std::string& key = todo[i].first;
        if (diag)
            for (const auto& d : built[i].diagnostics) *diag << "warning: index table " << key << ": " << d << '\n';
        if (!cache_dir.empty()) {
            const std::string path = path_for(key);
            const std::string tmp = path + ".tmp";
            save_table(built[i], tmp);
            fs::rename(tmp, path);
        }
        set.by_key.emplace(key, std::move(built[i]));
        ++set.computed;
    }
    return set;
}

// ---- scenario runs ------------------------------------------------------

struct RunOptions {
    std::string out_prefix;  // empty: spec.output
    unsigned threads = 1;
    OnFail on_fail = OnFail::Retry;
    std::string cache_dir;
    std::ostream* diag = &std::cerr;
};

struct ScenarioRow {
    std::optional<double> sweep_value;
    PolicyKind policy = PolicyKind::Random;
    BatchResult batch;
};

struct ScenarioResult {
    std::vector<ScenarioRow> rows;
    std::string csv_path, json_path;
    std::uint64_t config_hash = 0;
};

inline std::uint64_t config_hash(const ScenarioSpec& spec, OnFail on_fail) {
    return fnv1a64(spec.source.dump() + (on_fail == OnFail::Retry ? "|retry" : "|drop"));
}

inline const char* csv_header() {
    return "scenario,sweep_value,policy,seeds_count,avg_cost_mean,avg_cost_stderr,avg_delay_mean,"
           "avg_delay_stderr,throughput_mean,throughput_stderr,delivered_mean,drops_suppressed_mean\n";
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline std::string csv_row(const std::string& scenario, const ScenarioRow& r) {
    const BatchResult& b = r.batch;
    std::string line = csv_field(scenario) + ",";
    if (r.sweep_value) line += format_real(*r.sweep_value);
    line += ",";
    line += policy_name(r.policy);
    line += "," + std::to_string(b.reports.size());
    for (double v : {b.avg_cost.mean, b.avg_cost.stderr_, b.avg_delay.mean, b.avg_delay.stderr_, b.throughput.mean,
                     b.throughput.stderr_, b.delivered.mean, b.drops_suppressed.mean})
        line += "," + format_real(v);
    return line + "\n";
}

inline nlohmann::json metric_json(const MetricSummary& m) {
    return {{"mean", m.mean}, {"stderr", m.stderr_}};
}

inline void write_outputs(const ScenarioSpec& spec, const RunOptions& opt, ScenarioResult& res) {
    const std::string prefix = opt.out_prefix.empty() ? spec.output : opt.out_prefix;
    res.csv_path = prefix + ".csv";
    res.json_path = prefix + ".json";
    const auto parent = std::filesystem::path(prefix).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);

    std::string seeds;
    for (std::size_t i = 0; i < spec.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(spec.seeds[i]);
    const char* on_fail = opt.on_fail == OnFail::Retry ? "retry" : "drop";

    std::string csv = "# scenario: " + spec.name + "\n# config_hash: " + hex64(res.config_hash) +
                      "\n# seeds: " + seeds + "\n# on_fail: " + on_fail + "\n" + csv_header();
    for (const auto& r : res.rows) csv += csv_row(spec.name, r);
    {
        std::ofstream out(res.csv_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + res.csv_path);
        out << csv;
    }

    nlohmann::json summary = {{"scenario", spec.name},      {"config_hash", hex64(res.config_hash)},
                              {"seeds", spec.seeds},        {"on_fail", on_fail},
                              {"config", spec.source},      {"units", {{"cost", "cost units per slot"},
                                                                       {"delay", "slots"},
                                                                       {"throughput", "packets per slot"}}},
                              {"rows", nlohmann::json::array()}};
    for (const auto& r : res.rows) {
        const BatchResult& b = r.batch;
        summary["rows"].push_back({{"sweep_value", r.sweep_value ? nlohmann::json(*r.sweep_value) : nlohmann::json()},
                                   {"policy", policy_name(r.policy)},
                                   {"seeds_count", b.reports.size()},
                                   {"avg_cost", metric_json(b.avg_cost)},
                                   {"avg_delay", metric_json(b.avg_delay)},
                                   {"throughput", metric_json(b.throughput)},
                                   {"delivered", metric_json(b.delivered)},
                                   {"drops_suppressed", metric_json(b.drops_suppressed)}});
    }
    nlohmann::json diags = nlohmann::json::array();
    for (const auto& d : spec.diagnostics) diags.push_back({{"field", d.field}, {"message", d.message}});
    summary["diagnostics"] = diags;
    std::ofstream out(res.json_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + res.json_path);
    out << summary.dump(2) << '\n';
}

// Runs every (sweep point, policy, seed) triple, possibly in parallel, and
// writes <prefix>.csv and <prefix>.json with rows ordered by (point, policy).
// If some runs fail, the rows that did complete are still written before the
// first error is rethrown.
inline ScenarioResult run_scenario(const ScenarioSpec& spec, const RunOptions& opt = {},
                                   const TableSet* tables = nullptr) {
    if (spec.policies.empty()) throw ConfigError("no policies requested");
    TableSet own;
    if (spec.wants(PolicyKind::Whittle) && tables == nullptr) {
        own = precompute_tables(spec, opt.cache_dir, opt.threads, opt.diag);
        tables = &own;
    }

    const std::size_t P = spec.policies.size();
    const std::size_t S = spec.seeds.size();
    const std::size_t N = spec.point_count();

    std::vector<SystemConfig> configs(N);
    std::vector<std::vector<IndexTable>> point_tables(N);
    for (std::size_t pt = 0; pt < N; ++pt) {
        configs[pt] = spec.system_at(pt);
        if (spec.wants(PolicyKind::Whittle)) point_tables[pt] = tables->for_config(configs[pt], spec.whittle);
    }

    SimOptions sim_opt;
    sim_opt.on_fail = opt.on_fail;
    std::vector<SimReport> reports(N * P * S);
    const auto errors = parallel_for(reports.size(), opt.threads, [&](std::size_t task) {
        const std::size_t pt = task / (P * S);
        const std::size_t pol = (task / S) % P;
        const std::size_t sd = task % S;
        SystemConfig c = configs[pt];
        c.policy = spec.policies[pol];
        c.seed = spec.seeds[sd];
        const std::span<const IndexTable> t =
            c.policy == PolicyKind::Whittle ? std::span<const IndexTable>(point_tables[pt]) : std::span<const IndexTable>();
        reports[task] = run(c, RngPlan(c.seed), t, sim_opt);
    });

    ScenarioResult res;
    res.config_hash = config_hash(spec, opt.on_fail);
    std::exception_ptr first;
    for (std::size_t pt = 0; pt < N; ++pt)
        for (std::size_t pol = 0; pol < P; ++pol) {
            const std::size_t base = (pt * P + pol) * S;
            bool ok = true;
            for (std::size_t sd = 0; sd < S; ++sd)
                if (errors[base + sd]) {
                    ok = false;
                    if (!first) first = errors[base + sd];
                }
            if (!ok) continue;
            std::vector<SimReport> batch(reports.begin() + static_cast<std::ptrdiff_t>(base),
                                         reports.begin() + static_cast<std::ptrdiff_t>(base + S));
            res.rows.push_back({spec.point_value(pt), spec.policies[pol], aggregate(spec.seeds, std::move(batch))});
        }
    write_outputs(spec, opt, res);
    if (first) std::rethrow_exception(first);
    return res;
}

}  // namespace relaysel
