#pragma once

// Versioned JSON persistence for index tables:
//   {"version": 1, "relay": {"f", "l", "C", "K"}, "grid": [int], "lambda": [real]}

#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "relaysel/whittle.hpp"

namespace relaysel {

class TableFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline nlohmann::json table_to_json(const IndexTable& t) {
    return {{"version", 1},
            {"relay", {{"f", t.relay.f}, {"l", t.relay.l}, {"C", t.relay.C}, {"K", t.relay.K}}},
            {"grid", t.grid},
            {"lambda", t.lambda}};
}

inline IndexTable table_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw TableFormatError("index table must be a JSON object");
        if (!j.contains("version") || j.at("version") != 1)
            throw TableFormatError("unsupported index table version " +
                                   (j.contains("version") ? j.at("version").dump() : std::string("<missing>")));
        IndexTable t;
        const auto& r = j.at("relay");
        t.relay = {r.at("f").get<double>(), r.at("l").get<double>(), r.at("C").get<double>(), r.at("K").get<int>()};
        t.grid = j.at("grid").get<std::vector<int>>();
        t.lambda = j.at("lambda").get<std::vector<double>>();
        if (t.grid.size() != t.lambda.size())
            throw TableFormatError("grid has " + std::to_string(t.grid.size()) + " entries but lambda has " +
                                   std::to_string(t.lambda.size()));
        if (t.grid.empty() || t.grid.front() != 0 || t.grid.back() != t.relay.K)
            throw TableFormatError("grid must start at 0 and end at K");
        for (std::size_t i = 1; i < t.grid.size(); ++i)
            if (t.grid[i] <= t.grid[i - 1]) throw TableFormatError("grid must be strictly increasing");
        t.diagnostics = monotonicity_diagnostics(t);
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw TableFormatError(std::string("malformed index table: ") + e.what());
    }
}

inline void save_table(const IndexTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << table_to_json(t).dump(1) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

inline IndexTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw TableFormatError(path + ": " + e.what());
    }
    return table_from_json(j);
}

}  // namespace relaysel
