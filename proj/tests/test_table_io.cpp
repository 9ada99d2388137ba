#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "relaysel/table_io.hpp"

using namespace relaysel;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("relaysel_test_" + name)).string();
}

IndexTable sample() {
    WhittleConfig cfg;
    cfg.dense_prefix = 4;
    cfg.grid_stride = 5;
    return build_table({0.3, 0.6, 2.0, 30}, cfg);
}

}  // namespace

TEST(TableIo, RoundTripIsExact) {
    const IndexTable t = sample();
    const std::string path = temp_path("roundtrip.json");
    save_table(t, path);
    const IndexTable u = load_table(path);
    EXPECT_EQ(u.relay, t.relay);
    EXPECT_EQ(u.grid, t.grid);
    EXPECT_EQ(u.lambda, t.lambda);
    std::filesystem::remove(path);
}

TEST(TableIo, RejectsWrongVersion) {
    auto j = table_to_json(sample());
    j["version"] = 2;
    EXPECT_THROW(table_from_json(j), TableFormatError);
    j.erase("version");
    EXPECT_THROW(table_from_json(j), TableFormatError);
}

TEST(TableIo, RejectsInconsistentGrid) {
    auto j = table_to_json(sample());
    j["lambda"].erase(0);
    EXPECT_THROW(table_from_json(j), TableFormatError);
    j = table_to_json(sample());
    j["grid"][1] = 0;
    EXPECT_THROW(table_from_json(j), TableFormatError);
    j = table_to_json(sample());
    j["relay"]["K"] = 31;
    EXPECT_THROW(table_from_json(j), TableFormatError);
    j = table_to_json(sample());
    j["relay"].erase("f");
    EXPECT_THROW(table_from_json(j), TableFormatError);
}

TEST(TableIo, CorruptFile) {
    const std::string path = temp_path("corrupt.json");
    std::ofstream(path) << "{\"version\": 1, \"relay\": [";
    EXPECT_THROW(load_table(path), TableFormatError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_table(path), std::runtime_error);
}
