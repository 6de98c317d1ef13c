#include <doctest.h>

#include "fedar/io_util.hpp"
#include "fedar/trace_io.hpp"

#include <filesystem>
#include <string>

using namespace fedar;

namespace {

std::filesystem::path tmp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "fedar_trace_io_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::filesystem::path write_trace(const std::string& name, const std::string& body) {
    const auto p = tmp_file(name);
    atomic_write_file(p, body);
    return p;
}

} // namespace

TEST_CASE("load: uniform 1 Hz trace") {
    const auto p = write_trace("uniform.csv", "timestamp,watts\n100,5\n101,6\n102,7\n103,8\n");
    const auto segs = load_trace_csv(p);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].readings == std::vector<double>{5, 6, 7, 8});
    CHECK(segs[0].start_time == 100.0);
    CHECK(segs[0].sample_interval == 1.0);
}

TEST_CASE("load: median gap sets the interval") {
    // gaps 6,6,6,6 -> median 6
    const auto p = write_trace("median.csv", "timestamp,watts\n0,1\n6,2\n12,3\n18,4\n24,5\n");
    const auto segs = load_trace_csv(p);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].sample_interval == 6.0);
}

TEST_CASE("load: wide gap splits the recording") {
    // median gap 1; the 100-second hole exceeds 3x the median
    const auto p = write_trace("split.csv",
                               "timestamp,watts\n0,1\n1,2\n2,3\n102,4\n103,5\n104,6\n");
    const auto segs = load_trace_csv(p);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].readings == std::vector<double>{1, 2, 3});
    CHECK(segs[1].readings == std::vector<double>{4, 5, 6});
    CHECK(segs[1].start_time == 102.0);
}

TEST_CASE("load: gap exactly at 3x median does not split") {
    const auto p = write_trace("edge.csv", "timestamp,watts\n0,1\n1,2\n2,3\n5,4\n6,5\n");
    CHECK(load_trace_csv(p).size() == 1);
}

TEST_CASE("load: single reading defaults the interval") {
    const auto p = write_trace("single.csv", "timestamp,watts\n42,9\n");
    const auto segs = load_trace_csv(p);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].sample_interval == 1.0);
    CHECK(segs[0].start_time == 42.0);
}

TEST_CASE("load: even gap count averages the middle pair") {
    // gaps 1,2,4 -> median of even... 3 gaps is odd; use 4 readings with gaps 1,3 -> median 2
    const auto p = write_trace("even.csv", "timestamp,watts\n0,1\n1,2\n4,3\n");
    const auto segs = load_trace_csv(p);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].sample_interval == 2.0);
}

TEST_CASE("load: rejects malformed input with the right diagnostics") {
    CHECK_THROWS(load_trace_csv(tmp_file("missing.csv")));
    CHECK_THROWS(load_trace_csv(write_trace("badheader.csv", "time,power\n1,2\n")));
    CHECK_THROWS(load_trace_csv(write_trace("badnum.csv", "timestamp,watts\n1,abc\n")));
    CHECK_THROWS(load_trace_csv(write_trace("decreasing.csv", "timestamp,watts\n5,1\n4,2\n")));
    CHECK_THROWS(load_trace_csv(write_trace("duplicate.csv", "timestamp,watts\n5,1\n5,2\n")));
    CHECK_THROWS(load_trace_csv(write_trace("empty.csv", "timestamp,watts\n")));
    CHECK_THROWS(load_trace_csv(write_trace("fields.csv", "timestamp,watts\n1,2,3\n")));
}

TEST_CASE("save/load round-trip") {
    TimeSeries ts;
    ts.readings = {5, 6.25, 200.5, 199.75};
    ts.start_time = 1000;
    ts.sample_interval = 2;
    const auto p = tmp_file("roundtrip.csv");
    save_trace_csv(ts, p);
    const auto segs = load_trace_csv(p);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].readings == ts.readings);
    CHECK(segs[0].start_time == ts.start_time);
    CHECK(segs[0].sample_interval == ts.sample_interval);
}

TEST_CASE("save writes atomically: no temp file left behind") {
    TimeSeries ts;
    ts.readings = {1, 2};
    const auto p = tmp_file("atomic.csv");
    save_trace_csv(ts, p);
    CHECK(std::filesystem::exists(p));
    CHECK_FALSE(std::filesystem::exists(p.string() + ".tmp"));
}
