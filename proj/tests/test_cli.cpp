#include "fluidhit/bounds.hpp"
#include "fluidhit/cli.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fluidhit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string write_temp(const std::string &name, const std::string &text) {
    const auto path = std::filesystem::temp_directory_path() / ("fluidhit_test_" + name);
    std::ofstream(path) << text;
    return path.string();
}

std::vector<std::string> lines(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

} // namespace

TEST_CASE("validate") {
    const auto good = write_temp("good.json", R"({"states": 4, "P": [[1,0,0,0],[1,0,0,0],[0,1,0,0],[0,0,0.5,0.5]]})");
    auto r = cli({"validate", "--chain", good});
    CHECK(r.code == 0);
    CHECK(r.out == "OK: 4 states, absorbing state 0\n");

    const auto bad = write_temp("bad.json", R"({"states": 3, "P": [[1,0,0],[0.5,0.5,0],[0.3,0.3,0.3]]})");
    r = cli({"validate", "--chain", bad});
    CHECK(r.code == 1);
    CHECK(r.out.find("FAIL") == 0);
    CHECK(r.out.find("row 2") != std::string::npos);

    const auto broken = write_temp("broken.json", R"({"states": 2, "P": [[1,0],)");
    CHECK(cli({"validate", "--chain", broken}).code == 2);
    CHECK(cli({"validate", "--chain", "/nonexistent.json"}).code == 2);
}

TEST_CASE("usage errors") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"analyze", "--chain", "classical", "--N", "ten"}).code == 2);
    CHECK(cli({"analyze", "--chain", "classical", "--format", "xml"}).code == 2);
    CHECK(cli({"analyze", "--chain", "tstage:zz"}).code == 2);
    CHECK(cli({"analyze"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("analyze") {
    auto r = cli({"analyze", "--chain", "classical", "--N", "100"});
    REQUIRE(r.code == 0);
    auto doc = json::parse(r.out);
    CHECK_THAT(doc["fluid_crossing_bound"]["value"].get<double>(), WithinAbs(760.517, 1e-3));

    r = cli({"analyze", "--chain", "tstage:3", "--N", "1000"});
    REQUIRE(r.code == 0);
    doc = json::parse(r.out);
    CHECK(doc["quantities"]["nu"] == 1.0);
    CHECK(doc["quantities"]["k"] == 2.0);

    r = cli({"analyze", "--chain", "fig3b:2", "--N", "50"});
    REQUIRE(r.code == 0);
    doc = json::parse(r.out);
    bool found = false;
    for (const auto &[key, entry] : doc.items()) {
        if (entry.is_object() && entry.contains("role") && entry["role"] == "exact") {
            found = true;
            CHECK_THAT(entry["value"].get<double>(), WithinRel(100.0 * harmonic_number(50), 1e-12));
        }
    }
    CHECK(found);

    r = cli({"analyze", "--chain", "tstage:2", "--N", "10000", "--estimate-gamma"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).contains("crossing_time_asymptotic"));

    r = cli({"analyze", "--chain", "tstage:3", "--N", "100", "--k-override", "0", "--nu-override", "1"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["quantities"]["k"] == 0.0);

    r = cli({"analyze", "--chain", "classical", "--N", "100", "--format", "csv"});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out)[0] == "name,role,value,formula");

    // pinned example defaults to its own N
    r = cli({"analyze", "--chain", "fig3a:10,2"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["instance"]["N"] == 10);
}

TEST_CASE("simulate") {
    const std::vector<std::string> args{"simulate", "--chain", "classical", "--N", "50", "--runs", "2000", "--seed", "7"};
    const auto a = cli(args);
    const auto b = cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    const auto doc = json::parse(a.out);
    CHECK(doc["runs"] == 2000);
    CHECK(doc["seed"] == 7);
    CHECK_THAT(doc["exact"].get<double>(), WithinRel(50.0 * harmonic_number(50), 1e-12));
    CHECK(std::abs(doc["mean"].get<double>() - doc["exact"].get<double>()) < 4.0 * doc["stderr"].get<double>());

    const auto one = cli({"simulate", "--chain", "classical", "--N", "5", "--runs", "1"});
    REQUIRE(one.code == 0);
    CHECK(json::parse(one.out)["stderr"].is_null());

    CHECK(cli({"simulate", "--chain", "fig3a:3,2", "--N", "4"}).code == 1);
    CHECK(cli({"simulate", "--chain", "classical", "--N", "0"}).code == 2);

    const auto skip = cli({"simulate", "--chain", "classical", "--N", "10", "--runs", "50", "--no-skip"});
    REQUIRE(skip.code == 0);
    CHECK(json::parse(skip.out)["geometric_skip"] == false);
}

TEST_CASE("compare") {
    auto r = cli({"compare", "--chain", "fig3b:3", "--N-list", "10,100", "--runs", "2000"});
    REQUIRE(r.code == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] ==
          "N,runs,mean,stderr,ci95_low,ci95_high,mean_over_NlnN,fluid_crossing_bound,spectral_leading_terms,"
          "hitting_sum_bound,uniform_hitting_bound,exact,lower_bound,bands_ok");
    CHECK(rows[1].rfind("10,", 0) == 0);
    CHECK(rows[2].substr(rows[2].size() - 4) == "true");

    r = cli({"compare", "--chain", "fig3a:10,2", "--N-list", "10,20", "--runs", "300"});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out).size() == 3);

    CHECK(cli({"compare", "--chain", "classical", "--N-list", "10,x"}).code == 2);
}

TEST_CASE("trajectory and gen") {
    auto r = cli({"trajectory", "--chain", "classical", "--N", "20", "--samples", "2", "--grid", "5:10"});
    REQUIRE(r.code == 0);
    const auto rows = lines(r.out);
    CHECK(rows[0] == "series,t,fraction_absorbed");
    CHECK(rows[1] == "fluid,0,0");
    CHECK(rows.size() == 1 + 4 * 11);
    CHECK(rows[12] == "level,0,0.95");
    CHECK(rows[23].rfind("sim0,0,", 0) == 0);
    CHECK(cli({"trajectory", "--chain", "classical", "--grid", "5"}).code == 2);

    r = cli({"gen", "--chain", "tstage:2"});
    REQUIRE(r.code == 0);
    const auto path = write_temp("gen.json", r.out);
    CHECK(cli({"validate", "--chain", path}).out == "OK: 3 states, absorbing state 0\n");

    const auto out = (std::filesystem::temp_directory_path() / "fluidhit_test_out.json").string();
    CHECK(cli({"gen", "--chain", "fig3b:2", "--out", out}).code == 0);
    CHECK(std::filesystem::exists(out));
    CHECK(cli({"gen", "--chain", path}).code == 2);
}

TEST_CASE("file chains use alpha from the file") {
    const auto path = write_temp("alpha.json", R"({"states": 3, "P": [[1,0,0],[1,0,0],[0,1,0]], "alpha": [0, 1]})");
    const auto r = cli({"analyze", "--chain", path, "--N", "10"});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(r.out);
    CHECK_THAT(doc["quantities"]["alpha_dot_W"].get<double>(), WithinAbs(2.0, 1e-12));
}
