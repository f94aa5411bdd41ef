#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"
#include "mobiprint/cli_app.hpp"
#include "mobiprint/episode.hpp"
#include "mobiprint/report.hpp"
#include "mobiprint/scenario.hpp"
#include "support/mini_scenario.hpp"

using namespace mobiprint;
namespace fs = std::filesystem;

namespace {

int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "mobiprint");
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

fs::path sibling_dir(const fs::path& scenario, const std::string& name) {
    return scenario.parent_path() / name;
}

}  // namespace

TEST_CASE("validate accepts a good scenario and rejects a missing one") {
    const auto path = fixtures::write_mini_scenario("cli_validate", false);
    CHECK(invoke({"validate", path.string()}) == 0);
    CHECK(invoke({"validate", (path.parent_path() / "nope.yaml").string()}) == 2);
    CHECK(invoke({"validate", path.string(), "--set", "controller.v_cruise=-1"}) == 2);
    CHECK(invoke({"validate", path.string(), "--set", "garbage"}) == 2);
    CHECK(invoke({"--not-a-flag"}) == 2);
}

TEST_CASE("run writes the three artifacts and echoes overrides") {
    const auto path = fixtures::write_mini_scenario("cli_run", false);
    const fs::path out = sibling_dir(path, "out_run");
    REQUIRE(invoke({"run", path.string(), "-o", out.string(), "--set",
                    "controller.v_cruise=0.1", "--seed", "21"}) == 0);

    const std::string csv = slurp(out / "trajectory.csv");
    CHECK(csv.rfind("t,x,y,heading,v,omega,a_z,mode,side,extruding,critical,clearance_min",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') > 100);
    CHECK(fs::file_size(out / "events.jsonl") > 0);

    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["config"]["controller"]["v_cruise"].get<double>() == doctest::Approx(0.1));
    CHECK(summary["config"]["seed"].get<std::uint64_t>() == 21);
    CHECK(summary["mode"].get<std::string>() == "continuous");
    CHECK(summary["timed_out"].get<bool>() == false);
    CHECK(summary["pause"]["count"].get<int>() == 0);
}

TEST_CASE("a timed-out episode maps to exit code 4") {
    const auto path = fixtures::write_mini_scenario("cli_timeout", false);
    const fs::path out = sibling_dir(path, "out_timeout");
    CHECK(invoke({"run", path.string(), "-o", out.string(), "--set", "sim.t_max=2.0"}) == 4);
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["timed_out"].get<bool>() == true);
}

TEST_CASE("run matches the library path byte for byte") {
    const auto path = fixtures::write_mini_scenario("cli_parity", false);
    const fs::path out = sibling_dir(path, "out_parity");
    REQUIRE(invoke({"run", path.string(), "-o", out.string()}) == 0);

    const Scenario sc = load_scenario(path.string());
    const sim::EpisodeResult result = sim::run_episode(sc);
    CHECK(report::summary_json(result, sc) == slurp(out / "summary.json"));
    CHECK(report::trajectory_csv(result) == slurp(out / "trajectory.csv"));
    CHECK(report::events_jsonl(result) == slurp(out / "events.jsonl"));
}

TEST_CASE("calibrate fits gains a later run can consume") {
    const auto path = fixtures::write_mini_scenario("cli_calibrate", true);
    const fs::path meas = path.parent_path() / "measurements.csv";
    std::ofstream(meas) << "sample,x_mm,y_mm,z_mm\n"
                           "p1,10.05,10.04,2.99\n"
                           "p2,10.07,10.02,2.98\n";
    const fs::path cal_path = path.parent_path() / "calibration.json";
    REQUIRE(invoke({"calibrate", path.string(), meas.string(), "-o", cal_path.string()}) == 0);

    std::string id;
    const sim::QualityGains gains = report::load_calibration(cal_path.string(), &id);
    CHECK(gains.g_x > 0.0);
    CHECK(gains.g_y > 0.0);
    CHECK(gains.g_z < 0.0);
    CHECK(id.size() == 16);

    const fs::path out = sibling_dir(path, "out_calibrated");
    REQUIRE(invoke({"run", path.string(), "-o", out.string(), "--calibration",
                    cal_path.string()}) == 0);
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["calibration_id"].get<std::string>() == id);
    CHECK(summary["deviations_mm"][0].get<double>() > 0.0);
}

TEST_CASE("calibrate maps bad inputs to the documented exit codes") {
    const auto bumpy = fixtures::write_mini_scenario("cli_cal_bad", true);
    const fs::path empty_csv = bumpy.parent_path() / "empty.csv";
    std::ofstream(empty_csv) << "sample,x_mm,y_mm,z_mm\n";
    CHECK(invoke({"calibrate", bumpy.string(), empty_csv.string(), "-o",
                  (bumpy.parent_path() / "c1.json").string()}) == 2);

    const fs::path malformed = bumpy.parent_path() / "malformed.csv";
    std::ofstream(malformed) << "sample,x_mm,y_mm,z_mm\np1,10.0,oops,3.0\n";
    CHECK(invoke({"calibrate", bumpy.string(), malformed.string(), "-o",
                  (bumpy.parent_path() / "c2.json").string()}) == 2);

    // Flat floor: nothing vibrates, the fit is degenerate.
    const auto flat = fixtures::write_mini_scenario("cli_cal_flat", false);
    const fs::path csv = flat.parent_path() / "m.csv";
    std::ofstream(csv) << "sample,x_mm,y_mm,z_mm\np1,10.0,10.0,3.0\n";
    CHECK(invoke({"calibrate", flat.string(), csv.string(), "-o",
                  (flat.parent_path() / "c3.json").string()}) == 5);
}

TEST_CASE("compare writes a paired-mode report") {
    const auto path = fixtures::write_mini_scenario("cli_compare", true);
    const fs::path out = sibling_dir(path, "out_compare");
    REQUIRE(invoke({"compare", path.string(), "--repeats", "1", "-o", out.string()}) == 0);

    const auto rep = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(rep["repeats"].get<int>() == 1);
    CHECK(rep["episodes"]["continuous"].size() == 1);
    CHECK(rep["episodes"]["pause_resume"].size() == 1);
    CHECK(rep["episodes"]["pause_resume"][0]["pause"]["count"].get<int>() == 1);
    CHECK(rep["improvement_pct"].size() == 3);

    const std::string table = slurp(out / "report.txt");
    CHECK(table.find("case A avg") != std::string::npos);
    CHECK(table.find("improvement") != std::string::npos);
}
