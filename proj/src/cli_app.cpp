#include "mobiprint/cli_app.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mobiprint/episode.hpp"
#include "mobiprint/report.hpp"
#include "mobiprint/scenario.hpp"

namespace mobiprint::cli {

namespace {

struct CommonArgs {
    std::string scenario_path;
    std::vector<std::string> overrides;
    std::string mode;
    std::string seed;
    std::string calibration_path;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("scenario", args.scenario_path, "Scenario YAML file")->required();
    cmd->add_option("--set", args.overrides, "Dotted-path config override, key=value");
    cmd->add_option("--mode", args.mode, "continuous or pause_resume");
    cmd->add_option("--seed", args.seed, "Episode seed");
    cmd->add_option("--calibration", args.calibration_path, "Quality-gain calibration JSON");
}

Scenario load_with_args(const CommonArgs& args) {
    std::vector<std::string> overrides = args.overrides;
    if (!args.mode.empty()) overrides.push_back("mode=" + args.mode);
    if (!args.seed.empty()) overrides.push_back("seed=" + args.seed);
    Scenario sc = load_scenario(args.scenario_path, overrides);
    if (!args.calibration_path.empty())
        sc.gains = report::load_calibration(args.calibration_path, &sc.calibration_id);
    return sc;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

int cmd_run(const CommonArgs& args, const std::string& out_dir) {
    const Scenario sc = load_with_args(args);
    const sim::EpisodeResult result = sim::run_episode(sc);
    const std::filesystem::path dir(out_dir);
    write_file(dir / "trajectory.csv", report::trajectory_csv(result));
    write_file(dir / "events.jsonl", report::events_jsonl(result));
    write_file(dir / "summary.json", report::summary_json(result, sc));
    std::printf("episode %s seed %llu: deviations (%+.3f, %+.3f, %+.3f) mm in %.1f s%s\n",
                coupling::to_string(result.mode), static_cast<unsigned long long>(result.seed),
                result.deviations[0], result.deviations[1], result.deviations[2],
                result.completion_time, result.timed_out ? " [TIMEOUT]" : "");
    return result.timed_out ? 4 : 0;
}

int cmd_compare(const CommonArgs& args, int repeats, const std::string& out_dir) {
    const Scenario sc = load_with_args(args);
    const report::RunReport rep = report::compare_modes(sc, repeats);
    const std::filesystem::path dir(out_dir);
    const std::string table = report::report_table(rep);
    write_file(dir / "report.json", report::report_json(rep, sc));
    write_file(dir / "report.txt", table);
    std::fputs(table.c_str(), stdout);
    bool timed_out = false;
    for (const sim::EpisodeResult& r : rep.continuous) timed_out = timed_out || r.timed_out;
    for (const sim::EpisodeResult& r : rep.pause_resume) timed_out = timed_out || r.timed_out;
    return timed_out ? 4 : 0;
}

int cmd_calibrate(const CommonArgs& args, const std::string& measurements_path,
                  const std::string& out_path) {
    const Scenario sc = load_with_args(args);
    const std::vector<sim::Measurement> rows = report::load_measurements(measurements_path);
    const sim::CalibrationResult cal = sim::calibrate_gains(rows, sc);
    write_file(out_path, report::calibration_json(cal));
    std::printf("calibrated on %zu samples: mean deviations (%.4f, %.4f, %.4f) mm -> %s\n",
                rows.size(), cal.mean_deviations[0], cal.mean_deviations[1],
                cal.mean_deviations[2], out_path.c_str());
    return 0;
}

int cmd_validate(const CommonArgs& args) {
    const Scenario sc = load_with_args(args);
    std::printf("ok: %s (%zu obstacles, %zu zones, %zu bumps, mode %s)\n",
                args.scenario_path.c_str(), sc.map.obstacles.size(), sc.map.zones.size(),
                sc.map.bumps.size(), coupling::to_string(sc.mode));
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Coupled navigation-printing control testbed"};
    app.require_subcommand(1);

    CommonArgs run_args;
    std::string run_out = "out";
    CLI::App* run = app.add_subcommand("run", "Run one episode and write its artifacts");
    add_common(run, run_args);
    run->add_option("-o,--out", run_out, "Output directory");

    CommonArgs cmp_args;
    std::string cmp_out = "out";
    int repeats = 1;
    CLI::App* cmp = app.add_subcommand("compare", "Run both modes and report the comparison");
    add_common(cmp, cmp_args);
    cmp->add_option("--repeats", repeats, "Episodes per mode")->check(CLI::PositiveNumber);
    cmp->add_option("-o,--out", cmp_out, "Output directory");

    CommonArgs cal_args;
    std::string measurements;
    std::string cal_out = "calibration.json";
    CLI::App* cal = app.add_subcommand("calibrate", "Fit quality gains from measurements");
    add_common(cal, cal_args);
    cal->add_option("measurements", measurements, "CSV with header sample,x_mm,y_mm,z_mm")
        ->required();
    cal->add_option("-o,--out", cal_out, "Calibration JSON path");

    CommonArgs val_args;
    CLI::App* val = app.add_subcommand("validate", "Load and validate a scenario, then exit");
    add_common(val, val_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_args, run_out);
        if (cmp->parsed()) return cmd_compare(cmp_args, repeats, cmp_out);
        if (cal->parsed()) return cmd_calibrate(cal_args, measurements, cal_out);
        if (val->parsed()) return cmd_validate(val_args);
    } catch (const DegenerateCalibration& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}

}  // namespace mobiprint::cli
