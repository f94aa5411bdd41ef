#pragma once

#include <array>
#include <string>
#include <vector>

#include "mobiprint/episode.hpp"
#include "mobiprint/scenario.hpp"

namespace mobiprint::report {

/// `t,x,y,heading,v,omega,a_z,mode,side,extruding,critical,clearance_min`,
/// one row per sim tick.
std::string trajectory_csv(const sim::EpisodeResult& result);

/// JSON-lines event log: control-tick telemetry records interleaved with
/// the print-channel events they emitted, in time order.
std::string events_jsonl(const sim::EpisodeResult& result);

/// Episode summary with the fully resolved scenario configuration echoed
/// under "config". Contains no timestamps and no timing measurements, so
/// byte-identical runs serialize byte-identically.
std::string summary_json(const sim::EpisodeResult& result, const Scenario& scenario);

/// Paired-mode comparison: `repeats` episodes per mode, seeds seed+i,
/// same scenario otherwise.
struct RunReport {
    int repeats = 1;
    std::array<double, 3> nominal{};
    std::vector<sim::EpisodeResult> continuous;
    std::vector<sim::EpisodeResult> pause_resume;
    std::array<double, 3> mean_dims_a{};
    std::array<double, 3> mean_dims_b{};
    std::array<double, 3> mean_dev_a{};
    std::array<double, 3> mean_dev_b{};
    std::array<double, 3> improvement_pct{};  // (|dev_A| - |dev_B|) / |dev_A| * 100
};

RunReport compare_modes(const Scenario& base, int repeats);

std::string report_json(const RunReport& report, const Scenario& base);

/// Plain-text table: design target, per-mode averages, deviations, and
/// per-axis improvement percentages.
std::string report_table(const RunReport& report);

std::string calibration_json(const sim::CalibrationResult& calibration);

/// Reads a calibration file written by calibration_json; calibration_id
/// receives the source episode hash when non-null.
sim::QualityGains load_calibration(const std::string& path, std::string* calibration_id = nullptr);

/// Strict CSV with header `sample,x_mm,y_mm,z_mm`. Throws ParseError on
/// malformed rows, ValidationError when no data rows follow the header.
std::vector<sim::Measurement> load_measurements(const std::string& path);

}  // namespace mobiprint::report
