#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mobiprint/coupling.hpp"
#include "mobiprint/gcode.hpp"
#include "mobiprint/scenario.hpp"
#include "mobiprint/sim.hpp"

namespace mobiprint::sim {

/// One trajectory-log line, ground truth, one per sim tick.
struct TrajectoryRow {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double v = 0.0;
    double omega = 0.0;
    double a_z = 0.0;
    behavior::FrontalMode mode = behavior::FrontalMode::Cruise;
    behavior::SideCorrection side = behavior::SideCorrection::None;
    bool extruding = false;
    bool critical = false;
    double clearance_min = 0.0;
};

/// Planner/behavior telemetry, one per control tick.
struct ControlRecord {
    double t_wall = 0.0;
    double t_print = 0.0;
    behavior::FrontalMode frontal = behavior::FrontalMode::Cruise;
    behavior::SideCorrection side = behavior::SideCorrection::None;
    qp::SolveStatus solve_status = qp::SolveStatus::Solved;
    int iterations = 0;
    bool fallback = false;
    bool critical_active = false;
    bool in_critical = false;
    bool zones_skipped = false;
    double max_halfspace_violation = 0.0;
    double max_critical_speed = 0.0;
    double reconstruction_residual = 0.0;
    std::optional<double> speed_cap;
    bool printing = true;
};

struct EpisodeResult {
    coupling::PrintMotionMode mode = coupling::PrintMotionMode::Continuous;
    std::uint64_t seed = 0;

    std::vector<TrajectoryRow> trajectory;
    std::vector<ControlRecord> control_log;
    std::vector<coupling::PrintChannelEvent> print_events;
    std::vector<coupling::SegmentPauseReport> pause_reports;

    std::array<double, 3> nominal_dimensions{};  // mm
    std::array<double, 3> final_dimensions{};    // mm
    std::array<double, 3> deviations{};          // mm

    double completion_time = 0.0;  // wall s at termination
    double print_duration = 0.0;   // print-clock s at termination
    bool timed_out = false;

    double min_obstacle_clearance = std::numeric_limits<double>::infinity();
    double max_critical_closed_loop_speed = 0.0;  // plant speed while in a window
    int predicted_speed_violations = 0;   // solved plans breaching the critical cap
    int halfspace_violations = 0;         // solved plans breaching an obstacle row
    int fallback_count = 0;               // braking fallback engagements
    int zones_skipped_count = 0;

    double disturbance_integral = 0.0;  // integral of |a_z| while extruding
    double signed_integral = 0.0;       // integral of a_z while extruding
    int pause_count = 0;
    double paused_duration = 0.0;  // wall s
    std::uint64_t rng_draws = 0;
    std::string calibration_id;
};

/// Closed-loop run of a validated scenario: localization, LiDAR
/// front-end, behavior FSM, receding-horizon planning against the print
/// clock, arbitration, plant stepping at dt_sim with command hold at
/// dt_ctrl, and the deposition-quality accumulator. Terminates when the
/// print timeline has completed and the base is within goal_tolerance of
/// the final waypoint, or at t_max with the timeout flag set.
EpisodeResult run_episode(const Scenario& scenario);

/// Deterministic fingerprint of an episode (FNV-1a over the trajectory
/// log), used to stamp calibration files with their source run.
std::string episode_hash(const EpisodeResult& result);

struct Measurement {
    std::string sample;
    double x_mm = 0.0;
    double y_mm = 0.0;
    double z_mm = 0.0;
};

struct CalibrationResult {
    QualityGains gains;
    std::array<double, 3> mean_deviations{};  // measured minus nominal, mm
    double disturbance_integral = 0.0;
    double signed_integral = 0.0;
    std::string episode_hash;
};

/// Closed-form fit of the per-axis disturbance gains: one continuous-mode
/// episode supplies the extrusion-gated integrals, the measurement rows
/// supply mean deviations from nominal; g = mean deviation / integral
/// (signed integral for Z). Throws ValidationError on empty measurements
/// or a non-continuous scenario, DegenerateCalibration when an integral
/// is below 1e-9 in magnitude.
CalibrationResult calibrate_gains(const std::vector<Measurement>& measurements,
                                  const Scenario& scenario);

}  // namespace mobiprint::sim
