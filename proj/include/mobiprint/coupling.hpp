#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mobiprint/behavior.hpp"
#include "mobiprint/gcode.hpp"
#include "mobiprint/mpc.hpp"
#include "mobiprint/world.hpp"

namespace mobiprint::coupling {

enum class PrintMotionMode { Continuous, PauseResume };

const char* to_string(PrintMotionMode mode);

struct CouplingConfig {
    PrintMotionMode mode = PrintMotionMode::Continuous;
    double d_pause = 0.15;          // m before a bump edge
    double settle_vibration = 0.02; // m/s^2
    double settle_time = 1.0;       // s
    double v_bump = 0.06;           // m/s across a bump
    double v_lim_critical = 0.06;   // m/s, arbiter-level critical cap

    void validate() const;
};

enum class PrintEventKind { PauseExtrusion, ResumeExtrusion, FeedScale };

const char* to_string(PrintEventKind kind);

struct PrintChannelEvent {
    double time = 0.0;        // wall clock, s
    double print_time = 0.0;  // print timeline clock at emission, s
    PrintEventKind kind = PrintEventKind::PauseExtrusion;
    int bump_id = -1;
    double feed_factor = 1.0;  // FeedScale payload
};

struct CouplingState {
    bool printing = true;               // extrusion channel enabled
    std::optional<int> paused_for_bump; // set => printing == false
    double settle_timer = 0.0;          // s of continuous quiet since exit
    bool in_critical = false;
};

/// What the command adapter receives after arbitration: the MPC
/// acceleration plus any caps and yaw authority from the overrides.
struct ArbitratedCommand {
    Eigen::Vector2d accel = Eigen::Vector2d::Zero();
    std::optional<double> speed_cap;   // min of behavior/bump/critical caps
    std::optional<double> yaw_rate;    // set when a Turn override owns yaw
    double lateral_velocity = 0.0;     // side-correction request, m/s
};

struct CouplingOutput {
    ArbitratedCommand command;
    std::vector<PrintChannelEvent> events;
    CouplingState state;
};

/// One arbitration step, called once per control tick of length dt.
/// Behavior overrides defeat the MPC input; both print-motion strategies
/// act on the bump list (entries must already be filtered to bumps ahead
/// of or under the robot); the critical-window speed cap applies
/// regardless of mode. t_wall stamps events; t_print indexes the
/// critical intervals (the two clocks diverge while extrusion is paused).
CouplingOutput update(const CouplingState& state, const RobotState& robot,
                      const mpc::PlannedTrajectory& plan,
                      const behavior::BehaviorDecision& decision,
                      const std::vector<std::pair<Bump, double>>& bumps_ahead,
                      std::span<const gcode::CriticalInterval> criticals, double t_wall,
                      double t_print, double vibration, double dt, const CouplingConfig& cfg);

struct SegmentPauseReport {
    int segment_index = 0;
    int pause_count = 0;
    double paused_duration = 0.0;  // wall seconds of halted extrusion
    bool open_pause = false;       // unmatched trailing pause ran to episode end
};

/// Per-segment pause statistics. Throws MalformedEventStream when
/// pause/resume events do not strictly alternate starting with a pause.
std::vector<SegmentPauseReport> event_log_summary(std::span<const PrintChannelEvent> events,
                                                  const std::vector<gcode::PrintSegment>& segments,
                                                  double episode_end_wall);

}  // namespace mobiprint::coupling
