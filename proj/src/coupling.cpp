#include "mobiprint/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mobiprint::coupling {

namespace {

void apply_cap(std::optional<double>& cap, double value) {
    cap = cap ? std::min(*cap, value) : value;
}

}  // namespace

const char* to_string(PrintMotionMode mode) {
    return mode == PrintMotionMode::Continuous ? "continuous" : "pause_resume";
}

const char* to_string(PrintEventKind kind) {
    switch (kind) {
        case PrintEventKind::PauseExtrusion: return "pause_extrusion";
        case PrintEventKind::ResumeExtrusion: return "resume_extrusion";
        case PrintEventKind::FeedScale: return "feed_scale";
    }
    return "unknown";
}

void CouplingConfig::validate() const {
    if (!(d_pause > 0.0) || !(settle_vibration > 0.0) || !(settle_time > 0.0) ||
        !(v_bump > 0.0) || !(v_lim_critical > 0.0))
        throw ValidationError("coupling config fields must all be positive");
}

CouplingOutput update(const CouplingState& state, const RobotState& robot,
                      const mpc::PlannedTrajectory& plan,
                      const behavior::BehaviorDecision& decision,
                      const std::vector<std::pair<Bump, double>>& bumps_ahead,
                      std::span<const gcode::CriticalInterval> criticals, double t_wall,
                      double t_print, double vibration, double dt, const CouplingConfig& cfg) {
    if (!(dt > 0.0)) throw ValidationError("coupling update requires dt > 0");
    CouplingOutput out;
    out.state = state;

    // Behavior override defeats the MPC input; otherwise the planned
    // acceleration flows through untouched.
    out.command.accel = plan.first_input;
    if (decision.command_override) {
        const behavior::CommandOverride& o = *decision.command_override;
        if (o.speed_cap) apply_cap(out.command.speed_cap, *o.speed_cap);
        if (decision.frontal_mode == behavior::FrontalMode::Turn)
            out.command.yaw_rate = o.yaw_rate;
        out.command.lateral_velocity = o.lateral_velocity;
    }

    double nearest = std::numeric_limits<double>::infinity();
    int nearest_id = -1;
    bool inside = false;
    for (std::size_t i = 0; i < bumps_ahead.size(); ++i) {
        const auto& [bump, dist] = bumps_ahead[i];
        if (dist < 0.0) throw ValidationError("bump distances must be >= 0");
        if (dist < nearest) {
            nearest = dist;
            nearest_id = static_cast<int>(i);
        }
        if (bump.footprint_contains(robot.position)) inside = true;
    }
    const bool near_bump = inside || nearest <= cfg.d_pause;

    if (cfg.mode == PrintMotionMode::Continuous) {
        if (near_bump) apply_cap(out.command.speed_cap, cfg.v_bump);
    } else {
        if (out.state.printing && near_bump) {
            out.state.printing = false;
            out.state.paused_for_bump = nearest_id;
            out.state.settle_timer = 0.0;
            PrintChannelEvent ev;
            ev.time = t_wall;
            ev.print_time = t_print;
            ev.kind = PrintEventKind::PauseExtrusion;
            ev.bump_id = nearest_id;
            out.events.push_back(ev);
        }
        if (out.state.paused_for_bump) {
            apply_cap(out.command.speed_cap, cfg.v_bump);
            // Settling starts only once clear of every bump still ahead:
            // the quiet approach run-up must not count toward the timer.
            if (!near_bump && std::abs(vibration) <= cfg.settle_vibration) {
                out.state.settle_timer += dt;
                // Tolerance absorbs accumulation error so n ticks of dt
                // totalling settle_time trip the threshold on tick n.
                if (out.state.settle_timer >= cfg.settle_time - 1e-9) {
                    out.state.printing = true;
                    out.state.paused_for_bump.reset();
                    out.state.settle_timer = 0.0;
                    PrintChannelEvent ev;
                    ev.time = t_wall;
                    ev.print_time = t_print;
                    ev.kind = PrintEventKind::ResumeExtrusion;
                    out.events.push_back(ev);
                }
            } else {
                out.state.settle_timer = 0.0;
            }
        }
    }

    out.state.in_critical = gcode::in_any_interval(t_print, criticals);
    if (out.state.in_critical) apply_cap(out.command.speed_cap, cfg.v_lim_critical);

    return out;
}

std::vector<SegmentPauseReport> event_log_summary(std::span<const PrintChannelEvent> events,
                                                  const std::vector<gcode::PrintSegment>& segments,
                                                  double episode_end_wall) {
    std::vector<SegmentPauseReport> reports;
    reports.reserve(segments.size());
    for (const gcode::PrintSegment& seg : segments) {
        SegmentPauseReport r;
        r.segment_index = seg.segment_index;
        reports.push_back(r);
    }

    auto report_for = [&](double print_time) -> SegmentPauseReport* {
        if (reports.empty()) return nullptr;
        SegmentPauseReport* chosen = &reports.front();
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (segments[i].start_time <= print_time + 1e-12) chosen = &reports[i];
        }
        return chosen;
    };

    bool open = false;
    double open_wall = 0.0;
    SegmentPauseReport* open_report = nullptr;
    double last_time = -std::numeric_limits<double>::infinity();
    for (const PrintChannelEvent& ev : events) {
        if (ev.time < last_time)
            throw MalformedEventStream("print events out of time order");
        last_time = ev.time;
        if (ev.kind == PrintEventKind::FeedScale) continue;
        if (ev.kind == PrintEventKind::PauseExtrusion) {
            if (open) throw MalformedEventStream("two pause events without a resume");
            open = true;
            open_wall = ev.time;
            open_report = report_for(ev.print_time);
            if (open_report) open_report->pause_count += 1;
        } else {
            if (!open) throw MalformedEventStream("resume event without a matching pause");
            open = false;
            if (open_report) open_report->paused_duration += ev.time - open_wall;
            open_report = nullptr;
        }
    }
    if (open && open_report) {
        open_report->paused_duration += episode_end_wall - open_wall;
        open_report->open_pause = true;
    }
    return reports;
}

}  // namespace mobiprint::coupling
