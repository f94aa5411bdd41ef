#include "mobiprint/episode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mobiprint/mpc.hpp"

namespace mobiprint::sim {

namespace {

std::vector<std::pair<Bump, double>> bumps_ahead_of(const FactoryMap& map, const Vec2& position,
                                                    double heading) {
    std::vector<std::pair<Bump, double>> ahead;
    const Vec2 dir{std::cos(heading), std::sin(heading)};
    for (const Bump& bump : map.bumps) {
        if (bump.footprint_contains(position)) {
            ahead.emplace_back(bump, 0.0);
        } else if ((bump.center - position).dot(dir) > 0.0) {
            ahead.emplace_back(bump, bump.footprint_distance(position));
        }
    }
    return ahead;
}

}  // namespace

EpisodeResult run_episode(const Scenario& scenario) {
    scenario.validate();
    const SimConfig& sc = scenario.sim;
    const ControllerConfig& cc = scenario.controller;
    const FactoryMap& map = scenario.map;

    const gcode::GcodeProgram program =
        gcode::load_program(scenario.gcode_path, cc.critical_layers);
    const double print_total = program.total_duration();
    const Vec2 goal = scenario.reference_path.back();

    CountedRng rng(scenario.seed);
    mpc::MpcController planner(cc.mpc);
    behavior::BehaviorFsm fsm;
    coupling::CouplingState cstate;
    const coupling::CouplingConfig ccfg = cc.coupling_config(scenario.mode);
    QualityState quality;

    PlantState plant;
    plant.x = scenario.start.position.x;
    plant.y = scenario.start.position.y;
    plant.heading = scenario.start.heading;
    plant.v = scenario.start.velocity.norm();

    EpisodeResult result;
    result.mode = scenario.mode;
    result.seed = scenario.seed;
    result.nominal_dimensions = program.nominal_dimensions_mm();
    result.calibration_id = scenario.calibration_id;

    const int substeps = static_cast<int>(std::round(sc.dt_ctrl / sc.dt_sim));
    double t_wall = 0.0;
    double t_print = 0.0;
    double t_ref = 0.0;
    mpc::Input2 prev_input = mpc::Input2::Zero();
    behavior::BehaviorDecision decision;

    auto log_row = [&](bool extruding, bool critical) {
        TrajectoryRow row;
        row.t = t_wall;
        row.x = plant.x;
        row.y = plant.y;
        row.heading = plant.heading;
        row.v = plant.v;
        row.omega = plant.omega;
        row.a_z = plant.a_z;
        row.mode = decision.frontal_mode;
        row.side = decision.side_correction;
        row.extruding = extruding;
        row.critical = critical;
        row.clearance_min = map.min_obstacle_clearance(Vec2{plant.x, plant.y});
        result.min_obstacle_clearance = std::min(result.min_obstacle_clearance, row.clearance_min);
        result.trajectory.push_back(row);
    };
    log_row(false, gcode::in_any_interval(t_print, program.criticals));

    bool completed = false;
    while (t_wall < sc.t_max - 1e-9) {
        const RobotState est = localize(plant, sc, rng);
        const LidarScan scan =
            raycast_lidar(Vec2{plant.x, plant.y}, plant.heading, map, sc.n_beams, sc.max_range,
                          sc.sigma_lidar > 0.0 ? &rng : nullptr, sc.sigma_lidar);
        const behavior::ProximityReading reading = distance_processor(scan);
        decision = fsm.step(reading, cc.behavior);

        const std::vector<mpc::State4> reference = mpc::reference_from_waypoints(
            scenario.reference_path, cc.v_cruise, t_ref, cc.mpc.horizon, cc.mpc.dt);
        // Governed reference clock: hold whenever the target runs too far
        // ahead of the estimate (bump slowdowns, pauses, detours), so the
        // halfspaces linearized at the reference stay reachable.
        const Vec2 ref_point{reference.front()(0), reference.front()(1)};
        if ((ref_point - est.position).norm() <= cc.max_ref_lead) t_ref += sc.dt_ctrl;
        const mpc::State4 current(est.position.x, est.position.y, est.velocity.x, est.velocity.y);
        const mpc::PlannedTrajectory plan =
            planner.solve(current, reference, map, t_print, program.criticals, prev_input);

        const auto bumps = bumps_ahead_of(map, est.position, est.heading);
        const coupling::CouplingOutput coupled =
            coupling::update(cstate, est, plan, decision, bumps, program.criticals, t_wall,
                             t_print, plant.a_z, sc.dt_ctrl, ccfg);
        cstate = coupled.state;
        result.print_events.insert(result.print_events.end(), coupled.events.begin(),
                                   coupled.events.end());
        prev_input = plan.first_input;

        ControlRecord rec;
        rec.t_wall = t_wall;
        rec.t_print = t_print;
        rec.frontal = decision.frontal_mode;
        rec.side = decision.side_correction;
        rec.solve_status = plan.solve_status;
        rec.iterations = plan.iterations;
        rec.fallback = plan.fallback;
        rec.critical_active = plan.critical_active;
        rec.in_critical = cstate.in_critical;
        rec.zones_skipped = plan.zones_skipped;
        rec.max_halfspace_violation = plan.max_halfspace_violation;
        rec.max_critical_speed = plan.max_critical_speed;
        rec.reconstruction_residual = plan.reconstruction_residual;
        rec.speed_cap = coupled.command.speed_cap;
        rec.printing = cstate.printing;
        result.control_log.push_back(rec);

        if (plan.fallback) ++result.fallback_count;
        if (plan.zones_skipped) ++result.zones_skipped_count;
        if (plan.solve_status == qp::SolveStatus::Solved) {
            if (plan.critical_active &&
                plan.max_critical_speed > cc.mpc.v_lim_critical * (1.0 + 1e-4))
                ++result.predicted_speed_violations;
            if (plan.max_halfspace_violation > 1e-6) ++result.halfspace_violations;
        }

        const VelocityCommand nominal = command_adapter(coupled.command.accel, plant, sc.dt_ctrl, sc);
        const VelocityCommand cmd = apply_overrides(nominal, coupled.command, sc);

        for (int s = 0; s < substeps; ++s) {
            plant = step_plant(plant, cmd.v, cmd.omega, map, sc.dt_sim, sc);
            t_wall = plant.time;
            const bool extruding = cstate.printing && program.extruding_at(t_print);
            const bool critical = gcode::in_any_interval(t_print, program.criticals);
            quality = deposition_update(quality, extruding, plant.a_z, sc.dt_sim, scenario.gains);
            if (cstate.printing) t_print = std::min(t_print + sc.dt_sim, print_total);
            if (critical)
                result.max_critical_closed_loop_speed =
                    std::max(result.max_critical_closed_loop_speed, std::abs(plant.v));
            log_row(extruding, critical);
        }

        const bool print_done = t_print >= print_total - 1e-9;
        const bool at_goal = (Vec2{plant.x, plant.y} - goal).norm() <= sc.goal_tolerance;
        if (print_done && at_goal) {
            completed = true;
            break;
        }
    }

    result.completion_time = t_wall;
    result.print_duration = t_print;
    result.timed_out = !completed;
    result.disturbance_integral = quality.disturbance_integral;
    result.signed_integral = quality.signed_integral;
    for (int i = 0; i < 3; ++i) {
        const double err = i == 0 ? quality.e_x : i == 1 ? quality.e_y : quality.e_z;
        result.final_dimensions[i] = result.nominal_dimensions[i] + err;
        result.deviations[i] = err;
    }
    result.pause_reports =
        coupling::event_log_summary(result.print_events, program.segments, t_wall);
    for (const coupling::SegmentPauseReport& r : result.pause_reports) {
        result.pause_count += r.pause_count;
        result.paused_duration += r.paused_duration;
    }
    result.rng_draws = rng.draws();
    return result;
}

std::string episode_hash(const EpisodeResult& result) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    auto mix_double = [&](double v) { mix(&v, sizeof v); };
    for (const TrajectoryRow& row : result.trajectory) {
        mix_double(row.t);
        mix_double(row.x);
        mix_double(row.y);
        mix_double(row.heading);
        mix_double(row.v);
        mix_double(row.omega);
        mix_double(row.a_z);
        const int flags = static_cast<int>(row.mode) | static_cast<int>(row.side) << 4 |
                          int(row.extruding) << 8 | int(row.critical) << 9;
        mix(&flags, sizeof flags);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

CalibrationResult calibrate_gains(const std::vector<Measurement>& measurements,
                                  const Scenario& scenario) {
    if (measurements.empty())
        throw ValidationError("calibration needs at least one measurement row");
    if (scenario.mode != coupling::PrintMotionMode::Continuous)
        throw ValidationError("calibration requires a continuous-mode scenario");

    Scenario training = scenario;
    training.gains = QualityGains{};
    const EpisodeResult episode = run_episode(training);

    CalibrationResult out;
    out.disturbance_integral = episode.disturbance_integral;
    out.signed_integral = episode.signed_integral;
    out.episode_hash = episode_hash(episode);

    const std::array<double, 3>& nominal = episode.nominal_dimensions;
    double sum[3] = {0.0, 0.0, 0.0};
    for (const Measurement& m : measurements) {
        sum[0] += m.x_mm - nominal[0];
        sum[1] += m.y_mm - nominal[1];
        sum[2] += m.z_mm - nominal[2];
    }
    const double n = static_cast<double>(measurements.size());
    for (int i = 0; i < 3; ++i) out.mean_deviations[i] = sum[i] / n;

    if (episode.disturbance_integral < 1e-9)
        throw DegenerateCalibration("calibration episode saw no disturbance while extruding");
    if (std::abs(episode.signed_integral) < 1e-9)
        throw DegenerateCalibration("signed disturbance integral too small to identify the Z gain");
    out.gains.g_x = out.mean_deviations[0] / episode.disturbance_integral;
    out.gains.g_y = out.mean_deviations[1] / episode.disturbance_integral;
    out.gains.g_z = out.mean_deviations[2] / episode.signed_integral;
    return out;
}

}  // namespace mobiprint::sim
