#include "mobiprint/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace mobiprint::report {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json finite_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

ordered_json scenario_json(const Scenario& sc) {
    ordered_json j;
    j["schema_version"] = 1;
    ordered_json map;
    map["bounds"] = {sc.map.bounds.min.x, sc.map.bounds.min.y, sc.map.bounds.max.x,
                     sc.map.bounds.max.y};
    map["obstacles"] = ordered_json::array();
    for (const Polytope& p : sc.map.obstacles) {
        ordered_json verts = ordered_json::array();
        for (const Vec2& v : p.vertices()) verts.push_back({v.x, v.y});
        map["obstacles"].push_back(verts);
    }
    map["zones"] = ordered_json::array();
    for (const Polytope& p : sc.map.zones) {
        ordered_json verts = ordered_json::array();
        for (const Vec2& v : p.vertices()) verts.push_back({v.x, v.y});
        map["zones"].push_back(verts);
    }
    map["bumps"] = ordered_json::array();
    for (const Bump& b : sc.map.bumps) {
        map["bumps"].push_back({{"center", {b.center.x, b.center.y}},
                                {"half_length", b.half_length},
                                {"width", b.width},
                                {"height", b.height}});
    }
    j["map"] = map;
    j["start"] = {{"position", {sc.start.position.x, sc.start.position.y}},
                  {"heading", sc.start.heading},
                  {"velocity", {sc.start.velocity.x, sc.start.velocity.y}}};
    ordered_json path = ordered_json::array();
    for (const Vec2& w : sc.reference_path) path.push_back({w.x, w.y});
    j["reference_path"] = path;
    j["gcode"] = sc.gcode_path;
    j["mode"] = coupling::to_string(sc.mode);
    j["seed"] = sc.seed;

    const mpc::MpcConfig& m = sc.controller.mpc;
    ordered_json ctl;
    ctl["horizon"] = m.horizon;
    ctl["dt"] = m.dt;
    ctl["q_diag"] = {m.Q(0, 0), m.Q(1, 1), m.Q(2, 2), m.Q(3, 3)};
    ctl["r_diag"] = {m.R(0, 0), m.R(1, 1)};
    ctl["alpha_v"] = m.alpha_v;
    ctl["alpha_u"] = m.alpha_u;
    ctl["v_lim_critical"] = m.v_lim_critical;
    ctl["v_max"] = m.v_max;
    ctl["u_max"] = m.u_max;
    ctl["obstacle_margin"] = m.obstacle_margin;
    ctl["eps"] = m.eps;
    ctl["max_iter"] = m.max_iter;
    ctl["v_cruise"] = sc.controller.v_cruise;
    ctl["critical_layers"] = sc.controller.critical_layers;
    ctl["max_ref_lead"] = sc.controller.max_ref_lead;
    ctl["d_pause"] = sc.controller.d_pause;
    ctl["settle_vibration"] = sc.controller.settle_vibration;
    ctl["settle_time"] = sc.controller.settle_time;
    ctl["v_bump"] = sc.controller.v_bump;
    const behavior::BehaviorThresholds& th = sc.controller.behavior;
    ctl["behavior"] = {{"d_slow", th.d_slow},     {"d_turn", th.d_turn},
                       {"d_side", th.d_side},     {"slow_speed", th.slow_speed},
                       {"turn_rate", th.turn_rate}, {"side_speed", th.side_speed},
                       {"hysteresis", th.hysteresis}};
    j["controller"] = ctl;

    const sim::SimConfig& s = sc.sim;
    ordered_json simj;
    simj["dt_sim"] = s.dt_sim;
    simj["dt_ctrl"] = s.dt_ctrl;
    simj["t_max"] = s.t_max;
    simj["tau_v"] = s.tau_v;
    simj["tau_omega"] = s.tau_omega;
    simj["v_max_plant"] = s.v_max_plant;
    simj["omega_max"] = s.omega_max;
    simj["k_heading"] = s.k_heading;
    simj["k_lateral"] = s.k_lateral;
    simj["min_speed_for_heading"] = s.min_speed_for_heading;
    simj["k_bump"] = s.k_bump;
    simj["bump_decay_tau"] = s.bump_decay_tau;
    simj["n_beams"] = s.n_beams;
    simj["max_range"] = s.max_range;
    simj["sigma_pos"] = s.sigma_pos;
    simj["sigma_heading"] = s.sigma_heading;
    simj["sigma_vel"] = s.sigma_vel;
    simj["sigma_lidar"] = s.sigma_lidar;
    simj["goal_tolerance"] = s.goal_tolerance;
    j["sim"] = simj;

    j["gains"] = {{"g_x", sc.gains.g_x}, {"g_y", sc.gains.g_y}, {"g_z", sc.gains.g_z}};
    j["calibration_id"] = sc.calibration_id;
    return j;
}

ordered_json episode_summary(const sim::EpisodeResult& r) {
    ordered_json j;
    j["mode"] = coupling::to_string(r.mode);
    j["seed"] = r.seed;
    j["nominal_dimensions_mm"] = r.nominal_dimensions;
    j["final_dimensions_mm"] = r.final_dimensions;
    j["deviations_mm"] = r.deviations;
    j["completion_time"] = r.completion_time;
    j["print_duration"] = r.print_duration;
    j["timed_out"] = r.timed_out;
    j["min_obstacle_clearance"] = finite_or_null(r.min_obstacle_clearance);
    j["max_critical_closed_loop_speed"] = r.max_critical_closed_loop_speed;
    j["violations"] = {{"predicted_critical_speed", r.predicted_speed_violations},
                       {"obstacle_halfspace", r.halfspace_violations},
                       {"fallback_engagements", r.fallback_count},
                       {"zones_skipped", r.zones_skipped_count}};
    j["disturbance_integral"] = r.disturbance_integral;
    j["signed_integral"] = r.signed_integral;
    ordered_json pauses;
    pauses["count"] = r.pause_count;
    pauses["duration"] = r.paused_duration;
    pauses["per_segment"] = ordered_json::array();
    for (const coupling::SegmentPauseReport& p : r.pause_reports) {
        pauses["per_segment"].push_back({{"segment", p.segment_index},
                                         {"pauses", p.pause_count},
                                         {"paused_duration", p.paused_duration},
                                         {"open_pause", p.open_pause}});
    }
    j["pause"] = pauses;
    j["sim_ticks"] = r.trajectory.size();
    j["rng_draws"] = r.rng_draws;
    j["calibration_id"] = r.calibration_id;
    j["episode_hash"] = sim::episode_hash(r);
    return j;
}

std::array<double, 3> mean_dims(const std::vector<sim::EpisodeResult>& episodes) {
    std::array<double, 3> mean{};
    if (episodes.empty()) return mean;
    for (const sim::EpisodeResult& r : episodes)
        for (int i = 0; i < 3; ++i) mean[i] += r.final_dimensions[i];
    for (double& v : mean) v /= static_cast<double>(episodes.size());
    return mean;
}

}  // namespace

std::string trajectory_csv(const sim::EpisodeResult& result) {
    std::string out = "t,x,y,heading,v,omega,a_z,mode,side,extruding,critical,clearance_min\n";
    for (const sim::TrajectoryRow& row : result.trajectory) {
        out += fmt(row.t) + ',' + fmt(row.x) + ',' + fmt(row.y) + ',' + fmt(row.heading) + ',' +
               fmt(row.v) + ',' + fmt(row.omega) + ',' + fmt(row.a_z) + ',' +
               behavior::to_string(row.mode) + ',' + behavior::to_string(row.side) + ',' +
               (row.extruding ? "1" : "0") + ',' + (row.critical ? "1" : "0") + ',' +
               fmt(row.clearance_min) + '\n';
    }
    return out;
}

std::string events_jsonl(const sim::EpisodeResult& result) {
    std::string out;
    std::size_t ev = 0;
    auto flush_events = [&](double up_to) {
        while (ev < result.print_events.size() && result.print_events[ev].time <= up_to + 1e-12) {
            const coupling::PrintChannelEvent& e = result.print_events[ev++];
            ordered_json j;
            j["t"] = e.time;
            j["t_print"] = e.print_time;
            j["type"] = "print_channel";
            j["kind"] = coupling::to_string(e.kind);
            j["bump_id"] = e.bump_id;
            if (e.kind == coupling::PrintEventKind::FeedScale) j["feed_factor"] = e.feed_factor;
            out += j.dump() + '\n';
        }
    };
    for (const sim::ControlRecord& rec : result.control_log) {
        ordered_json j;
        j["t"] = rec.t_wall;
        j["t_print"] = rec.t_print;
        j["type"] = "control";
        j["frontal"] = behavior::to_string(rec.frontal);
        j["side"] = behavior::to_string(rec.side);
        j["status"] = qp::to_string(rec.solve_status);
        j["iterations"] = rec.iterations;
        j["fallback"] = rec.fallback;
        j["critical_active"] = rec.critical_active;
        j["in_critical"] = rec.in_critical;
        j["zones_skipped"] = rec.zones_skipped;
        j["max_halfspace_violation"] = rec.max_halfspace_violation;
        j["max_critical_speed"] = rec.max_critical_speed;
        j["speed_cap"] = rec.speed_cap ? json(*rec.speed_cap) : json(nullptr);
        j["printing"] = rec.printing;
        out += j.dump() + '\n';
        flush_events(rec.t_wall);
    }
    flush_events(std::numeric_limits<double>::infinity());
    return out;
}

std::string summary_json(const sim::EpisodeResult& result, const Scenario& scenario) {
    ordered_json j = episode_summary(result);
    j["config"] = scenario_json(scenario);
    return j.dump(2) + '\n';
}

RunReport compare_modes(const Scenario& base, int repeats) {
    if (repeats < 1) throw ValidationError("compare needs repeats >= 1");
    RunReport report;
    report.repeats = repeats;
    for (int i = 0; i < repeats; ++i) {
        Scenario sc = base;
        sc.seed = base.seed + static_cast<std::uint64_t>(i);
        sc.mode = coupling::PrintMotionMode::Continuous;
        report.continuous.push_back(sim::run_episode(sc));
        sc.mode = coupling::PrintMotionMode::PauseResume;
        report.pause_resume.push_back(sim::run_episode(sc));
    }
    report.nominal = report.continuous.front().nominal_dimensions;
    report.mean_dims_a = mean_dims(report.continuous);
    report.mean_dims_b = mean_dims(report.pause_resume);
    for (int i = 0; i < 3; ++i) {
        report.mean_dev_a[i] = report.mean_dims_a[i] - report.nominal[i];
        report.mean_dev_b[i] = report.mean_dims_b[i] - report.nominal[i];
        const double a = std::abs(report.mean_dev_a[i]);
        const double b = std::abs(report.mean_dev_b[i]);
        report.improvement_pct[i] = a > 0.0 ? (a - b) / a * 100.0 : 0.0;
    }
    return report;
}

std::string report_json(const RunReport& report, const Scenario& base) {
    ordered_json j;
    j["repeats"] = report.repeats;
    j["design_target_mm"] = report.nominal;
    j["case_a_avg_mm"] = report.mean_dims_a;
    j["case_b_avg_mm"] = report.mean_dims_b;
    j["deviation_a_mm"] = report.mean_dev_a;
    j["deviation_b_mm"] = report.mean_dev_b;
    j["improvement_pct"] = report.improvement_pct;
    j["episodes"] = {{"continuous", ordered_json::array()}, {"pause_resume", ordered_json::array()}};
    for (const sim::EpisodeResult& r : report.continuous)
        j["episodes"]["continuous"].push_back(episode_summary(r));
    for (const sim::EpisodeResult& r : report.pause_resume)
        j["episodes"]["pause_resume"].push_back(episode_summary(r));
    j["config"] = scenario_json(base);
    return j.dump(2) + '\n';
}

std::string report_table(const RunReport& report) {
    char line[160];
    std::string out;
    auto row = [&](const char* label, const std::array<double, 3>& v, const char* unit) {
        std::snprintf(line, sizeof line, "%-18s %9.3f %9.3f %9.3f  %s\n", label, v[0], v[1], v[2],
                      unit);
        out += line;
    };
    std::snprintf(line, sizeof line, "%-18s %9s %9s %9s\n", "", "X", "Y", "Z");
    out += line;
    row("design target", report.nominal, "mm");
    row("case A avg", report.mean_dims_a, "mm");
    row("case B avg", report.mean_dims_b, "mm");
    row("deviation A", report.mean_dev_a, "mm");
    row("deviation B", report.mean_dev_b, "mm");
    row("improvement", report.improvement_pct, "%");
    return out;
}

std::string calibration_json(const sim::CalibrationResult& calibration) {
    ordered_json j;
    j["g_x"] = calibration.gains.g_x;
    j["g_y"] = calibration.gains.g_y;
    j["g_z"] = calibration.gains.g_z;
    j["mean_deviations_mm"] = calibration.mean_deviations;
    j["disturbance_integral"] = calibration.disturbance_integral;
    j["signed_integral"] = calibration.signed_integral;
    j["source_episode"] = calibration.episode_hash;
    return j.dump(2) + '\n';
}

sim::QualityGains load_calibration(const std::string& path, std::string* calibration_id) {
    std::ifstream in(path);
    if (!in) throw ValidationError("calibration file not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("calibration file is not valid JSON: " + std::string(e.what()));
    }
    sim::QualityGains gains;
    try {
        gains.g_x = j.at("g_x").get<double>();
        gains.g_y = j.at("g_y").get<double>();
        gains.g_z = j.at("g_z").get<double>();
        if (calibration_id) *calibration_id = j.value("source_episode", std::string{});
    } catch (const json::exception& e) {
        throw ParseError("calibration file missing gain fields: " + std::string(e.what()));
    }
    return gains;
}

std::vector<sim::Measurement> load_measurements(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("measurements file not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty measurements file", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "sample,x_mm,y_mm,z_mm")
        throw ParseError("measurements header must be 'sample,x_mm,y_mm,z_mm'", 1);

    std::vector<sim::Measurement> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        sim::Measurement m;
        std::string field;
        if (!std::getline(ss, m.sample, ',')) throw ParseError("missing sample id", line_no);
        for (double* target : {&m.x_mm, &m.y_mm, &m.z_mm}) {
            if (!std::getline(ss, field, ','))
                throw ParseError("measurement row needs 4 fields", line_no);
            try {
                std::size_t used = 0;
                *target = std::stod(field, &used);
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw ParseError("bad measurement value '" + field + "'", line_no);
            }
        }
        if (std::getline(ss, field, ',')) throw ParseError("too many fields", line_no);
        rows.push_back(m);
    }
    if (rows.empty()) throw ValidationError("measurements file has a header but no rows");
    return rows;
}

}  // namespace mobiprint::report
