#include "mobiprint/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mobiprint::sim {

namespace {

double clamp_abs(double value, double bound) { return std::clamp(value, -bound, bound); }

/// Nearest intersection parameter of ray p + t*d with segment a-b,
/// infinity when they miss.
double ray_segment(const Vec2& p, const Vec2& d, const Vec2& a, const Vec2& b) {
    const Vec2 e = b - a;
    const double denom = d.cross(e);
    if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
    const Vec2 ap = a - p;
    const double t = ap.cross(e) / denom;
    const double s = ap.cross(d) / denom;
    if (t < 0.0 || s < -1e-12 || s > 1.0 + 1e-12) return std::numeric_limits<double>::infinity();
    return t;
}

}  // namespace

void SimConfig::validate() const {
    if (!(dt_sim > 0.0) || !(dt_ctrl > 0.0) || !(t_max > 0.0))
        throw ValidationError("sim: time steps and horizon must be positive");
    const double ratio = dt_ctrl / dt_sim;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
        throw ValidationError("sim: dt_ctrl must be an integer multiple of dt_sim");
    if (!(tau_v > 0.0) || !(tau_omega > 0.0))
        throw ValidationError("sim: actuator time constants must be positive");
    if (!(v_max_plant > 0.0) || !(omega_max > 0.0))
        throw ValidationError("sim: plant limits must be positive");
    if (k_heading < 0.0 || k_lateral < 0.0 || min_speed_for_heading < 0.0)
        throw ValidationError("sim: steering gains must be nonnegative");
    if (!(k_bump >= 0.0) || !(bump_decay_tau > 0.0))
        throw ValidationError("sim: bump channel parameters invalid");
    if (n_beams < 8) throw ValidationError("sim: n_beams must be >= 8");
    if (!(max_range > 0.0)) throw ValidationError("sim: max_range must be positive");
    if (sigma_pos < 0.0 || sigma_heading < 0.0 || sigma_vel < 0.0 || sigma_lidar < 0.0)
        throw ValidationError("sim: noise sigmas must be nonnegative");
    if (!(goal_tolerance > 0.0)) throw ValidationError("sim: goal tolerance must be positive");
}

VelocityCommand command_adapter(const Eigen::Vector2d& accel, const PlantState& plant, double dt,
                                const SimConfig& cfg) {
    const Eigen::Vector2d planar_vel(plant.v * std::cos(plant.heading),
                                     plant.v * std::sin(plant.heading));
    const Eigen::Vector2d target = planar_vel + accel * dt;
    const double speed = target.norm();

    VelocityCommand cmd;
    cmd.v = std::min(speed, cfg.v_max_plant);
    if (speed < cfg.min_speed_for_heading) {
        cmd.omega = 0.0;
    } else {
        const double desired_heading = std::atan2(target.y(), target.x());
        const double err = wrap_angle(desired_heading - plant.heading);
        cmd.omega = clamp_abs(cfg.k_heading * err, cfg.omega_max);
    }
    return cmd;
}

VelocityCommand apply_overrides(VelocityCommand nominal, const coupling::ArbitratedCommand& cmd,
                                const SimConfig& cfg) {
    VelocityCommand out = nominal;
    if (cmd.speed_cap) out.v = std::min(out.v, std::max(*cmd.speed_cap, 0.0));
    if (cmd.yaw_rate) out.omega = *cmd.yaw_rate;
    out.omega = clamp_abs(out.omega + cfg.k_lateral * cmd.lateral_velocity, cfg.omega_max);
    return out;
}

PlantState step_plant(const PlantState& plant, double v_cmd, double omega_cmd,
                      const FactoryMap& map, double dt, const SimConfig& cfg) {
    if (!(dt > 0.0)) throw ValidationError("step_plant requires dt > 0");
    PlantState next = plant;

    const double blend_v = std::min(1.0, dt / cfg.tau_v);
    const double blend_w = std::min(1.0, dt / cfg.tau_omega);
    next.v = clamp_abs(plant.v + (v_cmd - plant.v) * blend_v, cfg.v_max_plant);
    next.omega = clamp_abs(plant.omega + (omega_cmd - plant.omega) * blend_w, cfg.omega_max);

    const double mid_heading = plant.heading + 0.5 * next.omega * dt;
    next.x = plant.x + next.v * std::cos(mid_heading) * dt;
    next.y = plant.y + next.v * std::sin(mid_heading) * dt;
    next.heading = wrap_angle(plant.heading + next.omega * dt);
    next.time = plant.time + dt;

    const Vec2 pos{next.x, next.y};
    int inside = -1;
    for (std::size_t i = 0; i < map.bumps.size(); ++i) {
        if (map.bumps[i].footprint_contains(pos)) {
            inside = static_cast<int>(i);
            break;
        }
    }
    auto amplitude = [&](const Bump& b) { return cfg.k_bump * b.height * std::abs(next.v) / b.width; };
    if (inside >= 0) {
        next.a_z = amplitude(map.bumps[inside]);
    } else if (plant.current_bump >= 0) {
        next.a_z = -amplitude(map.bumps[plant.current_bump]);  // exit edge, downward impulse
    } else {
        next.a_z = plant.a_z * std::exp(-dt / cfg.bump_decay_tau);
        if (std::abs(next.a_z) < 1e-12) next.a_z = 0.0;
    }
    next.current_bump = inside;
    return next;
}

LidarScan raycast_lidar(const Vec2& position, double heading, const FactoryMap& map, int n_beams,
                        double max_range, CountedRng* rng, double sigma) {
    if (n_beams < 8) throw ValidationError("raycast requires n_beams >= 8");
    if (!(max_range > 0.0)) throw ValidationError("raycast requires max_range > 0");

    const Vec2 corners[4] = {{map.bounds.min.x, map.bounds.min.y},
                             {map.bounds.max.x, map.bounds.min.y},
                             {map.bounds.max.x, map.bounds.max.y},
                             {map.bounds.min.x, map.bounds.max.y}};

    LidarScan scan;
    scan.max_range = max_range;
    scan.ranges.resize(n_beams, max_range);
    for (int i = 0; i < n_beams; ++i) {
        const double angle = heading + 2.0 * M_PI * i / n_beams;
        const Vec2 dir{std::cos(angle), std::sin(angle)};
        double best = max_range;
        for (int c = 0; c < 4; ++c)
            best = std::min(best, ray_segment(position, dir, corners[c], corners[(c + 1) % 4]));
        for (const Polytope& obs : map.obstacles) {
            const auto& verts = obs.vertices();
            for (std::size_t v = 0; v < verts.size(); ++v) {
                best = std::min(best,
                                ray_segment(position, dir, verts[v], verts[(v + 1) % verts.size()]));
            }
        }
        if (rng && sigma > 0.0) best += sigma * rng->normal();
        scan.ranges[i] = std::clamp(best, 1e-6, max_range);
    }
    return scan;
}

behavior::ProximityReading distance_processor(const LidarScan& scan, double front_half_angle,
                                              double side_min, double side_max) {
    const int n = static_cast<int>(scan.ranges.size());
    behavior::ProximityReading reading;
    reading.front = scan.max_range;
    reading.left = scan.max_range;
    reading.right = scan.max_range;
    for (int i = 0; i < n; ++i) {
        const double rel = wrap_angle(2.0 * M_PI * i / n);
        const double r = scan.ranges[i];
        if (std::abs(rel) <= front_half_angle) reading.front = std::min(reading.front, r);
        if (rel >= side_min && rel <= side_max) reading.left = std::min(reading.left, r);
        if (rel <= -side_min && rel >= -side_max) reading.right = std::min(reading.right, r);
    }
    return reading;
}

RobotState localize(const PlantState& plant, const SimConfig& cfg, CountedRng& rng) {
    RobotState est;
    est.position = Vec2{plant.x + cfg.sigma_pos * rng.normal(), plant.y + cfg.sigma_pos * rng.normal()};
    est.heading = wrap_angle(plant.heading + cfg.sigma_heading * rng.normal());
    const Vec2 vel{plant.v * std::cos(plant.heading), plant.v * std::sin(plant.heading)};
    est.velocity = Vec2{vel.x + cfg.sigma_vel * rng.normal(), vel.y + cfg.sigma_vel * rng.normal()};
    est.time = plant.time;
    return est;
}

QualityState deposition_update(const QualityState& q, bool extruding, double a_z, double dt,
                               const QualityGains& gains) {
    if (!(dt > 0.0)) throw ValidationError("deposition_update requires dt > 0");
    QualityState next = q;
    next.extruding = extruding;
    if (extruding) {
        const double mag = std::abs(a_z);
        next.e_x += gains.g_x * mag * dt;
        next.e_y += gains.g_y * mag * dt;
        next.e_z += gains.g_z * a_z * dt;
        next.disturbance_integral += mag * dt;
        next.signed_integral += a_z * dt;
    }
    return next;
}

}  // namespace mobiprint::sim
