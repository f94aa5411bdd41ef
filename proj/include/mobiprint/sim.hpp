#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mobiprint/behavior.hpp"
#include "mobiprint/coupling.hpp"
#include "mobiprint/rng.hpp"
#include "mobiprint/world.hpp"

namespace mobiprint::sim {

struct SimConfig {
    double dt_sim = 0.02;   // s
    double dt_ctrl = 0.1;   // s, integer multiple of dt_sim
    double t_max = 600.0;   // s

    // Base actuation.
    double tau_v = 0.15;       // s, first-order speed lag
    double tau_omega = 0.15;   // s
    double v_max_plant = 0.3;  // m/s
    double omega_max = 1.5;    // rad/s
    double k_heading = 2.0;    // rad/s per rad of heading error
    double k_lateral = 2.0;    // rad/s per m/s of lateral-shift request
    double min_speed_for_heading = 0.005;  // m/s, below this no spin

    // Bump disturbance channel.
    double k_bump = 40.0;        // 1/s
    double bump_decay_tau = 0.2; // s

    // Sensing.
    int n_beams = 72;
    double max_range = 5.0;              // m
    double sigma_pos = 0.005;            // m
    double sigma_heading = 0.008726646259971648;  // rad (0.5 deg)
    double sigma_vel = 0.002;            // m/s
    double sigma_lidar = 0.0;            // m

    double goal_tolerance = 0.05;  // m

    void validate() const;
};

struct PlantState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double v = 0.0;       // body speed, m/s
    double omega = 0.0;   // yaw rate, rad/s
    double a_z = 0.0;     // vertical disturbance, m/s^2
    double time = 0.0;
    int current_bump = -1;  // bump footprint under the base, -1 when clear
};

struct VelocityCommand {
    double v = 0.0;
    double omega = 0.0;
};

/// Bridge from the planner's planar acceleration to base commands:
/// target velocity = current planar velocity + accel*dt; speed is its
/// norm (clamped), yaw command steers the heading toward it, and near
/// rest the base does not spin.
VelocityCommand command_adapter(const Eigen::Vector2d& accel, const PlantState& plant, double dt,
                                const SimConfig& cfg);

/// Applies arbitration results on top of the adapted command: speed
/// caps clamp v, a Turn override owns the yaw channel, and a lateral
/// shift request becomes a steering bias of k_lateral * v_lat.
VelocityCommand apply_overrides(VelocityCommand nominal, const coupling::ArbitratedCommand& cmd,
                                const SimConfig& cfg);

/// First-order actuator lag on both channels, midpoint unicycle pose
/// integration, and the bump vertical channel: +k_bump*h*|v|/width while
/// the base point is inside a footprint, the opposite sign at the exit
/// edge, exponential decay toward zero elsewhere.
PlantState step_plant(const PlantState& plant, double v_cmd, double omega_cmd,
                      const FactoryMap& map, double dt, const SimConfig& cfg);

struct LidarScan {
    std::vector<double> ranges;  // beam 0 at heading, CCW, meters
    double max_range = 0.0;
};

/// Exact ray-segment intersection against obstacle edges and the map
/// bounds, capped at max_range. Gaussian noise of sigma is added per
/// beam when rng is given (default noise-free).
LidarScan raycast_lidar(const Vec2& position, double heading, const FactoryMap& map, int n_beams,
                        double max_range, CountedRng* rng = nullptr, double sigma = 0.0);

/// Sector minima: front within +-front_half_angle of heading, left and
/// right between side_min and side_max off-axis; empty sectors report
/// max_range.
behavior::ProximityReading distance_processor(const LidarScan& scan,
                                              double front_half_angle = M_PI / 6.0,
                                              double side_min = M_PI / 6.0,
                                              double side_max = M_PI / 2.0);

/// Truth plus zero-mean Gaussian noise from the episode stream, drawn
/// in a fixed order (x, y, heading, vx, vy). Controllers see only this.
RobotState localize(const PlantState& plant, const SimConfig& cfg, CountedRng& rng);

struct QualityGains {
    double g_x = 0.0;  // mm per m/s^2 * s
    double g_y = 0.0;
    double g_z = 0.0;
};

struct QualityState {
    double e_x = 0.0;  // mm, >= 0
    double e_y = 0.0;  // mm, >= 0
    double e_z = 0.0;  // mm, signed
    bool extruding = false;
    double disturbance_integral = 0.0;  // integral of |a_z| while extruding
    double signed_integral = 0.0;       // integral of a_z while extruding
};

/// Accumulates dimensional error only while extruding: X/Y grow with
/// |a_z| (over-extrusion widens), Z integrates the signed disturbance.
QualityState deposition_update(const QualityState& q, bool extruding, double a_z, double dt,
                               const QualityGains& gains);

}  // namespace mobiprint::sim
