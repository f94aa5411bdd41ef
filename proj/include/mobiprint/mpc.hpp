#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "mobiprint/gcode.hpp"
#include "mobiprint/qp.hpp"
#include "mobiprint/world.hpp"

namespace mobiprint::mpc {

using State4 = Eigen::Vector4d;    // (px, py, vx, vy)
using Input2 = Eigen::Vector2d;    // (ax, ay)

struct MpcConfig {
    int horizon = 20;   // N
    double dt = 0.1;    // s
    Eigen::Matrix4d Q = (Eigen::Vector4d() << 10.0, 10.0, 1.0, 1.0).finished().asDiagonal();
    Eigen::Matrix2d R = 0.1 * Eigen::Matrix2d::Identity();
    double alpha_v = 1.0;          // vibration penalty on u during critical steps
    double alpha_u = 0.5;          // input-rate penalty during critical steps
    double v_lim_critical = 0.06;  // m/s
    double v_max = 0.12;           // m/s
    double u_max = 0.5;            // m/s^2 per axis
    double obstacle_margin = 0.10; // m
    double eps = 1e-6;             // solver residual tolerance
    int max_iter = 4000;

    void validate() const;
};

struct PlannedTrajectory {
    std::vector<State4> states;   // N+1, states[0] = current
    std::vector<Input2> inputs;   // N
    Input2 first_input = Input2::Zero();
    qp::SolveStatus solve_status = qp::SolveStatus::Solved;
    double solve_time = 0.0;  // s
    int iterations = 0;
    bool critical_active = false;  // any step of the horizon inside a critical window
    bool fallback = false;         // braking fallback engaged (infeasible QP)
    bool zones_skipped = false;    // zone constraint dropped: reference inside a zone

    // Telemetry for constraint audits.
    double max_halfspace_violation = 0.0;  // worst obstacle-constraint residual, m
    double max_critical_speed = 0.0;       // fastest predicted critical-step speed, m/s
    double reconstruction_residual = 0.0;  // dynamics replay mismatch
};

/// Exact zero-order-hold discretization of the double integrator.
void build_dynamics(double dt, Eigen::Matrix4d& A, Eigen::Matrix<double, 4, 2>& B);

/// Condensed input-only QP over u_0..u_{N-1}: tracking + effort cost,
/// critical-step vibration and input-rate penalties, per-step separating
/// halfspaces against obstacles (always) and zones (critical steps),
/// 8-gon speed cap, and the input box.
/// Throws ReferenceInsideObstacle when a reference point lies inside a
/// margin-inflated obstacle. A reference point inside a zone drops that
/// zone's constraint for that step (flagged via zones_skipped telemetry
/// in solve paths; here the row is simply omitted).
qp::QpProblem build_mpc_qp(const State4& current, const std::vector<State4>& reference,
                           const std::vector<Polytope>& obstacles,
                           const std::vector<bool>& critical_mask,
                           const std::vector<Polytope>& zones, const MpcConfig& cfg,
                           const Input2& prev_input, bool* zones_skipped = nullptr);

/// Arc-length parameterized sample of the waypoint polyline at cruise
/// speed: positions at t_now + k*dt, velocity along the local tangent,
/// clamped to rest at the final waypoint.
std::vector<State4> reference_from_waypoints(const std::vector<Vec2>& waypoints, double v_cruise,
                                             double t_now, int horizon, double dt);

/// Receding-horizon planner with persistent solver warm start.
class MpcController {
public:
    explicit MpcController(MpcConfig cfg);

    /// critical_mask[k] = (t_now + k*dt) inside any interval. On an
    /// infeasible QP, emits a braking input (-v/dt clamped to the box)
    /// rolled out without constraints and sets fallback.
    PlannedTrajectory solve(const State4& current, const std::vector<State4>& reference,
                            const FactoryMap& map, double t_now,
                            std::span<const gcode::CriticalInterval> criticals,
                            const Input2& prev_input);

    const MpcConfig& config() const { return cfg_; }
    void reset() { solver_.reset(); }

private:
    MpcConfig cfg_;
    qp::QpSolver solver_;
};

/// One-shot solve without warm-start carryover.
PlannedTrajectory solve_mpc(const State4& current, const std::vector<State4>& reference,
                            const FactoryMap& map, double t_now,
                            std::span<const gcode::CriticalInterval> criticals,
                            const MpcConfig& cfg, const Input2& prev_input);

}  // namespace mobiprint::mpc
