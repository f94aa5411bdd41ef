#include "mobiprint/mpc.hpp"

#include <chrono>
#include <cmath>

namespace mobiprint::mpc {

namespace {

constexpr double kOctagonApothem = 0.92387953251128674;  // cos(pi/8)

struct Condensed {
    Eigen::Matrix4d A;
    Eigen::Matrix<double, 4, 2> B;
    Eigen::MatrixXd Sx;  // 4N x 4
    Eigen::MatrixXd Su;  // 4N x 2N
};

Condensed condense(const MpcConfig& cfg) {
    const int N = cfg.horizon;
    Condensed c;
    build_dynamics(cfg.dt, c.A, c.B);
    c.Sx.resize(4 * N, 4);
    c.Su = Eigen::MatrixXd::Zero(4 * N, 2 * N);

    std::vector<Eigen::Matrix4d> a_pow(N + 1);
    a_pow[0].setIdentity();
    for (int k = 1; k <= N; ++k) a_pow[k] = c.A * a_pow[k - 1];

    for (int k = 1; k <= N; ++k) {
        c.Sx.block<4, 4>(4 * (k - 1), 0) = a_pow[k];
        for (int j = 0; j < k; ++j)
            c.Su.block<4, 2>(4 * (k - 1), 2 * j) = a_pow[k - 1 - j] * c.B;
    }
    return c;
}

struct BuildInfo {
    int obstacle_rows_begin = 0;
    int obstacle_rows_end = 0;
    bool zones_skipped = false;
};

/// Critical flag for predicted state k in 1..N given the input-step mask.
bool state_critical(const std::vector<bool>& mask, int k) {
    const int idx = std::min<std::size_t>(k, mask.size() - 1);
    return mask[idx];
}

qp::QpProblem build_impl(const State4& current, const std::vector<State4>& reference,
                         const std::vector<Polytope>& obstacles,
                         const std::vector<bool>& critical_mask,
                         const std::vector<Polytope>& zones, const MpcConfig& cfg,
                         const Input2& prev_input, const Condensed& c, BuildInfo& info) {
    const int N = cfg.horizon;
    if (static_cast<int>(reference.size()) != N + 1)
        throw ValidationError("mpc: reference must have horizon+1 samples");
    if (static_cast<int>(critical_mask.size()) != N)
        throw ValidationError("mpc: critical mask must have horizon entries");
    if (!current.allFinite()) throw ValidationError("mpc: non-finite current state");

    const int n = 2 * N;

    Eigen::MatrixXd q_bar = Eigen::MatrixXd::Zero(4 * N, 4 * N);
    for (int k = 0; k < N; ++k) q_bar.block<4, 4>(4 * k, 4 * k) = cfg.Q;

    Eigen::VectorXd ref_stack(4 * N);
    for (int k = 1; k <= N; ++k) ref_stack.segment<4>(4 * (k - 1)) = reference[k];

    const Eigen::VectorXd drift = c.Sx * current - ref_stack;

    qp::QpProblem p;
    p.H = 2.0 * (c.Su.transpose() * q_bar * c.Su);
    p.g = 2.0 * (c.Su.transpose() * q_bar * drift);
    for (int k = 0; k < N; ++k) p.H.block<2, 2>(2 * k, 2 * k) += 2.0 * cfg.R;

    const double rate_w = cfg.alpha_u / (cfg.dt * cfg.dt);
    for (int k = 0; k < N; ++k) {
        if (!critical_mask[k]) continue;
        p.H.block<2, 2>(2 * k, 2 * k) += 2.0 * cfg.alpha_v * Eigen::Matrix2d::Identity();
        p.H.block<2, 2>(2 * k, 2 * k) += 2.0 * rate_w * Eigen::Matrix2d::Identity();
        if (k == 0) {
            p.g.segment<2>(0) -= 2.0 * rate_w * prev_input;
        } else {
            p.H.block<2, 2>(2 * (k - 1), 2 * (k - 1)) += 2.0 * rate_w * Eigen::Matrix2d::Identity();
            p.H.block<2, 2>(2 * k, 2 * (k - 1)) -= 2.0 * rate_w * Eigen::Matrix2d::Identity();
            p.H.block<2, 2>(2 * (k - 1), 2 * k) -= 2.0 * rate_w * Eigen::Matrix2d::Identity();
        }
    }
    const Eigen::MatrixXd h_sym = 0.5 * (p.H + p.H.transpose());
    p.H = h_sym;

    // Constraint rows: input box, speed 8-gon per state, obstacle and
    // zone halfspaces at the reference positions.
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> lo, hi;
    const double inf = std::numeric_limits<double>::infinity();
    auto add_row = [&](const Eigen::RowVectorXd& row, double l, double u) {
        rows.push_back(row);
        lo.push_back(l);
        hi.push_back(u);
    };

    for (int k = 0; k < N; ++k) {
        for (int axis = 0; axis < 2; ++axis) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            row(2 * k + axis) = 1.0;
            add_row(row, -cfg.u_max, cfg.u_max);
        }
    }

    for (int k = 1; k <= N; ++k) {
        const bool crit = state_critical(critical_mask, k);
        const double radius = crit ? cfg.v_lim_critical : cfg.v_max;
        const double bound = radius * kOctagonApothem;
        const Eigen::MatrixXd vel_su = c.Su.block(4 * (k - 1) + 2, 0, 2, n);
        const Eigen::Vector2d vel_drift = (c.Sx * current).segment<2>(4 * (k - 1) + 2);
        for (int i = 0; i < 8; ++i) {
            const double theta = M_PI / 8.0 + i * M_PI / 4.0;
            const Eigen::RowVector2d normal(std::cos(theta), std::sin(theta));
            add_row(normal * vel_su, -inf, bound - normal.dot(vel_drift));
        }
    }

    info.obstacle_rows_begin = static_cast<int>(rows.size());
    for (int k = 1; k <= N; ++k) {
        const Vec2 ref_pos{reference[k](0), reference[k](1)};
        const Eigen::MatrixXd pos_su = c.Su.block(4 * (k - 1), 0, 2, n);
        const Eigen::Vector2d pos_drift = (c.Sx * current).segment<2>(4 * (k - 1));
        for (const Polytope& obs : obstacles) {
            if (obs.distance(ref_pos) <= cfg.obstacle_margin + 1e-9)
                throw ReferenceInsideObstacle(
                    "reference sample lies inside a margin-inflated obstacle");
            const Halfspace hs = separating_halfspace(obs, ref_pos, cfg.obstacle_margin);
            const Eigen::RowVector2d normal(hs.normal.x, hs.normal.y);
            add_row(normal * pos_su, -inf, hs.offset - normal.dot(pos_drift));
        }
    }
    info.obstacle_rows_end = static_cast<int>(rows.size());

    for (int k = 1; k <= N; ++k) {
        if (!state_critical(critical_mask, k)) continue;
        const Vec2 ref_pos{reference[k](0), reference[k](1)};
        const Eigen::MatrixXd pos_su = c.Su.block(4 * (k - 1), 0, 2, n);
        const Eigen::Vector2d pos_drift = (c.Sx * current).segment<2>(4 * (k - 1));
        for (const Polytope& zone : zones) {
            if (zone.distance(ref_pos) <= 1e-9) {
                info.zones_skipped = true;
                continue;
            }
            const Halfspace hs = separating_halfspace(zone, ref_pos, 0.0);
            const Eigen::RowVector2d normal(hs.normal.x, hs.normal.y);
            add_row(normal * pos_su, -inf, hs.offset - normal.dot(pos_drift));
        }
    }

    const int m = static_cast<int>(rows.size());
    p.A.resize(m, n);
    p.l.resize(m);
    p.u.resize(m);
    for (int i = 0; i < m; ++i) {
        p.A.row(i) = rows[i];
        p.l(i) = lo[i];
        p.u(i) = hi[i];
    }
    return p;
}

std::vector<State4> rollout(const State4& current, const std::vector<Input2>& inputs,
                            const Eigen::Matrix4d& A, const Eigen::Matrix<double, 4, 2>& B) {
    std::vector<State4> states;
    states.reserve(inputs.size() + 1);
    states.push_back(current);
    for (const Input2& u : inputs) states.push_back(A * states.back() + B * u);
    return states;
}

}  // namespace

void MpcConfig::validate() const {
    if (horizon < 2) throw ValidationError("mpc: horizon must be >= 2");
    if (!(dt > 0.0)) throw ValidationError("mpc: dt must be positive");
    if (alpha_v < 0.0 || alpha_u < 0.0)
        throw ValidationError("mpc: penalty weights must be nonnegative");
    if (!(v_max > 0.0) || !(u_max > 0.0))
        throw ValidationError("mpc: speed and input bounds must be positive");
    if (v_lim_critical > v_max)
        throw ValidationError("mpc: critical speed limit must not exceed v_max");
    if (obstacle_margin < 0.0) throw ValidationError("mpc: obstacle margin must be >= 0");
    if (!(eps > 0.0) || max_iter < 1) throw ValidationError("mpc: bad solver tolerances");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ValidationError("mpc: Q must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eq(Q, Eigen::EigenvaluesOnly);
    if (eq.eigenvalues().minCoeff() < -1e-10)
        throw ValidationError("mpc: Q must be positive semidefinite");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> er(R, Eigen::EigenvaluesOnly);
    if (er.eigenvalues().minCoeff() <= 0.0)
        throw ValidationError("mpc: R must be positive definite");
}

void build_dynamics(double dt, Eigen::Matrix4d& A, Eigen::Matrix<double, 4, 2>& B) {
    if (!(dt > 0.0)) throw ValidationError("mpc: dt must be positive");
    A.setIdentity();
    A(0, 2) = dt;
    A(1, 3) = dt;
    B.setZero();
    B(0, 0) = 0.5 * dt * dt;
    B(1, 1) = 0.5 * dt * dt;
    B(2, 0) = dt;
    B(3, 1) = dt;
}

qp::QpProblem build_mpc_qp(const State4& current, const std::vector<State4>& reference,
                           const std::vector<Polytope>& obstacles,
                           const std::vector<bool>& critical_mask,
                           const std::vector<Polytope>& zones, const MpcConfig& cfg,
                           const Input2& prev_input, bool* zones_skipped) {
    const Condensed c = condense(cfg);
    BuildInfo info;
    qp::QpProblem p =
        build_impl(current, reference, obstacles, critical_mask, zones, cfg, prev_input, c, info);
    if (zones_skipped) *zones_skipped = info.zones_skipped;
    return p;
}

std::vector<State4> reference_from_waypoints(const std::vector<Vec2>& waypoints, double v_cruise,
                                             double t_now, int horizon, double dt) {
    if (waypoints.size() < 2) throw ValidationError("reference path needs at least 2 waypoints");
    if (!(v_cruise > 0.0)) throw ValidationError("cruise speed must be positive");

    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < waypoints.size(); ++i)
        cum.push_back(cum.back() + (waypoints[i] - waypoints[i - 1]).norm());
    const double total = cum.back();

    auto sample = [&](double t) -> State4 {
        State4 s;
        const double arc = v_cruise * std::max(t, 0.0);
        if (arc >= total) {
            s << waypoints.back().x, waypoints.back().y, 0.0, 0.0;
            return s;
        }
        std::size_t seg = 1;
        while (seg < cum.size() - 1 && cum[seg] <= arc) ++seg;
        const Vec2& a = waypoints[seg - 1];
        const Vec2& b = waypoints[seg];
        const double seg_len = cum[seg] - cum[seg - 1];
        const Vec2 tangent = seg_len > 0.0 ? (b - a) / seg_len : Vec2{0.0, 0.0};
        const Vec2 pos = a + tangent * (arc - cum[seg - 1]);
        s << pos.x, pos.y, tangent.x * v_cruise, tangent.y * v_cruise;
        return s;
    };

    std::vector<State4> reference;
    reference.reserve(horizon + 1);
    for (int k = 0; k <= horizon; ++k) reference.push_back(sample(t_now + k * dt));
    return reference;
}

MpcController::MpcController(MpcConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    qp::QpSettings settings;
    settings.eps_primal = cfg_.eps;
    settings.eps_dual = cfg_.eps;
    settings.max_iter = cfg_.max_iter;
    solver_ = qp::QpSolver(settings);
}

PlannedTrajectory MpcController::solve(const State4& current, const std::vector<State4>& reference,
                                       const FactoryMap& map, double t_now,
                                       std::span<const gcode::CriticalInterval> criticals,
                                       const Input2& prev_input) {
    const auto start = std::chrono::steady_clock::now();
    const int N = cfg_.horizon;
    const Condensed c = condense(cfg_);

    std::vector<bool> mask(N);
    bool any_critical = false;
    for (int k = 0; k < N; ++k) {
        mask[k] = gcode::in_any_interval(t_now + k * cfg_.dt, criticals);
        any_critical = any_critical || mask[k];
    }

    BuildInfo info;
    const qp::QpProblem p =
        build_impl(current, reference, map.obstacles, mask, map.zones, cfg_, prev_input, c, info);
    const qp::QpSolution sol = solver_.solve(p);

    PlannedTrajectory plan;
    plan.solve_status = sol.status;
    plan.iterations = sol.iterations;
    plan.critical_active = any_critical;
    plan.zones_skipped = info.zones_skipped;
    plan.inputs.resize(N);

    if (sol.status == qp::SolveStatus::PrimalInfeasible) {
        plan.fallback = true;
        State4 x = current;
        for (int k = 0; k < N; ++k) {
            const Input2 u = (-x.segment<2>(2) / cfg_.dt)
                                 .cwiseMax(-cfg_.u_max)
                                 .cwiseMin(cfg_.u_max);
            plan.inputs[k] = u;
            x = c.A * x + c.B * u;
        }
    } else {
        for (int k = 0; k < N; ++k) plan.inputs[k] = sol.x.segment<2>(2 * k);
        double violation = 0.0;
        for (int i = info.obstacle_rows_begin; i < info.obstacle_rows_end; ++i)
            violation = std::max(violation, p.A.row(i).dot(sol.x) - p.u(i));
        plan.max_halfspace_violation = violation;
    }

    plan.states = rollout(current, plan.inputs, c.A, c.B);
    plan.first_input = plan.inputs.front();

    double residual = 0.0;
    for (int k = 0; k < N; ++k) {
        const State4 expect = c.A * plan.states[k] + c.B * plan.inputs[k];
        residual = std::max(residual, (plan.states[k + 1] - expect).cwiseAbs().maxCoeff());
    }
    plan.reconstruction_residual = residual;

    double crit_speed = 0.0;
    for (int k = 1; k <= N; ++k) {
        if (!state_critical(mask, k)) continue;
        crit_speed = std::max(crit_speed, plan.states[k].segment<2>(2).norm());
    }
    plan.max_critical_speed = crit_speed;

    plan.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return plan;
}

PlannedTrajectory solve_mpc(const State4& current, const std::vector<State4>& reference,
                            const FactoryMap& map, double t_now,
                            std::span<const gcode::CriticalInterval> criticals,
                            const MpcConfig& cfg, const Input2& prev_input) {
    MpcController controller(cfg);
    return controller.solve(current, reference, map, t_now, criticals, prev_input);
}

}  // namespace mobiprint::mpc
