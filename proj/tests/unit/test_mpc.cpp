#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "mobiprint/gcode.hpp"
#include "mobiprint/mpc.hpp"

using namespace mobiprint;
using namespace mobiprint::mpc;

namespace {

FactoryMap open_floor() {
    FactoryMap map;
    map.bounds = Rect{{0.0, 0.0}, {10.0, 10.0}};
    return map;
}

MpcConfig small_cfg() {
    MpcConfig cfg;
    cfg.horizon = 2;
    cfg.dt = 0.1;
    cfg.u_max = 50.0;  // keep the box inactive for unconstrained checks
    cfg.v_max = 10.0;
    return cfg;
}

// Independent cost evaluator: explicit step-by-step rollout, no condensation.
double rollout_cost(const MpcConfig& cfg, const State4& x0, const std::vector<State4>& ref,
                    const std::vector<bool>& critical, const Input2& prev_input,
                    const Eigen::VectorXd& z) {
    Eigen::Matrix4d A;
    Eigen::Matrix<double, 4, 2> B;
    build_dynamics(cfg.dt, A, B);
    double cost = 0.0;
    State4 x = x0;
    Input2 last = prev_input;
    for (int k = 0; k < cfg.horizon; ++k) {
        const Input2 u = z.segment<2>(2 * k);
        x = A * x + B * u;
        const State4 err = x - ref[k + 1];
        cost += err.dot(cfg.Q * err) + u.dot(cfg.R * u);
        if (critical[k]) {
            cost += cfg.alpha_v * u.squaredNorm();
            const Input2 rate = (u - last) / cfg.dt;
            cost += cfg.alpha_u * rate.squaredNorm();
        }
        last = u;
    }
    return cost;
}

// The cost is exactly quadratic, so central differences recover its
// gradient and Hessian to rounding error; the argmin follows directly.
Eigen::VectorXd quadratic_argmin(const std::function<double(const Eigen::VectorXd&)>& f, int n) {
    const double h = 1e-3;
    Eigen::VectorXd grad(n);
    Eigen::MatrixXd hess(n, n);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    auto unit = [&](int i) { return Eigen::VectorXd::Unit(n, i); };
    for (int i = 0; i < n; ++i) {
        grad(i) = (f(zero + h * unit(i)) - f(zero - h * unit(i))) / (2.0 * h);
        for (int j = 0; j < n; ++j) {
            const double pp = f(h * unit(i) + h * unit(j));
            const double pm = f(h * unit(i) - h * unit(j));
            const double mp = f(-h * unit(i) + h * unit(j));
            const double mm = f(-h * unit(i) - h * unit(j));
            hess(i, j) = (pp - pm - mp + mm) / (4.0 * h * h);
        }
    }
    return hess.ldlt().solve(-grad);
}

}  // namespace

TEST_CASE("zero-order-hold discretization is exact for constant acceleration") {
    Eigen::Matrix4d A;
    Eigen::Matrix<double, 4, 2> B;
    build_dynamics(0.1, A, B);
    const State4 x0(1.0, 2.0, 0.3, -0.4);
    const Input2 u(0.2, 0.5);
    const State4 x1 = A * x0 + B * u;
    // Closed-form double integrator under constant input.
    CHECK(x1(0) == doctest::Approx(1.0 + 0.3 * 0.1 + 0.5 * 0.2 * 0.01).epsilon(1e-15));
    CHECK(x1(1) == doctest::Approx(2.0 - 0.4 * 0.1 + 0.5 * 0.5 * 0.01).epsilon(1e-15));
    CHECK(x1(2) == doctest::Approx(0.3 + 0.2 * 0.1).epsilon(1e-15));
    CHECK(x1(3) == doctest::Approx(-0.4 + 0.5 * 0.1).epsilon(1e-15));
    CHECK_THROWS_AS(build_dynamics(0.0, A, B), ValidationError);
}

TEST_CASE("reference sampling follows arc length at cruise speed") {
    const std::vector<Vec2> line{{0.0, 0.0}, {10.0, 0.0}};
    const auto ref = reference_from_waypoints(line, 1.0, 2.0, 5, 0.5);
    REQUIRE(ref.size() == 6);
    for (int k = 0; k <= 5; ++k) {
        CHECK(ref[k](0) == doctest::Approx(2.0 + 0.5 * k));
        CHECK(ref[k](1) == 0.0);
        CHECK(ref[k](2) == doctest::Approx(1.0));
        CHECK(ref[k](3) == 0.0);
    }

    // Corner: tangent flips from +x to +y at arc length 1.
    const std::vector<Vec2> corner{{0.0, 0.0}, {1.0, 0.0}, {1.0, 2.0}};
    const auto bent = reference_from_waypoints(corner, 1.0, 1.5, 2, 0.5);
    CHECK(bent[0](0) == doctest::Approx(1.0));
    CHECK(bent[0](1) == doctest::Approx(0.5));
    CHECK(bent[0](2) == doctest::Approx(0.0));
    CHECK(bent[0](3) == doctest::Approx(1.0));

    // Past the end: parked at the final waypoint with zero velocity.
    const auto parked = reference_from_waypoints(line, 1.0, 100.0, 3, 0.5);
    for (const State4& s : parked) {
        CHECK(s(0) == doctest::Approx(10.0));
        CHECK(s.tail<2>().norm() == 0.0);
    }

    // Before the start: clamped to the first waypoint.
    const auto early = reference_from_waypoints(line, 1.0, -5.0, 2, 0.5);
    CHECK(early[0](0) == doctest::Approx(0.0));

    CHECK_THROWS_AS(reference_from_waypoints({{0.0, 0.0}}, 1.0, 0.0, 2, 0.5), ValidationError);
    CHECK_THROWS_AS(reference_from_waypoints(line, 0.0, 0.0, 2, 0.5), ValidationError);
}

TEST_CASE("condensed QP minimizes the stated tracking cost") {
    const MpcConfig cfg = small_cfg();
    const State4 x0(0.0, 0.0, 0.05, -0.02);
    const auto ref = reference_from_waypoints({{0.0, 0.0}, {5.0, 0.0}}, 0.1, 0.0, cfg.horizon, cfg.dt);
    const std::vector<bool> mask(cfg.horizon, false);
    const Input2 prev(0.0, 0.0);

    const auto problem = build_mpc_qp(x0, ref, {}, mask, {}, cfg, prev);
    CHECK(problem.n() == 2 * cfg.horizon);
    problem.validate(true);
    const auto sol = qp::solve_qp(problem, 1e-10, 1e-10, 20000);
    REQUIRE(sol.status == qp::SolveStatus::Solved);

    const Eigen::VectorXd expected = quadratic_argmin(
        [&](const Eigen::VectorXd& z) { return rollout_cost(cfg, x0, ref, mask, prev, z); },
        2 * cfg.horizon);
    CHECK((sol.x - expected).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("critical steps add vibration and input-rate penalties") {
    MpcConfig cfg = small_cfg();
    cfg.alpha_v = 2.5;
    cfg.alpha_u = 0.8;
    cfg.v_lim_critical = 9.0;  // keep the speed rows inactive: this probes the cost only
    const State4 x0(1.0, 1.0, 0.03, 0.0);
    const auto ref = reference_from_waypoints({{1.0, 1.0}, {4.0, 1.0}}, 0.05, 0.0, cfg.horizon, cfg.dt);
    const Input2 prev(0.3, -0.1);

    for (const std::vector<bool> mask :
         {std::vector<bool>{true, true}, std::vector<bool>{false, true}}) {
        const auto problem = build_mpc_qp(x0, ref, {}, mask, {}, cfg, prev);
        const auto sol = qp::solve_qp(problem, 1e-10, 1e-10, 20000);
        REQUIRE(sol.status == qp::SolveStatus::Solved);
        const Eigen::VectorXd expected = quadratic_argmin(
            [&](const Eigen::VectorXd& z) { return rollout_cost(cfg, x0, ref, mask, prev, z); },
            2 * cfg.horizon);
        CHECK((sol.x - expected).lpNorm<Eigen::Infinity>() < 1e-6);
    }
}

TEST_CASE("planner tracks a straight reference and reports a consistent plan") {
    MpcConfig cfg;  // stock horizon 20
    MpcController planner(cfg);
    const State4 x0(0.5, 1.0, 0.0, 0.0);
    const auto ref =
        reference_from_waypoints({{0.5, 1.0}, {5.0, 1.0}}, 0.1, 0.0, cfg.horizon, cfg.dt);
    const auto plan = planner.solve(x0, ref, open_floor(), 0.0, {}, Input2::Zero());

    CHECK(plan.solve_status == qp::SolveStatus::Solved);
    CHECK(!plan.fallback);
    CHECK(!plan.critical_active);
    REQUIRE(plan.states.size() == static_cast<std::size_t>(cfg.horizon) + 1);
    REQUIRE(plan.inputs.size() == static_cast<std::size_t>(cfg.horizon));
    CHECK((plan.states[0] - x0).norm() == 0.0);
    CHECK(plan.first_input(0) > 0.0);  // accelerates along +x toward the path
    CHECK(plan.reconstruction_residual < 1e-9);
    CHECK(plan.max_halfspace_violation == 0.0);  // no obstacles, no rows
    // The plan makes forward progress.
    CHECK(plan.states.back()(0) > x0(0) + 0.05);
}

TEST_CASE("critical windows cap predicted speed at the slow limit") {
    MpcConfig cfg;
    MpcController planner(cfg);
    // Cruise at full speed; the window opens 0.4 s ahead, leaving room to brake.
    const State4 x0(1.0, 1.0, 0.12, 0.0);
    const auto ref =
        reference_from_waypoints({{1.0, 1.0}, {6.0, 1.0}}, 0.12, 0.0, cfg.horizon, cfg.dt);
    const gcode::CriticalInterval window{0.4, 10.0, gcode::CriticalReason::FirstLayers, 0};
    const auto plan =
        planner.solve(x0, ref, open_floor(), 0.0, std::span(&window, 1), Input2::Zero());

    REQUIRE(plan.solve_status == qp::SolveStatus::Solved);
    CHECK(plan.critical_active);
    const double cap = cfg.v_lim_critical * (1.0 + 1e-4);
    CHECK(plan.max_critical_speed <= cap);
    for (int k = 1; k <= cfg.horizon; ++k) {
        if (gcode::in_any_interval(k * cfg.dt, std::span(&window, 1)))
            CHECK(plan.states[k].tail<2>().norm() <= cap);
    }
    // Outside the window the plan may run faster than the critical limit.
    CHECK(plan.states[1].tail<2>().norm() > cfg.v_lim_critical);
}

TEST_CASE("obstacle halfspaces keep the plan on the reference side") {
    MpcConfig cfg;
    FactoryMap map = open_floor();
    map.obstacles.push_back(Polytope::from_vertices(
        {{2.0, 0.0}, {3.0, 0.0}, {3.0, 0.95}, {2.0, 0.95}}, RegionLabel::Obstacle));
    MpcController planner(cfg);

    const State4 x0(1.2, 1.2, 0.1, 0.0);
    const auto ref =
        reference_from_waypoints({{1.2, 1.2}, {5.0, 1.2}}, 0.1, 0.0, cfg.horizon, cfg.dt);
    const auto plan = planner.solve(x0, ref, map, 0.0, {}, Input2::Zero());
    REQUIRE(plan.solve_status == qp::SolveStatus::Solved);
    CHECK(plan.max_halfspace_violation <= 1e-6);
    for (int k = 1; k <= cfg.horizon; ++k) {
        const Vec2 p{plan.states[k](0), plan.states[k](1)};
        const Vec2 r{ref[k](0), ref[k](1)};
        const Halfspace hs = separating_halfspace(map.obstacles[0], r, cfg.obstacle_margin);
        CHECK(hs.residual(p) <= 1e-6);
    }
}

TEST_CASE("a reference sample inside an inflated obstacle is rejected") {
    MpcConfig cfg;
    FactoryMap map = open_floor();
    map.obstacles.push_back(Polytope::from_vertices(
        {{2.0, 0.5}, {3.0, 0.5}, {3.0, 1.5}, {2.0, 1.5}}, RegionLabel::Obstacle));
    MpcController planner(cfg);
    const State4 x0(1.0, 1.0, 0.1, 0.0);
    // The straight path cuts through the box.
    const auto through =
        reference_from_waypoints({{1.0, 1.0}, {5.0, 1.0}}, 0.12, 8.0, cfg.horizon, cfg.dt);
    CHECK_THROWS_AS(planner.solve(x0, through, map, 0.0, {}, Input2::Zero()),
                    ReferenceInsideObstacle);

    // Within the margin band counts as inside too.
    const auto grazing = reference_from_waypoints({{1.0, 1.55}, {5.0, 1.55}}, 0.12, 10.0,
                                                  cfg.horizon, cfg.dt);
    CHECK_THROWS_AS(planner.solve(x0, grazing, map, 0.0, {}, Input2::Zero()),
                    ReferenceInsideObstacle);
}

TEST_CASE("zone rows apply on critical steps and drop when the path enters") {
    MpcConfig cfg;
    FactoryMap map = open_floor();
    map.zones.push_back(Polytope::from_vertices(
        {{2.0, 0.5}, {3.0, 0.5}, {3.0, 1.5}, {2.0, 1.5}}, RegionLabel::RestrictedZone));
    MpcController planner(cfg);
    const State4 x0(2.4, 1.0, 0.05, 0.0);
    const auto ref =
        reference_from_waypoints({{2.4, 1.0}, {5.0, 1.0}}, 0.05, 0.0, cfg.horizon, cfg.dt);

    // Not critical: the zone is ignored entirely.
    const auto free = planner.solve(x0, ref, map, 0.0, {}, Input2::Zero());
    CHECK(free.solve_status == qp::SolveStatus::Solved);
    CHECK(!free.zones_skipped);

    // Critical with the reference inside the zone: row dropped and flagged.
    const gcode::CriticalInterval window{0.0, 100.0, gcode::CriticalReason::FirstLayers, 0};
    const auto flagged = planner.solve(x0, ref, map, 0.0, std::span(&window, 1), Input2::Zero());
    CHECK(flagged.solve_status == qp::SolveStatus::Solved);
    CHECK(flagged.zones_skipped);

    // Critical with the reference clear of the zone: rows active, no flag.
    const State4 clear(4.0, 1.0, 0.05, 0.0);
    const auto clear_ref =
        reference_from_waypoints({{4.0, 1.0}, {6.0, 1.0}}, 0.05, 0.0, cfg.horizon, cfg.dt);
    const auto active = planner.solve(clear, clear_ref, map, 0.0, std::span(&window, 1),
                                      Input2::Zero());
    CHECK(active.solve_status == qp::SolveStatus::Solved);
    CHECK(!active.zones_skipped);
}

TEST_CASE("infeasible problems fall back to clamped braking") {
    MpcConfig cfg;
    FactoryMap map = open_floor();
    // Reference far on the other side of a wall: its separating halfspace
    // cannot be reached from here within the input box.
    map.obstacles.push_back(Polytope::from_vertices(
        {{1.0, 0.0}, {2.0, 0.0}, {2.0, 3.0}, {1.0, 3.0}}, RegionLabel::Obstacle));
    MpcController planner(cfg);
    const State4 x0(2.6, 1.0, 0.3, -0.2);
    const auto ref =
        reference_from_waypoints({{0.5, 1.0}, {0.5, 2.0}}, 0.05, 0.0, cfg.horizon, cfg.dt);
    const auto plan = planner.solve(x0, ref, map, 0.0, {}, Input2::Zero());

    CHECK(plan.solve_status == qp::SolveStatus::PrimalInfeasible);
    CHECK(plan.fallback);
    CHECK(plan.first_input(0) == doctest::Approx(-cfg.u_max));  // clamp(-0.3/0.1)
    CHECK(plan.first_input(1) == doctest::Approx(cfg.u_max));   // clamp(+0.2/0.1)
    CHECK(plan.states.size() == static_cast<std::size_t>(cfg.horizon) + 1);
    CHECK(plan.reconstruction_residual < 1e-12);
    // Braking bleeds speed monotonically.
    CHECK(plan.states.back().tail<2>().norm() < x0.tail<2>().norm());
}

TEST_CASE("config validation rejects out-of-range settings") {
    MpcConfig ok;
    CHECK_NOTHROW(ok.validate());

    MpcConfig bad = ok;
    bad.horizon = 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = ok;
    bad.v_lim_critical = 0.2;  // above v_max
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = ok;
    bad.R.setZero();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = ok;
    bad.alpha_u = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    std::vector<State4> short_ref(3, State4::Zero());
    CHECK_THROWS_AS(build_mpc_qp(State4::Zero(), short_ref, {}, std::vector<bool>(20, false), {},
                                 ok, Input2::Zero()),
                    ValidationError);
}
