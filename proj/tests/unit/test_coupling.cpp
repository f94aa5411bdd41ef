#include <doctest.h>

#include <vector>

#include "mobiprint/coupling.hpp"

using namespace mobiprint;
using namespace mobiprint::coupling;

namespace {

RobotState robot_at(double x, double y) {
    RobotState r;
    r.position = {x, y};
    r.velocity = {0.05, 0.0};
    return r;
}

mpc::PlannedTrajectory plan_with(double ax, double ay) {
    mpc::PlannedTrajectory p;
    p.first_input = {ax, ay};
    return p;
}

Bump bump_at(double x) {
    Bump b;
    b.center = {x, 1.0};
    b.half_length = 0.05;
    b.width = 0.6;
    b.height = 0.01;
    return b;
}

CouplingConfig config(PrintMotionMode mode) {
    CouplingConfig cfg;
    cfg.mode = mode;
    return cfg;
}

const behavior::BehaviorDecision kNoOverride{};

}  // namespace

TEST_CASE("planned acceleration flows through when nothing intervenes") {
    const auto out = update(CouplingState{}, robot_at(1.0, 1.0), plan_with(0.2, -0.1),
                            kNoOverride, {}, {}, 5.0, 5.0, 0.0, 0.1,
                            config(PrintMotionMode::Continuous));
    CHECK(out.command.accel.x() == doctest::Approx(0.2));
    CHECK(out.command.accel.y() == doctest::Approx(-0.1));
    CHECK(!out.command.speed_cap.has_value());
    CHECK(!out.command.yaw_rate.has_value());
    CHECK(out.command.lateral_velocity == 0.0);
    CHECK(out.events.empty());
    CHECK(out.state.printing);
}

TEST_CASE("behavior overrides own their channels") {
    behavior::BehaviorDecision turn;
    turn.frontal_mode = behavior::FrontalMode::Turn;
    turn.command_override = behavior::CommandOverride{0.0, 0.5, 0.0};
    auto out = update(CouplingState{}, robot_at(1.0, 1.0), plan_with(0.3, 0.0), turn, {}, {},
                      0.0, 0.0, 0.0, 0.1, config(PrintMotionMode::Continuous));
    CHECK(out.command.speed_cap == doctest::Approx(0.0));
    REQUIRE(out.command.yaw_rate.has_value());
    CHECK(*out.command.yaw_rate == doctest::Approx(0.5));

    behavior::BehaviorDecision drift;
    drift.frontal_mode = behavior::FrontalMode::Cruise;
    drift.side_correction = behavior::SideCorrection::ShiftLeft;
    drift.command_override = behavior::CommandOverride{std::nullopt, 0.0, 0.05};
    out = update(CouplingState{}, robot_at(1.0, 1.0), plan_with(0.3, 0.0), drift, {}, {}, 0.0,
                 0.0, 0.0, 0.1, config(PrintMotionMode::Continuous));
    CHECK(!out.command.speed_cap.has_value());
    CHECK(!out.command.yaw_rate.has_value());  // only Turn owns yaw
    CHECK(out.command.lateral_velocity == doctest::Approx(0.05));

    behavior::BehaviorDecision slow;
    slow.frontal_mode = behavior::FrontalMode::Slow;
    slow.command_override = behavior::CommandOverride{0.06, 0.0, 0.0};
    out = update(CouplingState{}, robot_at(1.0, 1.0), plan_with(0.3, 0.0), slow, {}, {}, 0.0,
                 0.0, 0.0, 0.1, config(PrintMotionMode::Continuous));
    CHECK(out.command.speed_cap == doctest::Approx(0.06));
    CHECK(out.command.accel.x() == doctest::Approx(0.3));  // accel still the plan's
}

TEST_CASE("continuous mode slows over bumps and never pauses") {
    const CouplingConfig cfg = config(PrintMotionMode::Continuous);
    CouplingState st;
    // Approaching: bump edge within d_pause.
    auto out = update(st, robot_at(1.0, 1.0), plan_with(0.1, 0.0), kNoOverride,
                      {{bump_at(1.2), 0.15}}, {}, 1.0, 1.0, 0.0, 0.1, cfg);
    CHECK(out.command.speed_cap == doctest::Approx(cfg.v_bump));
    CHECK(out.state.printing);
    CHECK(out.events.empty());

    // Far away: no cap.
    out = update(st, robot_at(0.2, 1.0), plan_with(0.1, 0.0), kNoOverride,
                 {{bump_at(1.2), 0.95}}, {}, 1.0, 1.0, 0.0, 0.1, cfg);
    CHECK(!out.command.speed_cap.has_value());

    // On top of the bump, vibrating hard: still printing, still just capped.
    out = update(st, robot_at(1.2, 1.0), plan_with(0.1, 0.0), kNoOverride,
                 {{bump_at(1.2), 0.0}}, {}, 1.0, 1.0, 0.45, 0.1, cfg);
    CHECK(out.command.speed_cap == doctest::Approx(cfg.v_bump));
    CHECK(out.state.printing);
    CHECK(out.events.empty());
}

TEST_CASE("pause-resume walks through pause, crossing, settle and resume") {
    const CouplingConfig cfg = config(PrintMotionMode::PauseResume);
    const double dt = 0.1;
    CouplingState st;

    // 1. Approach within d_pause: extrusion pauses once, event stamped with both clocks.
    auto out = update(st, robot_at(1.0, 1.0), plan_with(0.1, 0.0), kNoOverride,
                      {{bump_at(1.2), 0.12}}, {}, 7.5, 6.0, 0.0, dt, cfg);
    REQUIRE(out.events.size() == 1);
    CHECK(out.events[0].kind == PrintEventKind::PauseExtrusion);
    CHECK(out.events[0].time == doctest::Approx(7.5));
    CHECK(out.events[0].print_time == doctest::Approx(6.0));
    CHECK(out.events[0].bump_id == 0);
    CHECK(!out.state.printing);
    CHECK(out.state.paused_for_bump == 0);
    CHECK(out.command.speed_cap == doctest::Approx(cfg.v_bump));
    st = out.state;

    // 1b. A long quiet creep toward the bump must not run out the settle
    //     timer: no resume can fire before the crossing.
    for (int i = 0; i < 30; ++i) {
        const double x = 1.0 + 0.005 * i;  // creeps to 1.145, edge is at 1.15
        out = update(st, robot_at(x, 1.0), plan_with(0.1, 0.0), kNoOverride,
                     {{bump_at(1.2), 1.15 - x}, {bump_at(3.0), 1.9}}, {}, 7.5 + 0.1 * i, 6.0,
                     0.001, dt, cfg);
        CHECK(out.events.empty());
        CHECK(!out.state.printing);
        CHECK(out.state.settle_timer == 0.0);
        st = out.state;
    }

    // 2. Crossing the bump: quiet vibration does not tick the settle timer
    //    while the footprint still holds the robot.
    out = update(st, robot_at(1.2, 1.0), plan_with(0.1, 0.0), kNoOverride,
                 {{bump_at(1.2), 0.0}}, {}, 7.6, 6.0, 0.01, dt, cfg);
    CHECK(out.events.empty());  // no duplicate pause
    CHECK(!out.state.printing);
    CHECK(out.state.settle_timer == 0.0);
    st = out.state;

    // 3. Past the bump but still ringing: timer stays at zero.
    out = update(st, robot_at(1.4, 1.0), plan_with(0.1, 0.0), kNoOverride, {}, {}, 7.7, 6.0,
                 0.30, dt, cfg);
    CHECK(out.state.settle_timer == 0.0);
    st = out.state;

    // 4. Quiet ticks accumulate; a spike mid-way resets the timer.
    for (int i = 0; i < 5; ++i) {
        out = update(st, robot_at(1.5, 1.0), plan_with(0.1, 0.0), kNoOverride, {}, {},
                     7.8 + 0.1 * i, 6.0, 0.005, dt, cfg);
        st = out.state;
    }
    CHECK(st.settle_timer == doctest::Approx(0.5));
    out = update(st, robot_at(1.5, 1.0), plan_with(0.1, 0.0), kNoOverride, {}, {}, 8.3, 6.0,
                 0.25, dt, cfg);
    CHECK(out.state.settle_timer == 0.0);
    st = out.state;

    // 5. A full quiet second finally resumes extrusion.
    std::vector<PrintChannelEvent> resumes;
    for (int i = 0; i < 10; ++i) {
        out = update(st, robot_at(1.6, 1.0), plan_with(0.1, 0.0), kNoOverride, {}, {},
                     8.4 + 0.1 * i, 6.0, 0.001, dt, cfg);
        st = out.state;
        for (const auto& ev : out.events) resumes.push_back(ev);
    }
    REQUIRE(resumes.size() == 1);
    CHECK(resumes[0].kind == PrintEventKind::ResumeExtrusion);
    CHECK(st.printing);
    CHECK(!st.paused_for_bump.has_value());

    // 6. Once resumed and clear, no cap remains.
    out = update(st, robot_at(1.8, 1.0), plan_with(0.1, 0.0), kNoOverride, {}, {}, 9.5, 6.5,
                 0.001, dt, cfg);
    CHECK(!out.command.speed_cap.has_value());
    CHECK(out.state.printing);
}

TEST_CASE("critical windows cap speed in either mode") {
    const gcode::CriticalInterval window{10.0, 20.0, gcode::CriticalReason::LastLayers, 0};
    for (const auto mode : {PrintMotionMode::Continuous, PrintMotionMode::PauseResume}) {
        // t_print inside the window even though t_wall is far past it.
        auto out = update(CouplingState{}, robot_at(1.0, 1.0), plan_with(0.1, 0.0), kNoOverride,
                          {}, std::span(&window, 1), 55.0, 12.0, 0.0, 0.1, config(mode));
        CHECK(out.state.in_critical);
        CHECK(out.command.speed_cap == doctest::Approx(0.06));

        out = update(CouplingState{}, robot_at(1.0, 1.0), plan_with(0.1, 0.0), kNoOverride, {},
                     std::span(&window, 1), 12.0, 25.0, 0.0, 0.1, config(mode));
        CHECK(!out.state.in_critical);
        CHECK(!out.command.speed_cap.has_value());
    }
}

TEST_CASE("caps combine by taking the minimum") {
    behavior::BehaviorDecision slow;
    slow.frontal_mode = behavior::FrontalMode::Slow;
    slow.command_override = behavior::CommandOverride{0.03, 0.0, 0.0};
    const gcode::CriticalInterval window{0.0, 100.0, gcode::CriticalReason::FirstLayers, 0};
    const auto out = update(CouplingState{}, robot_at(1.0, 1.0), plan_with(0.1, 0.0), slow,
                            {{bump_at(1.1), 0.05}}, std::span(&window, 1), 1.0, 1.0, 0.0, 0.1,
                            config(PrintMotionMode::Continuous));
    CHECK(out.command.speed_cap == doctest::Approx(0.03));  // tightest wins
}

TEST_CASE("update validates its inputs") {
    CHECK_THROWS_AS(update(CouplingState{}, robot_at(1, 1), plan_with(0, 0), kNoOverride, {},
                           {}, 0.0, 0.0, 0.0, 0.0, config(PrintMotionMode::Continuous)),
                    ValidationError);
    CHECK_THROWS_AS(update(CouplingState{}, robot_at(1, 1), plan_with(0, 0), kNoOverride,
                           {{bump_at(1.2), -0.01}}, {}, 0.0, 0.0, 0.0, 0.1,
                           config(PrintMotionMode::Continuous)),
                    ValidationError);
    CouplingConfig bad = config(PrintMotionMode::PauseResume);
    bad.settle_time = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("event summary splits pauses per segment and closes trailing ones") {
    std::vector<gcode::PrintSegment> segments(2);
    segments[0] = {0, 0, 9, 0.0, 50.0};
    segments[1] = {1, 10, 19, 50.0, 100.0};

    auto ev = [](double t_wall, double t_print, PrintEventKind kind) {
        PrintChannelEvent e;
        e.time = t_wall;
        e.print_time = t_print;
        e.kind = kind;
        return e;
    };
    const std::vector<PrintChannelEvent> events{
        ev(10.0, 10.0, PrintEventKind::PauseExtrusion),
        ev(13.5, 10.0, PrintEventKind::ResumeExtrusion),
        ev(20.0, 16.0, PrintEventKind::FeedScale),  // ignored by the summary
        ev(30.0, 26.0, PrintEventKind::PauseExtrusion),
        ev(31.0, 26.0, PrintEventKind::ResumeExtrusion),
        ev(80.0, 70.0, PrintEventKind::PauseExtrusion),
    };
    const auto reports = event_log_summary(events, segments, 95.0);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].segment_index == 0);
    CHECK(reports[0].pause_count == 2);
    CHECK(reports[0].paused_duration == doctest::Approx(3.5 + 1.0));
    CHECK(!reports[0].open_pause);
    CHECK(reports[1].pause_count == 1);
    CHECK(reports[1].paused_duration == doctest::Approx(15.0));  // runs to episode end
    CHECK(reports[1].open_pause);
}

TEST_CASE("event summary rejects malformed streams") {
    std::vector<gcode::PrintSegment> segments(1);
    segments[0] = {0, 0, 9, 0.0, 100.0};
    auto ev = [](double t, PrintEventKind kind) {
        PrintChannelEvent e;
        e.time = t;
        e.print_time = t;
        e.kind = kind;
        return e;
    };

    const std::vector<PrintChannelEvent> double_pause{
        ev(1.0, PrintEventKind::PauseExtrusion), ev(2.0, PrintEventKind::PauseExtrusion)};
    CHECK_THROWS_AS(event_log_summary(double_pause, segments, 10.0), MalformedEventStream);

    const std::vector<PrintChannelEvent> stray_resume{ev(1.0, PrintEventKind::ResumeExtrusion)};
    CHECK_THROWS_AS(event_log_summary(stray_resume, segments, 10.0), MalformedEventStream);

    const std::vector<PrintChannelEvent> unordered{ev(5.0, PrintEventKind::PauseExtrusion),
                                                   ev(4.0, PrintEventKind::ResumeExtrusion)};
    CHECK_THROWS_AS(event_log_summary(unordered, segments, 10.0), MalformedEventStream);

    CHECK(event_log_summary({}, segments, 10.0)[0].pause_count == 0);
}
