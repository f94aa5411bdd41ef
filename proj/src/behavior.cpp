#include "mobiprint/behavior.hpp"

#include <cmath>

namespace mobiprint::behavior {

namespace {

FrontalMode frontal_from_range(double front, const BehaviorThresholds& th) {
    if (front <= th.d_turn) return FrontalMode::Turn;
    if (front <= th.d_slow) return FrontalMode::Slow;
    return FrontalMode::Cruise;
}

SideCorrection side_from_ranges(double left, double right, const BehaviorThresholds& th) {
    if (left <= th.d_side && left <= right) return SideCorrection::ShiftRight;
    if (right <= th.d_side && right < left) return SideCorrection::ShiftLeft;
    return SideCorrection::None;
}

BehaviorDecision assemble(FrontalMode frontal, SideCorrection side,
                          const ProximityReading& reading, const BehaviorThresholds& th) {
    BehaviorDecision d;
    d.frontal_mode = frontal;
    d.side_correction = side;
    if (frontal == FrontalMode::Cruise && side == SideCorrection::None) return d;

    CommandOverride o;
    switch (frontal) {
        case FrontalMode::Cruise: break;  // cap stays empty: keep nominal
        case FrontalMode::Slow: o.speed_cap = th.slow_speed; break;
        case FrontalMode::Turn:
            o.speed_cap = 0.0;
            o.yaw_rate = reading.left >= reading.right ? th.turn_rate : -th.turn_rate;
            break;
    }
    if (side == SideCorrection::ShiftLeft) o.lateral_velocity = th.side_speed;
    if (side == SideCorrection::ShiftRight) o.lateral_velocity = -th.side_speed;
    d.command_override = o;
    return d;
}

}  // namespace

void ProximityReading::validate(double max_range) const {
    for (double v : {front, left, right}) {
        if (!std::isfinite(v) || v <= 0.0 || v > max_range + 1e-12)
            throw ValidationError("proximity reading outside (0, max_range]");
    }
}

void BehaviorThresholds::validate() const {
    if (!(0.0 < d_turn && d_turn < d_slow))
        throw ValidationError("behavior thresholds require 0 < d_turn < d_slow");
    if (!(d_side > 0.0)) throw ValidationError("d_side must be positive");
    if (slow_speed < 0.0 || turn_rate < 0.0 || side_speed < 0.0 || hysteresis < 0.0)
        throw ValidationError("behavior speeds and hysteresis must be nonnegative");
}

BehaviorDecision classify(const ProximityReading& reading, const BehaviorThresholds& th) {
    return assemble(frontal_from_range(reading.front, th),
                    side_from_ranges(reading.left, reading.right, th), reading, th);
}

CommandOverride mode_command(FrontalMode frontal, SideCorrection side,
                             const ProximityReading& reading, double nominal_speed,
                             const BehaviorThresholds& th) {
    CommandOverride o;
    switch (frontal) {
        case FrontalMode::Cruise: o.speed_cap = nominal_speed; break;
        case FrontalMode::Slow: o.speed_cap = th.slow_speed; break;
        case FrontalMode::Turn:
            o.speed_cap = 0.0;
            o.yaw_rate = reading.left >= reading.right ? th.turn_rate : -th.turn_rate;
            break;
    }
    if (side == SideCorrection::ShiftLeft) o.lateral_velocity = th.side_speed;
    if (side == SideCorrection::ShiftRight) o.lateral_velocity = -th.side_speed;
    return o;
}

int arbitration_precedence(const BehaviorDecision& decision) {
    switch (decision.frontal_mode) {
        case FrontalMode::Cruise: return 0;
        case FrontalMode::Slow: return 1;
        case FrontalMode::Turn: return 2;
    }
    return 0;
}

BehaviorDecision BehaviorFsm::step(const ProximityReading& reading, const BehaviorThresholds& th) {
    FrontalMode raw = frontal_from_range(reading.front, th);
    FrontalMode chosen = raw;
    if (static_cast<int>(raw) < static_cast<int>(last_)) {
        // De-escalation: hold the current mode until clear of its entry
        // threshold by the hysteresis band.
        const double release =
            (last_ == FrontalMode::Turn ? th.d_turn : th.d_slow) + th.hysteresis;
        if (reading.front <= release) chosen = last_;
    }
    last_ = chosen;
    return assemble(chosen, side_from_ranges(reading.left, reading.right, th), reading, th);
}

const char* to_string(FrontalMode mode) {
    switch (mode) {
        case FrontalMode::Cruise: return "cruise";
        case FrontalMode::Slow: return "slow";
        case FrontalMode::Turn: return "turn";
    }
    return "cruise";
}

const char* to_string(SideCorrection side) {
    switch (side) {
        case SideCorrection::None: return "none";
        case SideCorrection::ShiftLeft: return "shift_left";
        case SideCorrection::ShiftRight: return "shift_right";
    }
    return "none";
}

}  // namespace mobiprint::behavior
