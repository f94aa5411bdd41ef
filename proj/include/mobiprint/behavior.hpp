#pragma once

#include <optional>

#include "mobiprint/errors.hpp"

namespace mobiprint::behavior {

/// Minimum ranges in the frontal and lateral sectors, meters;
/// max_range reported when a sector is clear.
struct ProximityReading {
    double front = 0.0;
    double left = 0.0;
    double right = 0.0;

    void validate(double max_range) const;
};

struct BehaviorThresholds {
    double d_slow = 1.0;       // m
    double d_turn = 0.5;       // m
    double d_side = 0.4;       // m
    double slow_speed = 0.06;  // m/s
    double turn_rate = 0.5;    // rad/s
    double side_speed = 0.05;  // m/s
    double hysteresis = 0.1;   // m, frontal de-escalation band

    void validate() const;
};

enum class FrontalMode { Cruise, Slow, Turn };
enum class SideCorrection { None, ShiftLeft, ShiftRight };

const char* to_string(FrontalMode mode);
const char* to_string(SideCorrection side);

/// speed_cap empty means "keep the nominal speed" (Cruise with a pure
/// lateral correction). lateral_velocity: + shifts left, - shifts right.
struct CommandOverride {
    std::optional<double> speed_cap;
    double yaw_rate = 0.0;
    double lateral_velocity = 0.0;
};

struct BehaviorDecision {
    FrontalMode frontal_mode = FrontalMode::Cruise;
    SideCorrection side_correction = SideCorrection::None;
    std::optional<CommandOverride> command_override;
};

/// Pure threshold classification: Turn if front <= d_turn, Slow if
/// front <= d_slow, else Cruise; ShiftRight when the left sector
/// intrudes within d_side (ties to the right), ShiftLeft when the right
/// does. Cruise with no side correction carries no override.
BehaviorDecision classify(const ProximityReading& reading, const BehaviorThresholds& th);

/// Resolved command for a decision: Cruise caps at nominal_speed, Slow
/// at slow_speed, Turn stops linear motion and yaws toward the larger
/// lateral clearance (ties turn left); the side correction adds lateral
/// velocity without touching the frontal yaw choice.
CommandOverride mode_command(FrontalMode frontal, SideCorrection side,
                             const ProximityReading& reading, double nominal_speed,
                             const BehaviorThresholds& th);

/// Frontal urgency rank: Cruise 0 < Slow 1 < Turn 2. Side corrections
/// are orthogonal and do not contribute.
int arbitration_precedence(const BehaviorDecision& decision);

/// Stateful wrapper adding the de-escalation hysteresis band: a mode is
/// only released once front clears its entry threshold by `hysteresis`.
class BehaviorFsm {
public:
    BehaviorDecision step(const ProximityReading& reading, const BehaviorThresholds& th);
    FrontalMode current() const { return last_; }
    void reset() { last_ = FrontalMode::Cruise; }

private:
    FrontalMode last_ = FrontalMode::Cruise;
};

}  // namespace mobiprint::behavior
