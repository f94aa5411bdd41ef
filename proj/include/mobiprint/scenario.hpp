#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mobiprint/behavior.hpp"
#include "mobiprint/coupling.hpp"
#include "mobiprint/mpc.hpp"
#include "mobiprint/sim.hpp"
#include "mobiprint/world.hpp"

namespace mobiprint {

struct ControllerConfig {
    mpc::MpcConfig mpc;
    behavior::BehaviorThresholds behavior;
    double v_cruise = 0.12;   // m/s reference progression speed
    int critical_layers = 3;  // N first/last layers per segment

    // The reference clock holds whenever the sampled reference point leads
    // the pose estimate by more than this, so the target never outruns what
    // the speed-capped base can reach within the horizon.
    double max_ref_lead = 0.3;

    // Print-motion strategy parameters (mode itself lives on Scenario).
    double d_pause = 0.15;
    double settle_vibration = 0.02;
    double settle_time = 1.0;
    double v_bump = 0.06;

    coupling::CouplingConfig coupling_config(coupling::PrintMotionMode mode) const;
    void validate() const;
};

/// One loadable experiment: environment, start, reference, print job,
/// strategy, seed, and both config blocks.
struct Scenario {
    FactoryMap map;
    RobotState start;
    std::vector<Vec2> reference_path;
    std::string gcode_path;  // resolved against the scenario file location
    coupling::PrintMotionMode mode = coupling::PrintMotionMode::Continuous;
    std::uint64_t seed = 0;
    ControllerConfig controller;
    sim::SimConfig sim;

    // Quality-model calibration, zero until a calibration file is applied.
    sim::QualityGains gains;
    std::string calibration_id;

    void validate() const;
};

/// Strict schema_version=1 parse + full invariant validation.
/// Throws ParseError (malformed document or value, with location) or
/// ValidationError (violated invariant, named).
Scenario load_scenario(const std::string& path);

/// Same, after applying dotted-path overrides ("controller.v_max=0.1",
/// "mode=pause_resume") onto the document before conversion.
Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace mobiprint
