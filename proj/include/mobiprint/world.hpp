#pragma once

#include <vector>

#include "mobiprint/geometry.hpp"

namespace mobiprint {

/// Planar double-integrator state plus the heading the simulated base
/// carries. Headings are normalized to (-pi, pi] at construction.
struct RobotState {
    Vec2 position;
    Vec2 velocity;
    double heading = 0.0;
    double time = 0.0;

    /// Normalizes heading and checks finiteness and the speed bound.
    void validate(double v_abs_max) const;
};

/// Static factory environment: boundary walls, convex obstacles O,
/// restricted zones C, and floor bumps.
struct FactoryMap {
    Rect bounds;
    std::vector<Polytope> obstacles;
    std::vector<Polytope> zones;
    std::vector<Bump> bumps;

    /// Checks that every polytope vertex and bump footprint lies within
    /// bounds. Throws ValidationError naming the offending entity.
    void validate() const;

    /// Minimum signed distance from point to any obstacle
    /// (+inf when there are none).
    double min_obstacle_clearance(const Vec2& point) const;
};

}  // namespace mobiprint
