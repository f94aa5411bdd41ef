#include "mobiprint/world.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mobiprint {

void RobotState::validate(double v_abs_max) const {
    require_finite(position, "robot position");
    require_finite(velocity, "robot velocity");
    if (!std::isfinite(heading)) throw ValidationError("robot heading is not finite");
    if (std::abs(wrap_angle(heading) - heading) > 1e-12) {
        throw ValidationError("robot heading must be normalized to (-pi, pi]");
    }
    if (time < 0.0 || !std::isfinite(time)) throw ValidationError("robot time must be >= 0");
    if (velocity.norm() > v_abs_max + 1e-12) {
        throw ValidationError("robot speed " + std::to_string(velocity.norm()) +
                              " exceeds the absolute maximum " + std::to_string(v_abs_max));
    }
}

void FactoryMap::validate() const {
    if (!(bounds.max.x > bounds.min.x && bounds.max.y > bounds.min.y)) {
        throw ValidationError("map bounds must span a positive area");
    }
    auto check_polytopes = [&](const std::vector<Polytope>& ps, const char* what) {
        for (size_t i = 0; i < ps.size(); ++i) {
            for (const Vec2& v : ps[i].vertices()) {
                if (!bounds.contains(v)) {
                    throw ValidationError(std::string(what) + " " + std::to_string(i) +
                                          " has a vertex outside the map bounds");
                }
            }
        }
    };
    check_polytopes(obstacles, "obstacle");
    check_polytopes(zones, "zone");
    for (size_t i = 0; i < bumps.size(); ++i) {
        bumps[i].validate();
        const Bump& b = bumps[i];
        const Rect fp{{b.center.x - b.half_length, b.center.y - b.width * 0.5},
                      {b.center.x + b.half_length, b.center.y + b.width * 0.5}};
        if (!bounds.contains(fp.min) || !bounds.contains(fp.max)) {
            throw ValidationError("bump " + std::to_string(i) + " footprint extends outside the map bounds");
        }
    }
}

double FactoryMap::min_obstacle_clearance(const Vec2& point) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Polytope& o : obstacles) best = std::min(best, o.distance(point));
    return best;
}

}  // namespace mobiprint
