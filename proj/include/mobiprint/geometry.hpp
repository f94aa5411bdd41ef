#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mobiprint/errors.hpp"

namespace mobiprint {

/// Planar point / vector, meters. Components are kept finite; anything
/// that stores a Vec2 validates through require_finite().
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }

    Vec2 normalized() const {
        const double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }

    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

void require_finite(const Vec2& v, const std::string& what);

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// The set {p : normal·p <= offset}. normal is unit length (within 1e-9).
struct Halfspace {
    Vec2 normal;
    double offset = 0.0;

    bool contains(const Vec2& p) const { return normal.dot(p) <= offset; }
    /// Signed residual: negative inside, positive outside, in meters.
    double residual(const Vec2& p) const { return normal.dot(p) - offset; }
};

enum class RegionLabel { Obstacle, RestrictedZone };

/// Bounded convex region stored in halfspace form. Vertices are kept from
/// construction time; they feed distance queries and load-time validation.
class Polytope {
public:
    /// Build from CCW vertices. Throws ValidationError on fewer than 3
    /// vertices, non-convex or clockwise input, or degenerate area.
    static Polytope from_vertices(std::vector<Vec2> vertices, RegionLabel label);

    const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    RegionLabel label() const { return label_; }

    /// Membership with zero tolerance; the boundary counts as contained.
    bool contains(const Vec2& point) const;

    /// Signed Euclidean distance to the boundary: positive outside
    /// (exact, via edge projections), negative inside (nearest-face
    /// depth, the max halfspace residual).
    double distance(const Vec2& point) const;

    /// Closest point on the boundary to an exterior query point.
    Vec2 closest_boundary_point(const Vec2& point) const;

private:
    Polytope() = default;
    std::vector<Halfspace> halfspaces_;
    std::vector<Vec2> vertices_;
    RegionLabel label_ = RegionLabel::Obstacle;
};

inline bool polytope_contains(const Polytope& p, const Vec2& point) { return p.contains(point); }
inline double polytope_distance(const Polytope& p, const Vec2& point) { return p.distance(point); }

/// Safe-side halfspace separating `point` from polytope `p`, shifted into
/// free space by `margin`: the returned region {q : normal·q <= offset}
/// contains the query point, excludes the polytope, and every polytope
/// vertex v satisfies normal·v >= offset.
/// Throws PointInsidePolytope unless distance(point) > 0.
Halfspace separating_halfspace(const Polytope& p, const Vec2& point, double margin = 0.0);

/// Raised floor strip, axis-aligned: half_length is the half extent
/// along the travel (x) axis, width the full lateral (y) extent; width
/// is also the length scale of the vertical-disturbance model. Height
/// only feeds that model.
struct Bump {
    Vec2 center;
    double half_length = 0.0;  // half extent along x, m
    double width = 0.0;        // full extent along y, m
    double height = 0.0;       // m

    bool footprint_contains(const Vec2& p) const {
        return std::abs(p.x - center.x) <= half_length &&
               std::abs(p.y - center.y) <= width * 0.5;
    }

    /// Euclidean distance from p to the footprint rectangle, 0 inside.
    double footprint_distance(const Vec2& p) const {
        const double dx = std::max(std::abs(p.x - center.x) - half_length, 0.0);
        const double dy = std::max(std::abs(p.y - center.y) - width * 0.5, 0.0);
        return std::hypot(dx, dy);
    }

    void validate() const;
};

/// Axis-aligned rectangle [min, max].
struct Rect {
    Vec2 min;
    Vec2 max;

    bool contains(const Vec2& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
    }
    double width() const { return max.x - min.x; }
    double height() const { return max.y - min.y; }
};

}  // namespace mobiprint
