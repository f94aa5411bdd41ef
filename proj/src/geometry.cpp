#include "mobiprint/geometry.hpp"

#include <algorithm>
#include <limits>

namespace mobiprint {

void require_finite(const Vec2& v, const std::string& what) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
        throw ValidationError(what + " has a non-finite component");
    }
}

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

namespace {

double polygon_area(const std::vector<Vec2>& v) {
    double twice = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const Vec2& a = v[i];
        const Vec2& b = v[(i + 1) % v.size()];
        twice += a.cross(b);
    }
    return 0.5 * twice;
}

Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    const Vec2 ab = b - a;
    const double len2 = ab.squared_norm();
    if (len2 <= 0.0) return a;
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + ab * t;
}

}  // namespace

Polytope Polytope::from_vertices(std::vector<Vec2> vertices, RegionLabel label) {
    if (vertices.size() < 3) {
        throw ValidationError("polytope needs at least 3 vertices, got " +
                              std::to_string(vertices.size()));
    }
    for (const Vec2& v : vertices) require_finite(v, "polytope vertex");

    const double area = polygon_area(vertices);
    if (area <= 1e-12) {
        throw ValidationError(area < 0.0
                                  ? "polytope vertices are clockwise; expected counter-clockwise"
                                  : "polytope is degenerate (zero area)");
    }
    // Convexity: every turn of a CCW convex polygon is a left turn.
    const size_t n = vertices.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2 e1 = vertices[(i + 1) % n] - vertices[i];
        const Vec2 e2 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
        if (e1.cross(e2) < -1e-12) {
            throw ValidationError("polytope vertices are not convex");
        }
        if (e1.norm() < 1e-12) {
            throw ValidationError("polytope has duplicate consecutive vertices");
        }
    }

    Polytope p;
    p.label_ = label;
    p.vertices_ = std::move(vertices);
    p.halfspaces_.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = p.vertices_[i];
        const Vec2& b = p.vertices_[(i + 1) % n];
        // Outward normal of a CCW polygon edge.
        const Vec2 normal = Vec2{(b - a).y, -(b - a).x}.normalized();
        p.halfspaces_.push_back({normal, normal.dot(a)});
    }
    return p;
}

bool Polytope::contains(const Vec2& point) const {
    return std::all_of(halfspaces_.begin(), halfspaces_.end(),
                       [&](const Halfspace& h) { return h.contains(point); });
}

double Polytope::distance(const Vec2& point) const {
    double max_residual = -std::numeric_limits<double>::infinity();
    for (const Halfspace& h : halfspaces_) {
        max_residual = std::max(max_residual, h.residual(point));
    }
    if (max_residual <= 0.0) return max_residual;  // inside: nearest-face depth

    double best = std::numeric_limits<double>::infinity();
    const size_t n = vertices_.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2 c = closest_point_on_segment(vertices_[i], vertices_[(i + 1) % n], point);
        best = std::min(best, (point - c).norm());
    }
    return best;
}

Vec2 Polytope::closest_boundary_point(const Vec2& point) const {
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_point = vertices_.front();
    const size_t n = vertices_.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2 c = closest_point_on_segment(vertices_[i], vertices_[(i + 1) % n], point);
        const double d = (point - c).norm();
        if (d < best) {
            best = d;
            best_point = c;
        }
    }
    return best_point;
}

Halfspace separating_halfspace(const Polytope& p, const Vec2& point, double margin) {
    const double dist = p.distance(point);
    if (dist <= 0.0) {
        throw PointInsidePolytope("separating halfspace undefined: query point is inside the polytope (signed distance " +
                                  std::to_string(dist) + ")");
    }
    const Vec2 c = p.closest_boundary_point(point);
    // Unit direction from the query point toward the polytope; the safe
    // region {q : n·q <= o} then holds the query side and the polytope
    // violates it, matching the storage convention of Polytope faces.
    const Vec2 n = (c - point).normalized();
    return Halfspace{n, n.dot(c) - margin};
}

void Bump::validate() const {
    require_finite(center, "bump center");
    if (!(height > 0.0)) throw ValidationError("bump height must be > 0");
    if (!(half_length > 0.0)) throw ValidationError("bump half_length must be > 0");
    if (!(width > 0.0)) throw ValidationError("bump width must be > 0");
}

}  // namespace mobiprint
