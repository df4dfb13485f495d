#pragma once

// 2D primitives shared by the world, sensing and planning layers. Everything
// is exact analytic geometry on doubles; no tolerance knobs except where a
// test epsilon is the honest answer (parallel rays).

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace seeknet {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Wraps into (-pi, pi].
inline double normalize_angle(double theta) {
    double a = std::fmod(theta + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

// A wall piece. Scenario obstacles are chains of these.
struct Segment {
    Vec2 a;
    Vec2 b;
};

inline double point_segment_distance(const Vec2& p, const Segment& s) {
    const Vec2 ab = s.b - s.a;
    const double len2 = ab.norm2();
    if (len2 == 0.0) return distance(p, s.a);
    double t = (p - s.a).dot(ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, s.a + ab * t);
}

inline double segment_segment_distance(const Segment& u, const Segment& v) {
    // Proper crossing means distance zero.
    const auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return (q - p).cross(r - p);
    };
    const double d1 = orient(u.a, u.b, v.a);
    const double d2 = orient(u.a, u.b, v.b);
    const double d3 = orient(v.a, v.b, u.a);
    const double d4 = orient(v.a, v.b, u.b);
    if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return 0.0;
    return std::min(std::min(point_segment_distance(u.a, v), point_segment_distance(u.b, v)),
                    std::min(point_segment_distance(v.a, u), point_segment_distance(v.b, u)));
}

// Distance along the ray to the segment hit, if any. dir must be unit length.
inline std::optional<double> ray_segment_hit(const Vec2& origin, const Vec2& dir, const Segment& s) {
    const Vec2 e = s.b - s.a;
    const double denom = dir.cross(e);
    if (std::abs(denom) < 1e-15) return std::nullopt;  // parallel
    const Vec2 ao = s.a - origin;
    const double t = ao.cross(e) / denom;        // along ray
    const double u = ao.cross(dir) / denom;      // along segment
    if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
    return t;
}

// Nearest non-negative distance along the ray to the circle boundary.
// An origin inside the circle reports the exit hit.
inline std::optional<double> ray_circle_hit(const Vec2& origin, const Vec2& dir,
                                            const Vec2& center, double radius) {
    const Vec2 oc = origin - center;
    const double b = oc.dot(dir);
    const double c = oc.norm2() - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double t0 = -b - sq;
    const double t1 = -b + sq;
    if (t0 >= 0.0) return t0;
    if (t1 >= 0.0) return t1;
    return std::nullopt;
}

inline bool segment_intersects_circle(const Segment& s, const Vec2& center, double radius) {
    return point_segment_distance(center, s) <= radius;
}

inline bool segments_cross(const Segment& u, const Segment& v) {
    return segment_segment_distance(u, v) == 0.0;
}

}  // namespace seeknet
