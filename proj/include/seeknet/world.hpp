#pragma once

// Deterministic 2D world: unicycle robot, waypoint-following pedestrians,
// segment-chain obstacles, disc collision model.

#include <cmath>
#include <string>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/geometry.hpp"

namespace seeknet {

struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // (-pi, pi]

    Vec2 position() const { return {x, y}; }
};

inline Pose2D make_pose(double x, double y, double theta) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(theta))
        throw DomainError("pose components must be finite");
    return {x, y, normalize_angle(theta)};
}

// Velocity command bounds. v in [0, 1] m/s, w in [-1, 1] rad/s.
inline constexpr double kVelMin = 0.0;
inline constexpr double kVelMax = 1.0;
inline constexpr double kYawRateMax = 1.0;

struct Velocity {
    double v = 0.0;  // m/s
    double w = 0.0;  // rad/s
};

inline Velocity clamp_velocity(const Velocity& u) {
    return {std::clamp(u.v, kVelMin, kVelMax), std::clamp(u.w, -kYawRateMax, kYawRateMax)};
}

struct RobotState {
    Pose2D pose;
    Velocity velocity;
    double radius = 0.3;
};

struct HumanAgent {
    int id = 0;
    Pose2D pose;
    double body_radius = 0.3;
    double speed = 0.0;                 // m/s along waypoint legs
    std::vector<Pose2D> waypoints;      // cycled; capture radius 0.3 m
    int waypoint_index = 0;
    std::string true_class;
};

// Obstacles are open polylines; consecutive points form wall segments.
struct ObstacleChain {
    std::vector<Vec2> points;
};

struct Rect {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

    bool contains(const Vec2& p) const {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
};

struct Scenario {
    Rect bounds;
    std::vector<ObstacleChain> obstacles;
    std::vector<HumanAgent> humans;
    Pose2D robot_start;
    double robot_radius = 0.3;
    uint64_t rng_seed = 0;
    int duration = 300;  // ticks
    double dt = 0.1;     // seconds per tick
    std::vector<std::string> class_set = {"A", "B"};

    std::vector<Segment> wall_segments() const {
        std::vector<Segment> out;
        for (const auto& chain : obstacles)
            for (size_t i = 0; i + 1 < chain.points.size(); ++i)
                out.push_back({chain.points[i], chain.points[i + 1]});
        return out;
    }
};

// ---------------------------------------------------------------------------
// Robot kinematics
// ---------------------------------------------------------------------------

inline RobotState step_robot(const RobotState& state, const Velocity& action, double dt) {
    if (dt <= 0.0) throw DomainError("step_robot: dt must be positive");
    if (!std::isfinite(state.pose.x) || !std::isfinite(state.pose.y) ||
        !std::isfinite(state.pose.theta) || !std::isfinite(action.v) || !std::isfinite(action.w))
        throw DomainError("step_robot: non-finite state or action");
    const Velocity u = clamp_velocity(action);
    RobotState next = state;
    next.pose.x = state.pose.x + u.v * std::cos(state.pose.theta) * dt;
    next.pose.y = state.pose.y + u.v * std::sin(state.pose.theta) * dt;
    next.pose.theta = normalize_angle(state.pose.theta + u.w * dt);
    next.velocity = u;
    return next;
}

// ---------------------------------------------------------------------------
// Pedestrians: advance toward the current waypoint, cycle within the capture
// radius, then resolve pairwise overlaps and wall penetration by projection.
// Fully deterministic; agents are processed in index order.
// ---------------------------------------------------------------------------

inline constexpr double kWaypointCaptureRadius = 0.3;

inline std::vector<HumanAgent> step_humans(const std::vector<HumanAgent>& humans,
                                           const std::vector<Segment>& walls, double dt) {
    if (dt <= 0.0) throw DomainError("step_humans: dt must be positive");
    std::vector<HumanAgent> out = humans;

    for (auto& h : out) {
        if (h.waypoints.empty() || h.speed <= 0.0) continue;
        Vec2 target = h.waypoints[static_cast<size_t>(h.waypoint_index)].position();
        if (distance(h.pose.position(), target) <= kWaypointCaptureRadius) {
            h.waypoint_index = static_cast<int>((static_cast<size_t>(h.waypoint_index) + 1) %
                                                h.waypoints.size());
            target = h.waypoints[static_cast<size_t>(h.waypoint_index)].position();
        }
        const Vec2 to_target = target - h.pose.position();
        const double d = to_target.norm();
        if (d < 1e-12) continue;
        const double step = std::min(h.speed * dt, d);
        h.pose.x += to_target.x / d * step;
        h.pose.y += to_target.y / d * step;
        h.pose.theta = normalize_angle(std::atan2(to_target.y, to_target.x));
    }

    // Pairwise separation: push overlapping agents apart along the center line.
    for (size_t i = 0; i < out.size(); ++i) {
        for (size_t j = i + 1; j < out.size(); ++j) {
            Vec2 delta = out[j].pose.position() - out[i].pose.position();
            double d = delta.norm();
            const double min_d = out[i].body_radius + out[j].body_radius;
            if (d >= min_d) continue;
            if (d < 1e-9) {  // coincident: separate along x deterministically
                delta = {1.0, 0.0};
                d = 1.0;
            }
            const double push = 0.5 * (min_d - d);
            out[i].pose.x -= delta.x / d * push;
            out[i].pose.y -= delta.y / d * push;
            out[j].pose.x += delta.x / d * push;
            out[j].pose.y += delta.y / d * push;
        }
    }

    // Keep bodies out of walls.
    for (auto& h : out) {
        for (const auto& s : walls) {
            const double d = point_segment_distance(h.pose.position(), s);
            if (d >= h.body_radius || d < 1e-9) continue;
            const Vec2 ab = s.b - s.a;
            const double len2 = ab.norm2();
            double t = len2 > 0.0 ? std::clamp((h.pose.position() - s.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
            const Vec2 closest = s.a + ab * t;
            const Vec2 n = h.pose.position() - closest;
            const double push = h.body_radius - d;
            h.pose.x += n.x / d * push;
            h.pose.y += n.y / d * push;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Collision checks
// ---------------------------------------------------------------------------

inline bool check_collision(const RobotState& robot, const std::vector<HumanAgent>& humans,
                            const std::vector<Segment>& walls) {
    const Vec2 p = robot.pose.position();
    for (const auto& s : walls)
        if (point_segment_distance(p, s) < robot.radius) return true;
    for (const auto& h : humans)
        if (distance(p, h.pose.position()) < robot.radius + h.body_radius) return true;
    return false;
}

// Capsule test over one tick of motion so thin walls cannot be tunnelled.
inline bool swept_wall_collision(const Vec2& from, const Vec2& to, double radius,
                                 const std::vector<Segment>& walls) {
    const Segment path{from, to};
    for (const auto& s : walls)
        if (segment_segment_distance(path, s) < radius) return true;
    return false;
}

// Pedestrians give way around the robot with a bounded per-tick displacement,
// so foot traffic flows around a stationary robot while a robot driving
// straight into a person still closes the gap and registers contact. Yields
// that would shove a person into a wall are dropped.
inline void yield_humans_around_robot(std::vector<HumanAgent>& humans, const Vec2& robot_pos,
                                      double robot_radius, const std::vector<Segment>& walls,
                                      double cap = 0.08, double margin = 0.02) {
    for (auto& h : humans) {
        Vec2 delta = h.pose.position() - robot_pos;
        double d = delta.norm();
        const double min_d = robot_radius + h.body_radius + margin;
        if (d >= min_d) continue;
        if (d < 1e-9) {
            delta = {1.0, 0.0};
            d = 1.0;
        }
        const double push = std::min(min_d - d, cap);
        const Vec2 moved{h.pose.x + delta.x / d * push, h.pose.y + delta.y / d * push};
        bool blocked = false;
        for (const auto& s : walls)
            if (point_segment_distance(moved, s) < h.body_radius) blocked = true;
        if (blocked) continue;
        h.pose.x = moved.x;
        h.pose.y = moved.y;
    }
}

// ---------------------------------------------------------------------------
// Scenario generation
// ---------------------------------------------------------------------------

struct GeneratorSpec {
    double room_width = 12.0;
    double room_height = 10.0;
    int obstacle_count = 4;       // interior walls; the perimeter is always added
    int human_count = 5;
    std::vector<std::string> class_set = {"A", "B"};
    double robot_radius = 0.3;
    double human_radius = 0.3;
    double human_speed_min = 0.2;
    double human_speed_max = 0.7;
    int waypoints_per_human = 3;
    int duration = 300;
    double dt = 0.1;
    double wall_length_min = 1.5;
    double wall_length_max = 3.5;
    // Fraction of humans spawned behind an interior wall relative to the robot
    // start, so occlusion actually occurs in generated scenes.
    double occluded_fraction = 0.5;
    int max_placement_retries = 2000;
};

namespace detail {

inline bool placement_free(const Vec2& p, double radius, const std::vector<Segment>& walls,
                           const std::vector<HumanAgent>& placed, double placed_radius,
                           const Vec2* robot, double robot_radius) {
    for (const auto& s : walls)
        if (point_segment_distance(p, s) < radius + 0.05) return false;
    for (const auto& h : placed)
        if (distance(p, h.pose.position()) < radius + placed_radius + 0.05) return false;
    if (robot && distance(p, *robot) < radius + robot_radius + 0.05) return false;
    return true;
}

}  // namespace detail

inline Scenario generate_scenario(const GeneratorSpec& spec, uint64_t seed) {
    if (spec.room_width <= 2.0 || spec.room_height <= 2.0)
        throw DomainError("generate_scenario: room too small");
    if (spec.class_set.empty()) throw DomainError("generate_scenario: class set empty");
    if (spec.dt <= 0.0) throw DomainError("generate_scenario: dt must be positive");

    Rng rng = Rng::stream(seed, 0x5ce7a210);
    Scenario sc;
    sc.bounds = {0.0, 0.0, spec.room_width, spec.room_height};
    sc.rng_seed = seed;
    sc.duration = spec.duration;
    sc.dt = spec.dt;
    sc.robot_radius = spec.robot_radius;
    sc.class_set = spec.class_set;

    // Perimeter.
    ObstacleChain rim;
    rim.points = {{0.0, 0.0},
                  {spec.room_width, 0.0},
                  {spec.room_width, spec.room_height},
                  {0.0, spec.room_height},
                  {0.0, 0.0}};
    sc.obstacles.push_back(rim);

    // Robot starts in the left third facing the room.
    const Vec2 robot_pos{0.18 * spec.room_width, 0.5 * spec.room_height};
    sc.robot_start = make_pose(robot_pos.x, robot_pos.y, 0.0);

    // Interior walls in the middle band, never hugging the robot start.
    std::vector<Segment> walls = sc.wall_segments();
    int retries = 0;
    for (int i = 0; i < spec.obstacle_count; ++i) {
        bool placed = false;
        while (!placed) {
            if (++retries > spec.max_placement_retries)
                throw GenerationError("generate_scenario: wall placement retries exhausted");
            const double cx = rng.uniform(0.35 * spec.room_width, 0.85 * spec.room_width);
            const double cy = rng.uniform(0.15 * spec.room_height, 0.85 * spec.room_height);
            const double len = rng.uniform(spec.wall_length_min, spec.wall_length_max);
            const double ang = rng.uniform(0.0, kPi);
            const Vec2 half{0.5 * len * std::cos(ang), 0.5 * len * std::sin(ang)};
            const Vec2 a{cx - half.x, cy - half.y};
            const Vec2 b{cx + half.x, cy + half.y};
            if (!sc.bounds.contains(a) || !sc.bounds.contains(b)) continue;
            const Segment cand{a, b};
            if (point_segment_distance(robot_pos, cand) < spec.robot_radius + 0.6) continue;
            bool too_close = false;
            for (const auto& w : walls)
                if (segment_segment_distance(cand, w) < 0.5) too_close = true;
            if (too_close) continue;
            ObstacleChain chain;
            chain.points = {a, b};
            sc.obstacles.push_back(chain);
            walls.push_back(cand);
            placed = true;
        }
    }

    const auto interior_walls = [&]() {
        std::vector<Segment> v;
        for (size_t i = 1; i < sc.obstacles.size(); ++i)
            for (size_t j = 0; j + 1 < sc.obstacles[i].points.size(); ++j)
                v.push_back({sc.obstacles[i].points[j], sc.obstacles[i].points[j + 1]});
        return v;
    }();

    // Humans. A configured fraction is seeded behind interior walls (relative
    // to the robot start); the rest are free placements. Everyone patrols.
    const int occluded_target =
        interior_walls.empty()
            ? 0
            : static_cast<int>(std::lround(spec.occluded_fraction * spec.human_count));
    for (int i = 0; i < spec.human_count; ++i) {
        HumanAgent h;
        h.id = i;
        h.body_radius = spec.human_radius;
        h.speed = rng.uniform(spec.human_speed_min, spec.human_speed_max);
        h.true_class =
            spec.class_set[static_cast<size_t>(rng.uniform_index(spec.class_set.size()))];

        bool placed = false;
        while (!placed) {
            if (++retries > spec.max_placement_retries)
                throw GenerationError("generate_scenario: human placement retries exhausted");
            Vec2 p;
            if (i < occluded_target) {
                // Sample just past a wall along the robot->wall-center line.
                const auto& w =
                    interior_walls[static_cast<size_t>(rng.uniform_index(interior_walls.size()))];
                const Vec2 mid = (w.a + w.b) * 0.5;
                Vec2 dir = mid - robot_pos;
                const double n = dir.norm();
                if (n < 1e-9) continue;
                dir = dir * (1.0 / n);
                const double behind = rng.uniform(0.6, 1.8);
                const double lateral = rng.uniform(-0.8, 0.8);
                const Vec2 perp{-dir.y, dir.x};
                p = mid + dir * behind + perp * lateral;
            } else {
                p = {rng.uniform(sc.bounds.xmin + 0.6, sc.bounds.xmax - 0.6),
                     rng.uniform(sc.bounds.ymin + 0.6, sc.bounds.ymax - 0.6)};
            }
            if (!sc.bounds.contains(p)) continue;
            if (!detail::placement_free(p, h.body_radius, walls, sc.humans, spec.human_radius,
                                        &robot_pos, spec.robot_radius))
                continue;
            h.pose = make_pose(p.x, p.y, 0.0);
            placed = true;
        }

        // Patrol loop: spawn point plus nearby reachable waypoints.
        h.waypoints.push_back(h.pose);
        const int extra = std::max(1, spec.waypoints_per_human - 1);
        for (int k = 0; k < extra; ++k) {
            bool ok = false;
            for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
                const double r = rng.uniform(0.8, 2.5);
                const double a = rng.uniform(-kPi, kPi);
                const Vec2 p{h.pose.x + r * std::cos(a), h.pose.y + r * std::sin(a)};
                if (!sc.bounds.contains(p)) continue;
                bool clear = true;
                for (const auto& s : walls)
                    if (point_segment_distance(p, s) < h.body_radius + 0.05) clear = false;
                if (!clear) continue;
                h.waypoints.push_back(make_pose(p.x, p.y, 0.0));
                ok = true;
            }
            if (!ok) h.waypoints.push_back(h.pose);  // degenerate patrol: stand around
        }
        sc.humans.push_back(h);
    }
    return sc;
}

}  // namespace seeknet
