#pragma once

// Simulated perception: planar lidar raycasting and per-human segmentation
// masks rendered into a robot-centric viewport. Masks come in two flavours:
// modal (what is actually visible past the occluders) and amodal (occluders
// ignored), the latter serving as ground truth for the segmentation metric.

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/geometry.hpp"
#include "seeknet/world.hpp"

namespace seeknet {

struct LidarConfig {
    int beams = 180;
    double fov = 240.0 * kPi / 180.0;  // radians, centered on heading
    double max_range = 6.0;            // meters
};

struct LidarScan {
    std::vector<double> beam_angles;  // relative to robot heading
    std::vector<double> ranges;       // (0, max_range]
    double max_range = 6.0;
    int tick = 0;
};

// Exactly the three most recent scans, oldest first. At episode start the
// first scan is replicated so ranges stay physical.
struct LidarStack {
    std::deque<LidarScan> scans;

    void push(const LidarScan& s) {
        if (scans.empty()) {
            scans.assign(3, s);
            return;
        }
        scans.push_back(s);
        while (scans.size() > 3) scans.pop_front();
    }
};

struct CameraConfig {
    double fov = 90.0 * kPi / 180.0;  // horizontal and vertical cone
    double range = 8.0;               // meters
    int mask_resolution = 244;
    double body_half_height = 0.85;   // nominal silhouette half-height, meters
};

struct SegMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> values;  // row-major, {0,1}
    int human_id = -1;
    int tick = 0;

    int pixel_count() const {
        int n = 0;
        for (uint8_t v : values) n += v;
        return n;
    }
};

// Bounded per-target mask history, oldest first, zero-padded when short.
struct SegMaskStack {
    int history = 3;
    int resolution = 0;
    std::deque<SegMask> masks;

    void reset(int res) {
        resolution = res;
        masks.clear();
    }
    void push(const SegMask& m) {
        masks.push_back(m);
        while (static_cast<int>(masks.size()) > history) masks.pop_front();
    }
    // Mask for slot i in [0, history); missing history reads as all-zero.
    const SegMask* at(int i) const {
        const int pad = history - static_cast<int>(masks.size());
        if (i < pad) return nullptr;
        return &masks[static_cast<size_t>(i - pad)];
    }
};

// ---------------------------------------------------------------------------
// Raycasting
// ---------------------------------------------------------------------------

inline double cast_ray(const Vec2& origin, double angle, const std::vector<Segment>& walls,
                       const std::vector<HumanAgent>& humans, double max_range,
                       int skip_human_id = -1) {
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    double best = max_range;
    for (const auto& s : walls) {
        if (auto t = ray_segment_hit(origin, dir, s); t && *t < best) best = *t;
    }
    for (const auto& h : humans) {
        if (h.id == skip_human_id) continue;
        if (auto t = ray_circle_hit(origin, dir, h.pose.position(), h.body_radius); t && *t < best)
            best = *t;
    }
    return best;
}

inline LidarScan raycast_lidar(const std::vector<Segment>& walls,
                               const std::vector<HumanAgent>& humans, const Pose2D& robot,
                               const LidarConfig& cfg, int tick = 0) {
    if (cfg.beams < 1) throw DomainError("raycast_lidar: beams must be >= 1");
    if (cfg.max_range <= 0.0) throw DomainError("raycast_lidar: max_range must be positive");
    LidarScan scan;
    scan.max_range = cfg.max_range;
    scan.tick = tick;
    scan.beam_angles.reserve(static_cast<size_t>(cfg.beams));
    scan.ranges.reserve(static_cast<size_t>(cfg.beams));
    for (int i = 0; i < cfg.beams; ++i) {
        const double rel =
            cfg.beams == 1 ? 0.0 : cfg.fov * (static_cast<double>(i) / (cfg.beams - 1) - 0.5);
        scan.beam_angles.push_back(rel);
        const double r = cast_ray(robot.position(), robot.theta + rel, walls, humans, cfg.max_range);
        scan.ranges.push_back(std::max(r, 1e-9));
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Visibility
//
// Sample points are placed on the target disc with a sunflower layout in
// antipodal pairs, so a straight occluder edge through the disc center splits
// the count exactly in half. Line-of-sight is blocked by wall segments and by
// other human bodies.
// ---------------------------------------------------------------------------

inline std::vector<Vec2> disc_sample_points(const Vec2& center, double radius, int samples) {
    std::vector<Vec2> pts;
    const int pairs = std::max(4, samples / 2);
    pts.reserve(static_cast<size_t>(pairs) * 2);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < pairs; ++i) {
        const double r = radius * 0.98 * std::sqrt((i + 0.5) / pairs);
        const double a = golden * i + 0.31;  // offset keeps points off axis lines
        const Vec2 d{r * std::cos(a), r * std::sin(a)};
        pts.push_back(center + d);
        pts.push_back(center - d);
    }
    return pts;
}

inline bool in_camera_fov(const Pose2D& robot, const Vec2& target, const CameraConfig& cam) {
    const Vec2 rel = target - robot.position();
    const double d = rel.norm();
    if (d > cam.range) return false;
    const double bearing = normalize_angle(std::atan2(rel.y, rel.x) - robot.theta);
    return std::abs(bearing) <= 0.5 * cam.fov;
}

inline bool line_of_sight_clear(const Vec2& from, const Vec2& to, const std::vector<Segment>& walls,
                                const std::vector<HumanAgent>& humans, int target_id) {
    const Segment los{from, to};
    for (const auto& s : walls)
        if (segments_cross(los, s)) return false;
    for (const auto& h : humans) {
        if (h.id == target_id) continue;
        if (segment_intersects_circle(los, h.pose.position(), h.body_radius)) return false;
    }
    return true;
}

inline double visible_fraction(const HumanAgent& target, const Pose2D& robot,
                               const std::vector<Segment>& walls,
                               const std::vector<HumanAgent>& humans, const CameraConfig& cam,
                               int samples = 64) {
    if (samples < 8) throw DomainError("visible_fraction: need at least 8 samples");
    if (!in_camera_fov(robot, target.pose.position(), cam)) return 0.0;
    const auto pts = disc_sample_points(target.pose.position(), target.body_radius, samples);
    int visible = 0;
    for (const auto& p : pts)
        if (line_of_sight_clear(robot.position(), p, walls, humans, target.id)) ++visible;
    return static_cast<double>(visible) / static_cast<double>(pts.size());
}

// ---------------------------------------------------------------------------
// Mask rendering
//
// The viewport is a square angular raster over the camera cone: columns map
// azimuth, rows map elevation against a nominal body height. A column shows
// the target when the frontmost hit along that azimuth is the target disc
// (modal); amodal rendering ignores every occluder.
// ---------------------------------------------------------------------------

inline SegMask render_mask(const HumanAgent& target, const Pose2D& robot,
                           const std::vector<Segment>& walls,
                           const std::vector<HumanAgent>& humans, const CameraConfig& cam,
                           bool amodal = false, int tick = 0) {
    if (cam.mask_resolution < 16) throw DomainError("render_mask: resolution must be >= 16");
    const int res = cam.mask_resolution;
    SegMask mask;
    mask.width = res;
    mask.height = res;
    mask.human_id = target.id;
    mask.tick = tick;
    mask.values.assign(static_cast<size_t>(res) * res, 0);

    if (!in_camera_fov(robot, target.pose.position(), cam)) return mask;

    const Vec2 origin = robot.position();
    for (int c = 0; c < res; ++c) {
        // Left image edge = left of robot (positive azimuth).
        const double azimuth = cam.fov * (0.5 - (c + 0.5) / res);
        const double angle = robot.theta + azimuth;
        const Vec2 dir{std::cos(angle), std::sin(angle)};
        const auto hit = ray_circle_hit(origin, dir, target.pose.position(), target.body_radius);
        if (!hit || *hit > cam.range) continue;
        if (!amodal) {
            const double front =
                cast_ray(origin, angle, walls, humans, cam.range, target.id);
            if (front < *hit - 1e-9) continue;  // something stands in front
        }
        const double half_angle = std::atan2(cam.body_half_height, std::max(*hit, 1e-6));
        for (int r = 0; r < res; ++r) {
            const double elevation = cam.fov * ((r + 0.5) / res - 0.5);
            if (std::abs(elevation) <= half_angle)
                mask.values[static_cast<size_t>(r) * res + c] = 1;
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Debug dumps
// ---------------------------------------------------------------------------

inline void write_pgm(const SegMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_pgm: cannot open " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    for (uint8_t v : mask.values) out.put(v ? static_cast<char>(255) : 0);
}

inline void write_scan_csv(const LidarScan& scan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_scan_csv: cannot open " + path);
    out << "beam,angle,range\n";
    for (size_t i = 0; i < scan.ranges.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.9f\n", i, scan.beam_angles[i], scan.ranges[i]);
        out << buf;
    }
}

}  // namespace seeknet
