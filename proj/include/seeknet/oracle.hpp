#pragma once

// Synthetic amodal detection channel. Confidence is a monotone function of
// visibility and proximity plus Gaussian noise; the predicted class is the
// true class with probability equal to the confidence. Tracks are maintained
// by greedy nearest-neighbour association on estimated positions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/percept.hpp"
#include "seeknet/sensing.hpp"
#include "seeknet/world.hpp"

namespace seeknet {

struct OracleConfig {
    double c_min = 0.2;
    double c_max = 1.0;
    double d_max = 8.0;          // meters; confidence hits c_min at this range
    double noise_sigma = 0.05;   // confidence units
    double lambda = 0.6;         // weak-detection threshold
    double pos_noise_sigma = 0.05;  // meters, on the estimated position
    int visibility_samples = 64;

    void validate() const {
        if (!(0.0 <= c_min && c_min < c_max && c_max <= 1.0))
            throw DomainError("oracle: need 0 <= c_min < c_max <= 1");
        if (!(d_max > 0.0)) throw DomainError("oracle: d_max must be positive");
        if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("oracle: lambda must be in (0,1)");
    }
};

struct DetectionRecord {
    int human_id = -1;        // ground truth; hidden from the policy
    double confidence = 0.0;  // [0, 1]
    std::string predicted_class;
    bool correct = false;     // predicted_class == true class
    BBox bbox;                // viewport pixels
    double visible_frac = 0.0;
    Vec2 est_pos;             // noisy world-frame position estimate
    int tick = 0;
};

struct Track {
    int track_id = -1;
    std::vector<DetectionRecord> history;
    Pose2D est_pose;
    int birth_human_id = -1;
    int age = 0;
    int misses = 0;

    const DetectionRecord& latest() const { return history.back(); }
};

struct TrackerConfig {
    double gating_radius = 1.0;  // meters
    int max_misses = 10;
};

// Noise-free part of the confidence law.
inline double confidence_mean(double visible_frac, double dist, const OracleConfig& cfg) {
    return cfg.c_min +
           (cfg.c_max - cfg.c_min) * visible_frac * std::max(0.0, 1.0 - dist / cfg.d_max);
}

inline double confidence_model(double visible_frac, double dist, const OracleConfig& cfg,
                               Rng& rng) {
    const double c = confidence_mean(visible_frac, dist, cfg) +
                     (cfg.noise_sigma > 0.0 ? rng.gaussian(0.0, cfg.noise_sigma) : 0.0);
    return std::clamp(c, 0.0, 1.0);
}

// Viewport-pixel box of the (amodal) target extent, for the record only.
inline BBox viewport_bbox(const HumanAgent& h, const Pose2D& robot, const CameraConfig& cam) {
    const Vec2 rel = h.pose.position() - robot.position();
    const double d = std::max(rel.norm(), h.body_radius + 1e-6);
    const double bearing = normalize_angle(std::atan2(rel.y, rel.x) - robot.theta);
    const double half_w = std::asin(std::clamp(h.body_radius / d, 0.0, 1.0));
    const double half_h = std::atan2(cam.body_half_height, d);
    const int res = cam.mask_resolution;
    const auto col = [&](double az) { return (0.5 - az / cam.fov) * res; };
    const auto row = [&](double el) { return (el / cam.fov + 0.5) * res; };
    BBox b;
    b.xmin = std::clamp(col(bearing + half_w), 0.0, static_cast<double>(res) - 1.0);
    b.xmax = std::clamp(col(bearing - half_w), 1.0, static_cast<double>(res));
    b.ymin = std::clamp(row(-half_h), 0.0, static_cast<double>(res) - 1.0);
    b.ymax = std::clamp(row(half_h), 1.0, static_cast<double>(res));
    if (b.xmax <= b.xmin) b.xmax = b.xmin + 1.0;
    if (b.ymax <= b.ymin) b.ymax = b.ymin + 1.0;
    return b;
}

// One record per human with nonzero visibility inside the camera cone.
// Humans are visited in id order; each visible human consumes a fixed number
// of rng draws so streams stay aligned across configurations.
inline std::vector<DetectionRecord> detect(const std::vector<HumanAgent>& humans,
                                           const Pose2D& robot,
                                           const std::vector<Segment>& walls,
                                           const Scenario& sc, const CameraConfig& cam,
                                           const OracleConfig& cfg, Rng& rng, int tick = 0) {
    cfg.validate();
    std::vector<DetectionRecord> out;
    for (const auto& h : humans) {
        const double vis = visible_fraction(h, robot, walls, humans, cam, cfg.visibility_samples);
        if (vis <= 0.0) continue;
        const double dist = distance(h.pose.position(), robot.position());
        DetectionRecord rec;
        rec.human_id = h.id;
        rec.tick = tick;
        rec.visible_frac = vis;
        rec.confidence = confidence_model(vis, dist, cfg, rng);
        rec.est_pos = {h.pose.x + (cfg.pos_noise_sigma > 0.0 ? rng.gaussian(0.0, cfg.pos_noise_sigma) : 0.0),
                       h.pose.y + (cfg.pos_noise_sigma > 0.0 ? rng.gaussian(0.0, cfg.pos_noise_sigma) : 0.0)};
        rec.bbox = viewport_bbox(h, robot, cam);

        // True class with probability equal to the confidence; otherwise a
        // uniform draw over the class set, so the correct rate at confidence
        // p over C classes is p + (1 - p) / C.
        const bool sure = rng.uniform() < rec.confidence;
        if (sure || sc.class_set.size() <= 1) {
            rec.predicted_class = h.true_class;
        } else {
            rec.predicted_class =
                sc.class_set[static_cast<size_t>(rng.uniform_index(sc.class_set.size()))];
        }
        rec.correct = rec.predicted_class == h.true_class;
        out.push_back(rec);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tracking
// ---------------------------------------------------------------------------

struct TrackerState {
    std::vector<Track> tracks;
    int next_track_id = 0;  // ids are never reused within an episode
};

inline void update_tracks(TrackerState& state, const std::vector<DetectionRecord>& detections,
                          const TrackerConfig& cfg) {
    if (cfg.gating_radius <= 0.0) throw DomainError("update_tracks: gating radius must be positive");

    struct Pair {
        double dist;
        size_t track;
        size_t det;
    };
    std::vector<Pair> pairs;
    for (size_t t = 0; t < state.tracks.size(); ++t) {
        for (size_t d = 0; d < detections.size(); ++d) {
            const double dist =
                distance(state.tracks[t].est_pose.position(), detections[d].est_pos);
            if (dist <= cfg.gating_radius) pairs.push_back({dist, t, d});
        }
    }
    // Globally nearest pair first; ties broken by (track, det) index.
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.track != b.track) return a.track < b.track;
        return a.det < b.det;
    });

    std::vector<char> track_used(state.tracks.size(), 0);
    std::vector<char> det_used(detections.size(), 0);
    for (const auto& p : pairs) {
        if (track_used[p.track] || det_used[p.det]) continue;
        track_used[p.track] = 1;
        det_used[p.det] = 1;
        Track& tr = state.tracks[p.track];
        tr.history.push_back(detections[p.det]);
        tr.est_pose.x = detections[p.det].est_pos.x;
        tr.est_pose.y = detections[p.det].est_pos.y;
        tr.misses = 0;
    }

    for (size_t t = 0; t < state.tracks.size(); ++t) {
        state.tracks[t].age += 1;
        if (!track_used[t]) state.tracks[t].misses += 1;
    }
    // Retire stale tracks.
    state.tracks.erase(std::remove_if(state.tracks.begin(), state.tracks.end(),
                                      [&](const Track& t) { return t.misses > cfg.max_misses; }),
                       state.tracks.end());

    // Unmatched detections spawn tracks.
    for (size_t d = 0; d < detections.size(); ++d) {
        if (det_used[d]) continue;
        Track tr;
        tr.track_id = state.next_track_id++;
        tr.history.push_back(detections[d]);
        tr.est_pose.x = detections[d].est_pos.x;
        tr.est_pose.y = detections[d].est_pos.y;
        tr.birth_human_id = detections[d].human_id;
        tr.age = 1;
        tr.misses = 0;
        state.tracks.push_back(tr);
    }
}

// Weakest track under the threshold, ties to the lowest track id.
inline const Track* select_target(const std::vector<Track>& tracks, double lambda) {
    const Track* best = nullptr;
    for (const auto& t : tracks) {
        if (t.history.empty()) continue;
        const double c = t.latest().confidence;
        if (c >= lambda) continue;
        if (!best || c < best->latest().confidence ||
            (c == best->latest().confidence && t.track_id < best->track_id))
            best = &t;
    }
    return best;
}

}  // namespace seeknet
