#pragma once

// Episode engine: sense -> detect -> track -> select target -> act -> step,
// with the reward finalized one tick later so the confidence-improvement term
// compares against the post-step detection. Episodes end on collision,
// arrival (pursued confidence reaching lambda) or the horizon.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/oracle.hpp"
#include "seeknet/planner.hpp"
#include "seeknet/policy.hpp"
#include "seeknet/reward.hpp"
#include "seeknet/sensing.hpp"
#include "seeknet/world.hpp"

namespace seeknet {

struct SimConfig {
    LidarConfig lidar;
    CameraConfig camera;
    OracleConfig oracle;
    TrackerConfig tracker;
    RewardConfig reward;
    PurePursuitConfig pursuit;
    int mask_history = 3;
    // The runner holds the current target unless a rival weak track undercuts
    // its confidence by this margin; keeps noisy argmin flips from thrashing
    // the pursuit goal.
    double target_hysteresis = 0.1;
};

// ---------------------------------------------------------------------------
// Episode log. Everything the metrics need is written here, so reports are
// pure functions of logs.
// ---------------------------------------------------------------------------

struct DetLogEntry {
    int human_id = -1;
    int track_id = -1;
    double confidence = 0.0;
    std::string predicted_class;
    bool correct = false;
    double x = 0.0, y = 0.0;  // estimated position
    double visible_frac = 0.0;
};

struct TickRecord {
    int tick = 0;
    Pose2D robot;
    Velocity cmd;
    int action_index = -1;  // -1 on the terminal partial tick
    double reward = 0.0;
    int pursued_track = -1;
    int pursued_human = -1;
    double pursued_conf = -1.0;
    bool collided = false;
    bool arrived = false;
    std::vector<DetLogEntry> detections;
};

struct PursuitEvent {
    int track_id = -1;
    int human_id = -1;
    int start_tick = 0;
};

struct FirstDetection {
    int human_id = -1;
    int tick = 0;
    bool correct = false;
    double iou = 0.0;  // modal vs ground-truth amodal at first detection
};

struct EpisodeLog {
    uint64_t scenario_seed = 0;
    uint64_t episode_seed = 0;
    std::string policy_name;
    int horizon = 0;
    double dt = 0.1;
    int human_count = 0;
    std::vector<TickRecord> ticks;
    std::vector<PursuitEvent> pursuits;
    std::vector<FirstDetection> first_detections;
    std::string terminal_cause;  // collision | arrival | horizon
    double total_reward = 0.0;
    double mean_conf_delta = 0.0;  // mean p_curr - p_prev over pursuing ticks
};

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

class EpisodeRunner {
public:
    EpisodeRunner(const Scenario& sc, const SimConfig& cfg, uint64_t episode_seed,
                  std::string policy_name = "")
        : sc_(sc),
          cfg_(cfg),
          walls_(sc.wall_segments()),
          humans_(sc.humans),
          oracle_rng_(Rng::stream(episode_seed, 0xdec7)),
          policy_rng_(Rng::stream(episode_seed, 0xac70)) {
        cfg_.oracle.validate();
        robot_.pose = sc.robot_start;
        robot_.radius = sc.robot_radius;
        log_.scenario_seed = sc.rng_seed;
        log_.episode_seed = episode_seed;
        log_.policy_name = std::move(policy_name);
        log_.horizon = sc.duration;
        log_.dt = sc.dt;
        log_.human_count = static_cast<int>(sc.humans.size());
        mask_stack_.history = cfg_.mask_history;
        mask_stack_.reset(cfg_.camera.mask_resolution);
    }

    bool done() const { return done_; }
    const PolicyObs& obs() const { return obs_; }
    const RobotState& robot() const { return robot_; }
    const std::vector<HumanAgent>& humans() const { return humans_; }
    const std::vector<Segment>& walls() const { return walls_; }
    Rng& policy_rng() { return policy_rng_; }
    const EpisodeLog& log() const { return log_; }
    bool pursuing() const { return pursued_track_id_ >= 0; }
    Vec2 pursued_goal() const { return goal_; }
    const LidarScan* latest_scan() const {
        return lidar_stack_.scans.empty() ? nullptr : &lidar_stack_.scans.back();
    }
    const SegMask* latest_mask() const { return mask_stack_.at(cfg_.mask_history - 1); }

    // Sense, finalize the previous transition, update tracks, select the
    // pursuit target and build the observation. Sets done() on episode end.
    void begin_tick() {
        const LidarScan scan = raycast_lidar(walls_, humans_, robot_.pose, cfg_.lidar, tick_);
        lidar_stack_.push(scan);
        const std::vector<DetectionRecord> dets =
            detect(humans_, robot_.pose, walls_, sc_, cfg_.camera, cfg_.oracle, oracle_rng_, tick_);

        // Finalize the reward for the action applied last tick.
        bool arrived = false;
        if (pending_) {
            RewardContext ctx;
            ctx.collided = pending_->collided;
            ctx.w_cmd = pending_->w_cmd;
            ctx.pursuing = pending_->pursuing;
            ctx.has_goal = pending_->pursuing;
            ctx.goal_dist_prev = pending_->goal_dist_prev;
            ctx.goal_dist_curr = pending_->goal_dist_curr;
            if (pending_->pursuing) {
                ctx.p_prev = pending_->p_prev;
                ctx.p_curr = pending_->p_prev;  // stale when occluded this tick
                for (const auto& d : dets)
                    if (d.human_id == pending_->human_id) ctx.p_curr = d.confidence;
                arrived = ctx.p_curr >= cfg_.oracle.lambda;
                ctx.arrived = arrived;
                conf_delta_sum_ += ctx.p_curr - ctx.p_prev;
                conf_delta_count_ += 1;
            }
            const double r = reward(ctx, cfg_.reward);
            TickRecord& rec = log_.ticks.back();
            rec.reward = r;
            rec.collided = pending_->collided;
            rec.arrived = arrived;
            log_.total_reward += r;
            last_context_ = ctx;
            if (pending_->collided) {
                finish("collision", dets);
                return;
            }
            if (arrived) {
                finish("arrival", dets);
                return;
            }
            pending_.reset();
        }
        if (tick_ >= sc_.duration) {
            finish("horizon", dets);
            return;
        }

        update_tracks(tracker_, dets, cfg_.tracker);
        note_first_detections(dets);

        TickRecord rec;
        rec.tick = tick_;
        rec.robot = robot_.pose;
        rec.detections = detection_entries(dets);

        const Track* candidate = select_target(tracker_.tracks, cfg_.oracle.lambda);
        const Track* current = nullptr;
        if (pursued_track_id_ >= 0) {
            for (const auto& t : tracker_.tracks)
                if (t.track_id == pursued_track_id_ && !t.history.empty() &&
                    t.latest().confidence < cfg_.oracle.lambda)
                    current = &t;
        }
        const Track* target = candidate;
        if (current) {
            target = current;
            if (candidate && candidate->track_id != current->track_id &&
                candidate->latest().confidence <
                    current->latest().confidence - cfg_.target_hysteresis)
                target = candidate;
        }
        if (target) {
            if (target->track_id != pursued_track_id_) {
                mask_stack_.reset(cfg_.camera.mask_resolution);
                log_.pursuits.push_back({target->track_id, target->latest().human_id, tick_});
            }
            pursued_track_id_ = target->track_id;
            pursued_human_id_ = target->latest().human_id;
            pursued_conf_ = target->latest().confidence;
            goal_ = target->est_pose.position();
            rec.pursued_track = pursued_track_id_;
            rec.pursued_human = pursued_human_id_;
            rec.pursued_conf = pursued_conf_;
        } else {
            pursued_track_id_ = -1;
            pursued_human_id_ = -1;
        }
        log_.ticks.push_back(std::move(rec));

        build_obs();
    }

    // Apply a clamped velocity command and advance the world by one tick.
    void apply(const Velocity& cmd, int action_index = -1) {
        const Velocity u = clamp_velocity(cmd);
        TickRecord& rec = log_.ticks.back();
        rec.cmd = u;
        rec.action_index = action_index;

        const Vec2 before = robot_.pose.position();
        robot_ = step_robot(robot_, u, sc_.dt);
        humans_ = step_humans(humans_, walls_, sc_.dt);
        const Vec2 after = robot_.pose.position();
        yield_humans_around_robot(humans_, after, robot_.radius, walls_);

        Pending p;
        p.collided = check_collision(robot_, humans_, walls_) ||
                     swept_wall_collision(before, after, robot_.radius, walls_);
        p.w_cmd = u.w;
        p.pursuing = pursued_track_id_ >= 0;
        p.human_id = pursued_human_id_;
        p.p_prev = pursued_conf_;
        p.goal_dist_prev = distance(before, goal_);
        p.goal_dist_curr = distance(after, goal_);
        pending_ = p;
        ++tick_;
    }

    const RewardContext& last_reward_context() const { return last_context_; }

private:
    struct Pending {
        bool collided = false;
        double w_cmd = 0.0;
        bool pursuing = false;
        int human_id = -1;
        double p_prev = 0.0;
        double goal_dist_prev = 0.0;
        double goal_dist_curr = 0.0;
    };

    void finish(const std::string& cause, const std::vector<DetectionRecord>& dets) {
        // Terminal partial tick: keeps the closing detections visible to the
        // metrics without an action attached.
        update_tracks(tracker_, dets, cfg_.tracker);
        note_first_detections(dets);
        TickRecord rec;
        rec.tick = tick_;
        rec.robot = robot_.pose;
        rec.detections = detection_entries(dets);
        rec.pursued_track = pursued_track_id_;
        rec.pursued_human = pursued_human_id_;
        if (pursued_track_id_ >= 0) rec.pursued_conf = pursued_conf_;
        log_.ticks.push_back(std::move(rec));
        log_.terminal_cause = cause;
        log_.mean_conf_delta = conf_delta_count_ > 0 ? conf_delta_sum_ / conf_delta_count_ : 0.0;
        done_ = true;
    }

    std::vector<DetLogEntry> detection_entries(const std::vector<DetectionRecord>& dets) {
        // Track ids for the current tick's detections, read back from the
        // tracker (every detection either updated or spawned a track).
        std::vector<DetLogEntry> out;
        for (const auto& d : dets) {
            DetLogEntry e;
            e.human_id = d.human_id;
            e.confidence = d.confidence;
            e.predicted_class = d.predicted_class;
            e.correct = d.correct;
            e.x = d.est_pos.x;
            e.y = d.est_pos.y;
            e.visible_frac = d.visible_frac;
            for (const auto& t : tracker_.tracks) {
                if (!t.history.empty() && t.latest().tick == d.tick &&
                    t.latest().human_id == d.human_id && t.latest().est_pos.x == d.est_pos.x &&
                    t.latest().est_pos.y == d.est_pos.y) {
                    e.track_id = t.track_id;
                    break;
                }
            }
            out.push_back(std::move(e));
        }
        return out;
    }

    void note_first_detections(const std::vector<DetectionRecord>& dets) {
        for (const auto& d : dets) {
            if (seen_humans_.count(d.human_id)) continue;
            seen_humans_.insert(d.human_id);
            FirstDetection fd;
            fd.human_id = d.human_id;
            fd.tick = tick_;
            fd.correct = d.correct;
            const HumanAgent& h = humans_[static_cast<size_t>(d.human_id)];
            const SegMask modal = render_mask(h, robot_.pose, walls_, humans_, cfg_.camera, false, tick_);
            const SegMask amodal = render_mask(h, robot_.pose, walls_, humans_, cfg_.camera, true, tick_);
            fd.iou = mask_iou(modal.values, amodal.values);
            log_.first_detections.push_back(fd);
        }
    }

    void build_obs() {
        const int res = cfg_.camera.mask_resolution;
        if (pursued_track_id_ >= 0) {
            const HumanAgent& h = humans_[static_cast<size_t>(pursued_human_id_)];
            mask_stack_.push(render_mask(h, robot_.pose, walls_, humans_, cfg_.camera, false, tick_));
        }
        obs_.mask = Tensor({cfg_.mask_history, res, res});
        obs_.mask_all_zero = true;
        for (int i = 0; i < cfg_.mask_history; ++i) {
            const SegMask* m = pursued_track_id_ >= 0 ? mask_stack_.at(i) : nullptr;
            if (!m) continue;
            double* dst = obs_.mask.data() + static_cast<size_t>(i) * res * res;
            for (size_t p = 0; p < m->values.size(); ++p) {
                dst[p] = m->values[p];
                if (m->values[p]) obs_.mask_all_zero = false;
            }
        }

        const int beams = cfg_.lidar.beams;
        obs_.lidar = Tensor({3, beams});
        for (int f = 0; f < 3; ++f) {
            const LidarScan& s = lidar_stack_.scans[static_cast<size_t>(f)];
            for (int b = 0; b < beams; ++b)
                obs_.lidar.v[static_cast<size_t>(f) * beams + b] =
                    s.ranges[static_cast<size_t>(b)] / cfg_.lidar.max_range;
        }

        obs_.v_prev = robot_.velocity.v;
        obs_.w_prev = robot_.velocity.w;
        if (pursued_track_id_ >= 0) {
            const Vec2 rel = goal_ - robot_.pose.position();
            const double rho = rel.norm();
            const double bearing = normalize_angle(std::atan2(rel.y, rel.x) - robot_.pose.theta);
            obs_.goal_rho = rho / 10.0;
            obs_.goal_sin = std::sin(bearing);
            obs_.goal_cos = std::cos(bearing);
        } else {
            obs_.goal_rho = 0.0;
            obs_.goal_sin = 0.0;
            obs_.goal_cos = 0.0;
        }
    }

    Scenario sc_;
    SimConfig cfg_;
    std::vector<Segment> walls_;
    std::vector<HumanAgent> humans_;
    RobotState robot_;
    Rng oracle_rng_;
    Rng policy_rng_;
    LidarStack lidar_stack_;
    SegMaskStack mask_stack_;
    TrackerState tracker_;
    std::set<int> seen_humans_;
    PolicyObs obs_;
    EpisodeLog log_;
    std::optional<Pending> pending_;
    RewardContext last_context_;
    int tick_ = 0;
    bool done_ = false;
    int pursued_track_id_ = -1;
    int pursued_human_id_ = -1;
    double pursued_conf_ = 0.0;
    Vec2 goal_;
    double conf_delta_sum_ = 0.0;
    int conf_delta_count_ = 0;
};

// ---------------------------------------------------------------------------
// Policy adapters
// ---------------------------------------------------------------------------

struct PolicyDecision {
    Velocity cmd;
    int action_index = -1;
};

using PolicyFn = std::function<PolicyDecision(EpisodeRunner&)>;

inline PolicyFn make_passive_policy() {
    return [](EpisodeRunner&) { return PolicyDecision{passive_policy(), -1}; };
}

inline PolicyFn make_random_policy(ActionSpace actions) {
    return [actions](EpisodeRunner& r) {
        const int idx =
            static_cast<int>(r.policy_rng().uniform_index(static_cast<uint64_t>(actions.size())));
        return PolicyDecision{actions.at(idx), idx};
    };
}

// Shared grid per scenario; replans every tick toward the pursued estimate.
// A robot standing inside the inflation band plans from the nearest free
// cell; physically it is collision-free there.
inline PolicyFn make_shortest_path_policy(std::shared_ptr<const OccupancyGrid> grid,
                                          PurePursuitConfig cfg = {},
                                          std::vector<Vec2>* path_out = nullptr) {
    return [grid, cfg, path_out](EpisodeRunner& r) {
        if (!r.pursuing()) return PolicyDecision{passive_policy(), -1};
        RobotState st = r.robot();
        auto [cx, cy] = grid->cell_of(st.pose.position());
        if (!grid->in_bounds(cx, cy)) return PolicyDecision{Velocity{0.0, kYawRateMax}, -1};
        if (grid->is_occupied(cx, cy)) {
            const auto free = nearest_free_cell(*grid, st.pose.position());
            if (!free) return PolicyDecision{Velocity{0.0, kYawRateMax}, -1};
            st.pose.x = free->x;
            st.pose.y = free->y;
        }
        return PolicyDecision{shortest_path_policy(*grid, st, r.pursued_goal(), cfg, path_out), -1};
    };
}

inline PolicyFn make_network_policy(const PolicyNetwork& net, ActionSpace actions) {
    return [&net, actions](EpisodeRunner& r) {
        const PolicyNetwork::Output out = net.forward(r.obs(), nullptr);
        const int idx = sample_action(out.probs, r.policy_rng());
        return PolicyDecision{actions.at(idx), idx};
    };
}

inline EpisodeLog rollout(const Scenario& sc, const SimConfig& cfg, const PolicyFn& policy,
                          uint64_t episode_seed, const std::string& policy_name = "") {
    EpisodeRunner runner(sc, cfg, episode_seed, policy_name);
    while (true) {
        runner.begin_tick();
        if (runner.done()) break;
        const PolicyDecision d = policy(runner);
        runner.apply(d.cmd, d.action_index);
    }
    return runner.log();
}

}  // namespace seeknet
