#pragma once

// Policy-gradient training: advantage actor-critic with single-step returns,
// a learned value baseline sharing the encoders, and RMSProp updates. The
// trainer is generic over a small env interface so the pursuit task and the
// beacon toy task share the same machinery. Also hosts the finite-difference
// gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/policy.hpp"
#include "seeknet/rollout.hpp"

namespace seeknet {

// ---------------------------------------------------------------------------
// Compact per-tick observation storage so whole batches fit in memory.
// ---------------------------------------------------------------------------

struct CompactObs {
    std::vector<uint8_t> mask;
    bool mask_all_zero = true;
    std::vector<float> lidar;
    float feats[5] = {0, 0, 0, 0, 0};

    static CompactObs from(const PolicyObs& o) {
        CompactObs c;
        c.mask_all_zero = o.mask_all_zero;
        if (!o.mask_all_zero) {
            c.mask.resize(o.mask.size());
            for (size_t i = 0; i < o.mask.size(); ++i)
                c.mask[i] = o.mask.v[i] != 0.0 ? 1 : 0;
        }
        c.lidar.resize(o.lidar.size());
        for (size_t i = 0; i < o.lidar.size(); ++i) c.lidar[i] = static_cast<float>(o.lidar.v[i]);
        c.feats[0] = static_cast<float>(o.v_prev);
        c.feats[1] = static_cast<float>(o.w_prev);
        c.feats[2] = static_cast<float>(o.goal_rho);
        c.feats[3] = static_cast<float>(o.goal_sin);
        c.feats[4] = static_cast<float>(o.goal_cos);
        return c;
    }

    PolicyObs expand(const PolicyArch& arch) const {
        PolicyObs o;
        o.mask = Tensor({arch.mask_hist, arch.mask_res, arch.mask_res});
        o.mask_all_zero = mask_all_zero;
        if (!mask_all_zero)
            for (size_t i = 0; i < mask.size(); ++i) o.mask.v[i] = mask[i];
        o.lidar = Tensor({arch.lidar_frames, arch.lidar_beams});
        for (size_t i = 0; i < lidar.size(); ++i) o.lidar.v[i] = lidar[i];
        o.v_prev = feats[0];
        o.w_prev = feats[1];
        o.goal_rho = feats[2];
        o.goal_sin = feats[3];
        o.goal_cos = feats[4];
        return o;
    }
};

// ---------------------------------------------------------------------------
// Env interface for training
// ---------------------------------------------------------------------------

struct EnvStep {
    double reward = 0.0;
    bool done = false;
};

class TrainEnv {
public:
    virtual ~TrainEnv() = default;
    virtual void reset(uint64_t episode_seed) = 0;
    virtual const PolicyObs& obs() const = 0;
    virtual EnvStep step(int action_index) = 0;
    // Diagnostics for learning curves.
    virtual bool episode_collided() const { return false; }
    virtual double episode_conf_delta() const { return 0.0; }
};

// Pursuit task over a scenario suite, scenarios visited round-robin.
class PursuitEnv : public TrainEnv {
public:
    PursuitEnv(std::vector<Scenario> scenarios, SimConfig cfg, ActionSpace actions)
        : scenarios_(std::move(scenarios)), cfg_(cfg), actions_(actions) {
        if (scenarios_.empty()) throw ConfigError("PursuitEnv: need at least one scenario");
    }

    void reset(uint64_t episode_seed) override {
        const Scenario& sc = scenarios_[static_cast<size_t>(episode_index_ % scenarios_.size())];
        ++episode_index_;
        runner_ = std::make_unique<EpisodeRunner>(sc, cfg_, episode_seed, "train");
        runner_->begin_tick();
    }

    const PolicyObs& obs() const override { return runner_->obs(); }

    EnvStep step(int action_index) override {
        runner_->apply(actions_.at(action_index), action_index);
        runner_->begin_tick();
        EnvStep s;
        s.reward = runner_->log().ticks[runner_->log().ticks.size() - 2].reward;
        s.done = runner_->done();
        return s;
    }

    bool episode_collided() const override {
        return runner_ && runner_->log().terminal_cause == "collision";
    }
    double episode_conf_delta() const override {
        return runner_ ? runner_->log().mean_conf_delta : 0.0;
    }

private:
    std::vector<Scenario> scenarios_;
    SimConfig cfg_;
    ActionSpace actions_;
    std::unique_ptr<EpisodeRunner> runner_;
    size_t episode_index_ = 0;
};

// Toy task: spin toward a fixed beacon; dense reward is the per-tick
// reduction in absolute heading error.
class BeaconEnv : public TrainEnv {
public:
    BeaconEnv(const PolicyArch& arch, int horizon = 25)
        : arch_(arch), horizon_(horizon) {
        obs_.mask = Tensor({arch.mask_hist, arch.mask_res, arch.mask_res});
        obs_.mask_all_zero = true;
        obs_.lidar = Tensor({arch.lidar_frames, arch.lidar_beams});
        for (auto& v : obs_.lidar.v) v = 1.0;
    }

    void reset(uint64_t episode_seed) override {
        Rng rng = Rng::stream(episode_seed, 0xbea0);
        robot_.pose = make_pose(0.0, 0.0, rng.uniform(-kPi, kPi));
        robot_.velocity = {0.0, 0.0};
        const double bearing = rng.uniform(-kPi, kPi);
        beacon_ = {3.0 * std::cos(bearing), 3.0 * std::sin(bearing)};
        tick_ = 0;
        build_obs();
    }

    const PolicyObs& obs() const override { return obs_; }

    EnvStep step(int action_index) override {
        const ActionSpace actions = ActionSpace::make();
        const double err_before = std::abs(heading_error());
        robot_ = step_robot(robot_, actions.at(action_index), 0.1);
        const double err_after = std::abs(heading_error());
        ++tick_;
        build_obs();
        return {err_before - err_after, tick_ >= horizon_};
    }

    double heading_error() const {
        const Vec2 rel = beacon_ - robot_.pose.position();
        return normalize_angle(std::atan2(rel.y, rel.x) - robot_.pose.theta);
    }

private:
    void build_obs() {
        const Vec2 rel = beacon_ - robot_.pose.position();
        obs_.v_prev = robot_.velocity.v;
        obs_.w_prev = robot_.velocity.w;
        obs_.goal_rho = rel.norm() / 10.0;
        const double bearing = heading_error();
        obs_.goal_sin = std::sin(bearing);
        obs_.goal_cos = std::cos(bearing);
    }

    PolicyArch arch_;
    int horizon_;
    RobotState robot_;
    Vec2 beacon_;
    PolicyObs obs_;
    int tick_ = 0;
};

// ---------------------------------------------------------------------------
// RMSProp
// ---------------------------------------------------------------------------

struct OptimizerConfig {
    double lr = 0.00004;
    double eps = 0.00005;
    double decay = 0.99;
    double grad_clip = 5.0;  // global norm; 0 disables
};

class RMSProp {
public:
    explicit RMSProp(const OptimizerConfig& cfg = {}) : cfg_(cfg) {}

    const OptimizerConfig& config() const { return cfg_; }

    void step(PolicyNetwork& net) {
        double norm2 = 0.0;
        net.for_each_param([&](Param& p) {
            for (double g : p.grad.v) {
                if (!std::isfinite(g)) throw NumericError("optimizer: non-finite gradient");
                norm2 += g * g;
            }
        });
        double scale = 1.0;
        if (cfg_.grad_clip > 0.0) {
            const double norm = std::sqrt(norm2);
            if (norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;
        }
        size_t slot = 0;
        net.for_each_param([&](Param& p) {
            if (slot >= state_.size()) state_.emplace_back(p.grad.size(), 0.0);
            auto& sq = state_[slot++];
            for (size_t i = 0; i < p.grad.size(); ++i) {
                const double g = p.grad.v[i] * scale;
                sq[i] = cfg_.decay * sq[i] + (1.0 - cfg_.decay) * g * g;
                p.value.v[i] -= cfg_.lr * g / (std::sqrt(sq[i]) + cfg_.eps);
            }
        });
        net.bump_version();
    }

private:
    OptimizerConfig cfg_;
    std::vector<std::vector<double>> state_;
};

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct TrainConfig {
    int iterations = 200;
    int batch_episodes = 4;
    double gamma = 0.99;
    OptimizerConfig optimizer;
    double value_coef = 0.5;
    double entropy_coef = 0.1;  // xi
    bool normalize_advantages = true;
    uint64_t seed = 0;
    int checkpoint_interval = 0;  // iterations; 0 disables
    std::string checkpoint_dir;
};

struct IterationStats {
    int iteration = 0;
    double mean_return = 0.0;
    double collision_rate = 0.0;
    double mean_conf_delta = 0.0;
};

struct EpisodeSample {
    std::vector<CompactObs> obs;
    std::vector<int> actions;
    std::vector<double> rewards;
    bool collided = false;
    double conf_delta = 0.0;

    double total_reward() const {
        double s = 0.0;
        for (double r : rewards) s += r;
        return s;
    }
};

inline EpisodeSample collect_episode(TrainEnv& env, PolicyNetwork& net, uint64_t episode_seed,
                                     int max_ticks = 100000) {
    EpisodeSample ep;
    env.reset(episode_seed);
    Rng rng = Rng::stream(episode_seed, 0x9011c7);
    for (int t = 0; t < max_ticks; ++t) {
        const PolicyObs& obs = env.obs();
        const PolicyNetwork::Output out = net.forward(obs, nullptr);
        const int a = sample_action(out.probs, rng);
        ep.obs.push_back(CompactObs::from(obs));
        ep.actions.push_back(a);
        const EnvStep s = env.step(a);
        ep.rewards.push_back(s.reward);
        if (s.done) break;
    }
    ep.collided = env.episode_collided();
    ep.conf_delta = env.episode_conf_delta();
    return ep;
}

// One actor-critic update over a batch of episodes. Single-step targets:
// A_t = r_t + gamma * V(s_{t+1}) - V(s_t), terminal V treated as zero.
inline void apply_policy_gradient(PolicyNetwork& net, RMSProp& opt,
                                  const std::vector<EpisodeSample>& batch,
                                  const TrainConfig& cfg) {
    const PolicyArch& arch = net.arch();
    // Pass A: values per tick.
    std::vector<std::vector<double>> values(batch.size());
    std::vector<double> all_adv;
    for (size_t e = 0; e < batch.size(); ++e) {
        const auto& ep = batch[e];
        values[e].resize(ep.obs.size());
        for (size_t t = 0; t < ep.obs.size(); ++t) {
            const PolicyObs obs = ep.obs[t].expand(arch);
            values[e][t] = net.forward(obs, nullptr).value;
        }
        for (size_t t = 0; t < ep.obs.size(); ++t) {
            const double v_next = t + 1 < ep.obs.size() ? values[e][t + 1] : 0.0;
            all_adv.push_back(ep.rewards[t] + cfg.gamma * v_next - values[e][t]);
        }
    }
    if (all_adv.empty()) return;

    double mean = 0.0, sd = 1.0;
    if (cfg.normalize_advantages) {
        for (double a : all_adv) mean += a;
        mean /= static_cast<double>(all_adv.size());
        double var = 0.0;
        for (double a : all_adv) var += (a - mean) * (a - mean);
        var /= static_cast<double>(all_adv.size());
        sd = std::sqrt(var) + 1e-8;
    } else {
        mean = 0.0;
    }

    // Pass B: gradients.
    net.zero_grads();
    const double inv_n = 1.0 / static_cast<double>(all_adv.size());
    size_t flat = 0;
    double loss_acc = 0.0;
    for (size_t e = 0; e < batch.size(); ++e) {
        const auto& ep = batch[e];
        for (size_t t = 0; t < ep.obs.size(); ++t, ++flat) {
            const PolicyObs obs = ep.obs[t].expand(arch);
            PolicyNetwork::Trace trace;
            const PolicyNetwork::Output out = net.forward(obs, &trace);
            const int a = ep.actions[t];
            const double v_next = t + 1 < ep.obs.size() ? values[e][t + 1] : 0.0;
            const double target = ep.rewards[t] + cfg.gamma * v_next;
            const double raw_adv = target - values[e][t];
            const double adv = cfg.normalize_advantages ? (raw_adv - mean) / sd : raw_adv;

            const double h = entropy(out.probs);
            const double logp = std::log(std::max(out.probs[static_cast<size_t>(a)], 1e-300));
            loss_acc += (-adv * logp + cfg.value_coef * (out.value - target) * (out.value - target) -
                         cfg.entropy_coef * h) *
                        inv_n;

            std::vector<double> g_logits(out.probs.size());
            for (size_t i = 0; i < out.probs.size(); ++i) {
                const double onehot = static_cast<int>(i) == a ? 1.0 : 0.0;
                const double g_pg = -adv * (onehot - out.probs[i]);
                const double g_ent = cfg.entropy_coef * out.probs[i] * (std::log(std::max(out.probs[i], 1e-300)) + h);
                g_logits[i] = (g_pg + g_ent) * inv_n;
            }
            const double g_value = cfg.value_coef * 2.0 * (out.value - target) * inv_n;
            net.backward(trace, g_logits, g_value);
        }
    }
    if (!std::isfinite(loss_acc)) throw NumericError("training diverged: non-finite loss");
    opt.step(net);
}

struct TrainResult {
    std::vector<IterationStats> curves;
};

inline TrainResult train(PolicyNetwork& net, TrainEnv& env, const TrainConfig& cfg) {
    if (cfg.iterations < 1) throw ConfigError("train: iterations must be >= 1");
    RMSProp opt(cfg.optimizer);
    TrainResult res;
    uint64_t episode_counter = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<EpisodeSample> batch;
        int collisions = 0;
        double ret = 0.0, conf_delta = 0.0;
        for (int e = 0; e < cfg.batch_episodes; ++e) {
            batch.push_back(
                collect_episode(env, net, splitmix64(cfg.seed) + 1000003ull * episode_counter++));
            ret += batch.back().total_reward();
            collisions += batch.back().collided ? 1 : 0;
            conf_delta += batch.back().conf_delta;
        }
        apply_policy_gradient(net, opt, batch, cfg);

        IterationStats st;
        st.iteration = it;
        st.mean_return = ret / cfg.batch_episodes;
        st.collision_rate = static_cast<double>(collisions) / cfg.batch_episodes;
        st.mean_conf_delta = conf_delta / cfg.batch_episodes;
        res.curves.push_back(st);

        if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_dir.empty() &&
            (it + 1) % cfg.checkpoint_interval == 0) {
            save_checkpoint(net, cfg.checkpoint_dir + "/checkpoint_" + std::to_string(it + 1) +
                                     ".ckpt");
        }
    }
    return res;
}

inline void write_curves_csv(const std::vector<IterationStats>& curves, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_curves_csv: cannot open " + path);
    out << "iteration,mean_return,collision_rate,mean_conf_delta\n";
    for (const auto& c : curves) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f\n", c.iteration, c.mean_return,
                      c.collision_rate, c.mean_conf_delta);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Gradient checking: reverse-mode vs central finite differences on randomly
// chosen coordinates. Pairs below 1e-6 in both views count as matching; the
// rest are scored with a symmetric relative error.
// ---------------------------------------------------------------------------

struct GradCheckResult {
    double max_rel_err = 0.0;
    int coords_checked = 0;
};

inline GradCheckResult grad_check(PolicyNetwork& net, const std::function<double()>& loss_fn,
                                  const std::function<void()>& grad_fn, int coords, Rng& rng,
                                  double eps = 1e-5) {
    net.zero_grads();
    grad_fn();

    std::vector<Param*> params;
    net.for_each_param([&](Param& p) { params.push_back(&p); });
    std::vector<std::pair<size_t, size_t>> index;  // (param, offset)
    for (size_t pi = 0; pi < params.size(); ++pi)
        for (size_t i = 0; i < params[pi]->value.size(); ++i) index.emplace_back(pi, i);

    GradCheckResult res;
    for (int c = 0; c < coords; ++c) {
        const auto [pi, i] = index[static_cast<size_t>(rng.uniform_index(index.size()))];
        Param& p = *params[pi];
        const double saved = p.value.v[i];
        const double analytic = p.grad.v[i];
        p.value.v[i] = saved + eps;
        net.bump_version();
        const double up = loss_fn();
        p.value.v[i] = saved - eps;
        net.bump_version();
        const double down = loss_fn();
        p.value.v[i] = saved;
        net.bump_version();
        const double numeric = (up - down) / (2.0 * eps);

        double err = 0.0;
        if (std::abs(analytic) >= 1e-6 || std::abs(numeric) >= 1e-6)
            err = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
        res.max_rel_err = std::max(res.max_rel_err, err);
        ++res.coords_checked;
    }
    return res;
}

// Convenience full-policy gradient check on a random observation: the loss is
// the sampled-action log-likelihood plus the value output.
inline GradCheckResult grad_check_policy(const PolicyArch& arch, uint64_t seed, int coords = 200,
                                         double eps = 1e-5) {
    PolicyNetwork net(arch);
    net.init(seed);
    Rng rng = Rng::stream(seed, 0x6c6b);

    PolicyObs obs;
    obs.mask = Tensor({arch.mask_hist, arch.mask_res, arch.mask_res});
    for (auto& v : obs.mask.v) v = rng.uniform() < 0.2 ? 1.0 : 0.0;
    obs.mask_all_zero = false;
    obs.lidar = Tensor({arch.lidar_frames, arch.lidar_beams});
    for (auto& v : obs.lidar.v) v = rng.uniform(0.05, 1.0);
    obs.v_prev = rng.uniform(0.0, 1.0);
    obs.w_prev = rng.uniform(-1.0, 1.0);
    obs.goal_rho = rng.uniform(0.0, 1.0);
    const double bearing = rng.uniform(-kPi, kPi);
    obs.goal_sin = std::sin(bearing);
    obs.goal_cos = std::cos(bearing);
    const int action = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(arch.n_actions())));

    const auto loss_fn = [&]() {
        const auto out = net.forward(obs, nullptr);
        return -std::log(std::max(out.probs[static_cast<size_t>(action)], 1e-300)) + out.value;
    };
    const auto grad_fn = [&]() {
        PolicyNetwork::Trace tr;
        const auto out = net.forward(obs, &tr);
        std::vector<double> g_logits(out.probs.size());
        for (size_t i = 0; i < out.probs.size(); ++i) {
            const double onehot = static_cast<int>(i) == action ? 1.0 : 0.0;
            g_logits[i] = -(onehot - out.probs[i]);
        }
        net.backward(tr, g_logits, 1.0);
    };
    Rng coord_rng = Rng::stream(seed, 0xc00d);
    return grad_check(net, loss_fn, grad_fn, coords, coord_rng, eps);
}

// ---------------------------------------------------------------------------
// Beacon toy task (learning-signal check)
// ---------------------------------------------------------------------------

struct BeaconOutcome {
    double init_mean_return = 0.0;
    double trained_mean_return = 0.0;
};

inline double beacon_mean_return(PolicyNetwork& net, const PolicyArch& arch, uint64_t eval_seed,
                                 int episodes = 16, int horizon = 25) {
    BeaconEnv env(arch, horizon);
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        EpisodeSample ep = collect_episode(env, net, splitmix64(eval_seed) + 17ull * e);
        total += ep.total_reward();
    }
    return total / episodes;
}

inline BeaconOutcome train_beacon(uint64_t seed, int iterations = 200) {
    const PolicyArch arch = micro_arch();
    PolicyNetwork net(arch);
    net.init(seed);

    TrainConfig cfg;
    cfg.iterations = iterations;
    cfg.batch_episodes = 4;
    cfg.seed = seed;
    cfg.optimizer.lr = 0.01;  // toy-task scale; the pursuit default stays at 4e-5
    cfg.entropy_coef = 0.01;

    BeaconOutcome out;
    out.init_mean_return = beacon_mean_return(net, arch, seed ^ 0xe7a1ull);
    BeaconEnv env(arch, 25);
    train(net, env, cfg);
    out.trained_mean_return = beacon_mean_return(net, arch, seed ^ 0xe7a1ull);
    return out;
}

}  // namespace seeknet
