#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "seeknet/train.hpp"

using namespace seeknet;

namespace {

// One-armed-bandit env: a single zero observation, one step per episode,
// reward +1 for action 0 and -1 for action 1.
class BanditEnv : public TrainEnv {
public:
    explicit BanditEnv(const PolicyArch& arch) {
        obs_.mask = Tensor({arch.mask_hist, arch.mask_res, arch.mask_res});
        obs_.lidar = Tensor({arch.lidar_frames, arch.lidar_beams});
        obs_.mask_all_zero = true;
    }
    void reset(uint64_t) override {}
    const PolicyObs& obs() const override { return obs_; }
    EnvStep step(int action) override { return {action == 0 ? 1.0 : -1.0, true}; }

private:
    PolicyObs obs_;
};

PolicyArch bandit_arch() {
    PolicyArch a = micro_arch();
    a.v_levels = 2;  // two actions: (v=0, w=0) and (v=1, w=0)
    a.w_levels = 1;
    return a;
}

}  // namespace

TEST_CASE("optimizer defaults follow the training recipe") {
    const OptimizerConfig cfg;
    CHECK(cfg.lr == 0.00004);
    CHECK(cfg.eps == 0.00005);
}

TEST_CASE("policy gradient pushes probability onto the rewarded bandit arm") {
    const PolicyArch arch = bandit_arch();
    int successes = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        PolicyNetwork net(arch);
        net.init(seed);
        BanditEnv env(arch);
        TrainConfig cfg;
        cfg.iterations = 500;
        cfg.batch_episodes = 8;
        cfg.seed = seed;
        cfg.optimizer.lr = 0.05;
        cfg.normalize_advantages = false;
        cfg.entropy_coef = 0.0;
        train(net, env, cfg);
        const auto out = net.forward(env.obs(), nullptr);
        if (out.probs[0] > 0.9) ++successes;
    }
    CHECK(successes >= 9);
}

TEST_CASE("softmax log-likelihood gradient alone matches finite differences") {
    Rng rng(5);
    std::vector<double> logits(7);
    for (auto& z : logits) z = rng.uniform(-2, 2);
    const int action = 3;
    const auto loss = [&](const std::vector<double>& z) {
        return -std::log(softmax(z)[action]);
    };
    const auto probs = softmax(logits);
    const double eps = 1e-6;
    for (size_t i = 0; i < logits.size(); ++i) {
        const double analytic = -((static_cast<int>(i) == action ? 1.0 : 0.0) - probs[i]);
        auto up = logits, down = logits;
        up[i] += eps;
        down[i] -= eps;
        const double numeric = (loss(up) - loss(down)) / (2 * eps);
        CHECK(std::abs(analytic - numeric) /
                  std::max({std::abs(analytic), std::abs(numeric), 1e-9}) <
              1e-6);
    }
}

TEST_CASE("grad_check exact on a linear loss") {
    // A purely linear path: value head on a fixed observation, no ReLU kinks
    // crossed by the epsilon probes.
    const PolicyArch arch = micro_arch();
    PolicyNetwork net(arch);
    net.init(3);
    Rng rng(4);
    PolicyObs obs;
    obs.mask = Tensor({arch.mask_hist, arch.mask_res, arch.mask_res});
    for (auto& v : obs.mask.v) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
    obs.mask_all_zero = false;
    obs.lidar = Tensor({arch.lidar_frames, arch.lidar_beams});
    for (auto& v : obs.lidar.v) v = rng.uniform(0.1, 1.0);

    const auto loss_fn = [&]() { return net.forward(obs, nullptr).value; };
    const auto grad_fn = [&]() {
        PolicyNetwork::Trace tr;
        net.forward(obs, &tr);
        std::vector<double> g_logits(static_cast<size_t>(arch.n_actions()), 0.0);
        net.backward(tr, g_logits, 1.0);
    };
    Rng coord_rng(9);
    const auto res = grad_check(net, loss_fn, grad_fn, 150, coord_rng);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("training aborts on non-finite parameters") {
    const PolicyArch arch = bandit_arch();
    PolicyNetwork net(arch);
    net.init(1);
    net.for_each_param([](Param& p) {
        if (!p.value.v.empty()) p.value.v[0] = std::numeric_limits<double>::infinity();
    });
    net.bump_version();
    BanditEnv env(arch);
    TrainConfig cfg;
    cfg.iterations = 1;
    cfg.batch_episodes = 2;
    CHECK_THROWS_AS(train(net, env, cfg), NumericError);
}

TEST_CASE("beacon toy task improves the mean return") {
    // Two seeds here as a fast regression guard; the acceptance suite runs
    // the full ten-seed protocol.
    for (uint64_t seed : {1ull, 2ull}) {
        const BeaconOutcome out = train_beacon(seed, 120);
        INFO("seed " << seed << ": init " << out.init_mean_return << " trained "
                     << out.trained_mean_return);
        CHECK(out.trained_mean_return > out.init_mean_return);
    }
}

TEST_CASE("learning curves are recorded per iteration") {
    const PolicyArch arch = bandit_arch();
    PolicyNetwork net(arch);
    net.init(2);
    BanditEnv env(arch);
    TrainConfig cfg;
    cfg.iterations = 5;
    cfg.batch_episodes = 2;
    cfg.optimizer.lr = 0.01;
    cfg.normalize_advantages = false;
    const TrainResult res = train(net, env, cfg);
    REQUIRE(res.curves.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(res.curves[static_cast<size_t>(i)].iteration == i);
        CHECK(std::isfinite(res.curves[static_cast<size_t>(i)].mean_return));
    }
}
