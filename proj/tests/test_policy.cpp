#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "seeknet/policy.hpp"
#include "seeknet/reward.hpp"
#include "seeknet/train.hpp"

using namespace seeknet;

namespace {

PolicyObs random_obs(const PolicyArch& arch, uint64_t seed, bool zero_mask = false) {
    Rng rng(seed);
    PolicyObs obs;
    obs.mask = Tensor({arch.mask_hist, arch.mask_res, arch.mask_res});
    if (!zero_mask) {
        for (auto& v : obs.mask.v) v = rng.uniform() < 0.25 ? 1.0 : 0.0;
        obs.mask_all_zero = false;
    }
    obs.lidar = Tensor({arch.lidar_frames, arch.lidar_beams});
    for (auto& v : obs.lidar.v) v = rng.uniform(0.05, 1.0);
    obs.v_prev = rng.uniform(0, 1);
    obs.w_prev = rng.uniform(-1, 1);
    obs.goal_rho = rng.uniform(0, 1);
    obs.goal_sin = std::sin(rng.uniform(-kPi, kPi));
    obs.goal_cos = std::cos(std::asin(obs.goal_sin));
    return obs;
}

}  // namespace

TEST_CASE("action space spans the bounds box") {
    const ActionSpace as = ActionSpace::make();
    CHECK(as.size() == 25);
    for (int i = 0; i < as.size(); ++i) {
        const Velocity u = as.at(i);
        CHECK(u.v >= kVelMin);
        CHECK(u.v <= kVelMax);
        CHECK(u.w >= -kYawRateMax);
        CHECK(u.w <= kYawRateMax);
    }
    const Velocity stop = as.at(as.stop_index());
    CHECK(stop.v == 0.0);
    CHECK(stop.w == 0.0);
}

TEST_CASE("sample_action") {
    Rng rng(3);
    SECTION("one-hot distribution always returns its index") {
        std::vector<double> p(25, 0.0);
        p[7] = 1.0;
        for (int i = 0; i < 100; ++i) CHECK(sample_action(p, rng) == 7);
    }
    SECTION("uniform distribution is sampled uniformly") {
        const std::vector<double> p(25, 1.0 / 25.0);
        std::vector<int> counts(25, 0);
        const int n = 100000;
        for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(sample_action(p, rng))];
        for (int c : counts)
            CHECK(std::abs(c / static_cast<double>(n) - 0.04) < 0.005);
    }
    SECTION("fixed seed reproduces the sequence") {
        const std::vector<double> p(25, 1.0 / 25.0);
        Rng a(11), b(11);
        for (int i = 0; i < 50; ++i) CHECK(sample_action(p, a) == sample_action(p, b));
    }
}

TEST_CASE("policy network encoders") {
    const PolicyArch arch = micro_arch();

    SECTION("all-zero masks with zero biases embed to zero") {
        PolicyNetwork net(arch);
        net.init(5);
        // Zero every bias-like parameter; weights stay random.
        net.for_each_param([](Param& p) {
            if (p.name.find(".b") != std::string::npos ||
                p.name.find(".beta") != std::string::npos)
                p.value.zero();
        });
        net.bump_version();
        Tensor zero({arch.mask_hist, arch.mask_res, arch.mask_res});
        const auto z = net.encode_human(zero, nullptr);
        REQUIRE(static_cast<int>(z.size()) == arch.embed_dim);
        for (double v : z) CHECK(v == 0.0);
    }
    SECTION("deterministic forward for fixed params and input") {
        PolicyNetwork net(arch);
        net.init(9);
        const PolicyObs obs = random_obs(arch, 2);
        const auto a = net.forward(obs, nullptr);
        const auto b = net.forward(obs, nullptr);
        CHECK(a.logits == b.logits);
        CHECK(a.value == b.value);
    }
    SECTION("embedding lengths follow the architecture") {
        const PolicyArch desk = desk_arch();
        PolicyNetwork net(desk);
        net.init(1);
        Tensor mask({desk.mask_hist, desk.mask_res, desk.mask_res});
        CHECK(net.encode_human(mask, nullptr).size() == 32);
        Tensor lidar({desk.lidar_frames, desk.lidar_beams});
        CHECK(net.encode_lidar(lidar, nullptr).size() == 64);
    }
    SECTION("paper-preset lidar stage is 256 wide over 3x180 frames") {
        const PolicyArch paper = paper_arch();
        PolicyNetwork net(paper);
        net.init(1);
        Tensor lidar({3, 180});
        CHECK(net.encode_lidar(lidar, nullptr).size() == 256);
    }
    SECTION("zero lidar ranges with zero biases encode to zero") {
        PolicyNetwork net(arch);
        net.init(5);
        net.for_each_param([](Param& p) {
            if (p.name.find(".b") != std::string::npos) p.value.zero();
        });
        net.bump_version();
        Tensor lidar({arch.lidar_frames, arch.lidar_beams});
        for (double v : net.encode_lidar(lidar, nullptr)) CHECK(v == 0.0);
    }
    SECTION("shape mismatches are rejected") {
        PolicyNetwork net(arch);
        net.init(1);
        Tensor wrong({arch.mask_hist, arch.mask_res + 1, arch.mask_res});
        CHECK_THROWS_AS(net.encode_human(wrong, nullptr), ShapeError);
        Tensor wrong_lidar({arch.lidar_frames, arch.lidar_beams + 2});
        CHECK_THROWS_AS(net.encode_lidar(wrong_lidar, nullptr), ShapeError);
    }
}

TEST_CASE("policy head produces a proper distribution") {
    const PolicyArch arch = micro_arch();
    PolicyNetwork net(arch);
    net.init(21);

    SECTION("probabilities are non-negative and normalized") {
        for (uint64_t s = 0; s < 20; ++s) {
            const auto out = net.forward(random_obs(arch, s), nullptr);
            double sum = 0.0;
            for (double p : out.probs) {
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
    SECTION("zero parameters give the uniform distribution") {
        PolicyNetwork zero_net(arch);  // default zero weights
        const auto out = zero_net.forward(random_obs(arch, 3), nullptr);
        for (double p : out.probs) CHECK(std::abs(p - 1.0 / 25.0) < 1e-12);
    }
    SECTION("inference path with the zero-mask cache matches the trace path") {
        const PolicyObs obs = random_obs(arch, 4, true);
        const auto fast = net.forward(obs, nullptr);
        PolicyNetwork::Trace tr;
        const auto slow = net.forward(obs, &tr);
        for (size_t i = 0; i < fast.probs.size(); ++i)
            CHECK(std::abs(fast.probs[i] - slow.probs[i]) < 1e-15);
        CHECK(fast.value == slow.value);
    }
}

TEST_CASE("reward terms and composition") {
    const RewardConfig cfg;

    SECTION("collision alone is exactly r_collision") {
        RewardContext ctx;
        ctx.collided = true;
        CHECK(reward(ctx, cfg) == cfg.r_collision);
        CHECK(reward(ctx, cfg) == -15.0);
    }
    SECTION("spin penalty gates at 0.7") {
        RewardContext ctx;
        ctx.w_cmd = 0.9;
        CHECK(reward(ctx, cfg) == cfg.w_w * 0.9);
        for (double w = -0.7; w <= 0.7; w += 0.05) {
            RewardContext mild;
            mild.w_cmd = w;
            CHECK(spin_term(mild, cfg) == 0.0);
        }
    }
    SECTION("confidence term rewards improvement while pursuing") {
        RewardContext ctx;
        ctx.pursuing = true;
        ctx.p_prev = 0.50;
        ctx.p_curr = 0.60;
        ctx.w_cmd = 0.2;
        CHECK(reward(ctx, cfg) == 2.5);
        ctx.p_curr = 0.50;  // stagnation
        CHECK(reward(ctx, cfg) == -0.5);
        ctx.pursuing = false;
        CHECK(reward(ctx, cfg) == 0.0);  // no penalty when not pursuing
    }
    SECTION("arrival bonus and progress shaping") {
        RewardContext ctx;
        ctx.pursuing = true;
        ctx.arrived = true;
        ctx.p_prev = 0.5;
        ctx.p_curr = 0.7;
        ctx.has_goal = true;
        ctx.goal_dist_prev = 3.0;
        ctx.goal_dist_curr = 2.9;
        CHECK(reward(ctx, cfg) ==
              cfg.r_arrival + cfg.r_p + cfg.w_g * (3.0 - 2.9));
    }
    SECTION("reward decomposes exactly into its terms") {
        Rng rng(17);
        for (int i = 0; i < 1000; ++i) {
            RewardContext ctx;
            ctx.collided = rng.uniform() < 0.3;
            ctx.w_cmd = rng.uniform(-1, 1);
            ctx.pursuing = rng.uniform() < 0.5;
            ctx.p_prev = rng.uniform(0, 1);
            ctx.p_curr = rng.uniform(0, 1);
            ctx.arrived = ctx.pursuing && rng.uniform() < 0.2;
            ctx.has_goal = ctx.pursuing;
            ctx.goal_dist_prev = rng.uniform(0, 10);
            ctx.goal_dist_curr = rng.uniform(0, 10);
            const double total = reward(ctx, cfg);
            const double parts = collision_term(ctx, cfg) + spin_term(ctx, cfg) +
                                 confidence_term(ctx, cfg) + shaping_term(ctx, cfg);
            CHECK(total - parts == 0.0);
        }
    }
}

TEST_CASE("checkpoint round-trips byte-identically") {
    const PolicyArch arch = micro_arch();
    PolicyNetwork net(arch);
    net.init(77);
    const auto dir = std::filesystem::temp_directory_path() / "seeknet_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string p1 = (dir / "a.ckpt").string();
    const std::string p2 = (dir / "b.ckpt").string();

    save_checkpoint(net, p1);
    PolicyNetwork loaded(arch);
    load_checkpoint(loaded, p1);
    save_checkpoint(loaded, p2);

    const auto read_all = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    const std::string a = read_all(p1);
    const std::string b = read_all(p2);
    REQUIRE(!a.empty());
    CHECK(a == b);

    SECTION("loaded parameters match the float32 projection") {
        bool all_match = true;
        std::vector<double> orig, copy;
        net.for_each_param([&](Param& p) {
            for (double v : p.value.v) orig.push_back(static_cast<double>(static_cast<float>(v)));
        });
        loaded.for_each_param([&](Param& p) {
            for (double v : p.value.v) copy.push_back(v);
        });
        REQUIRE(orig.size() == copy.size());
        for (size_t i = 0; i < orig.size(); ++i) all_match = all_match && orig[i] == copy[i];
        CHECK(all_match);
    }
    SECTION("truncated file is rejected without partial load") {
        const std::string truncated = (dir / "trunc.ckpt").string();
        const std::string blob = read_all(p1);
        std::ofstream f(truncated, std::ios::binary);
        f.write(blob.data(), static_cast<std::streamsize>(blob.size() / 2));
        f.close();
        PolicyNetwork victim(arch);
        victim.init(123);
        const auto before = serialize_checkpoint(victim);
        CHECK_THROWS_AS(load_checkpoint(victim, truncated), FormatError);
        CHECK(serialize_checkpoint(victim) == before);  // untouched
    }
    SECTION("bad magic is a format error") {
        const std::string garbled = (dir / "bad.ckpt").string();
        std::ofstream f(garbled, std::ios::binary);
        f << "NOTACKPTxxxxxxxxxxxxxxxx";
        f.close();
        PolicyNetwork victim(arch);
        CHECK_THROWS_AS(load_checkpoint(victim, garbled), FormatError);
    }
    SECTION("cross-architecture load names the offending tensor") {
        PolicyArch other = arch;
        other.embed_dim = arch.embed_dim * 2;
        PolicyNetwork victim(other);
        try {
            load_checkpoint(victim, p1);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("f_human.embed") != std::string::npos);
        }
    }
    SECTION("missing checkpoint is a config error") {
        PolicyNetwork victim(arch);
        CHECK_THROWS_AS(load_checkpoint(victim, (dir / "nope.ckpt").string()), ConfigError);
    }
}

TEST_CASE("full-policy gradient check at micro scale") {
    const auto res = grad_check_policy(micro_arch(), 42, 120);
    CHECK(res.coords_checked == 120);
    CHECK(res.max_rel_err < 1e-4);
}
