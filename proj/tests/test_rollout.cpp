#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "seeknet/io.hpp"
#include "seeknet/rollout.hpp"

using namespace seeknet;

namespace {

// Scenario with a single human straight ahead in an otherwise open room.
Scenario corridor_scene(double human_x, double human_speed = 0.0) {
    Scenario sc;
    sc.bounds = {0, 0, 16, 12};
    ObstacleChain rim;
    rim.points = {{0, 0}, {16, 0}, {16, 12}, {0, 12}, {0, 0}};
    sc.obstacles.push_back(rim);
    sc.robot_start = make_pose(2, 6, 0);
    sc.duration = 200;
    HumanAgent h;
    h.id = 0;
    h.pose = make_pose(human_x, 6, 0);
    h.body_radius = 0.3;
    h.speed = human_speed;
    h.true_class = "A";
    h.waypoints = {h.pose};
    sc.humans.push_back(h);
    return sc;
}

SimConfig quiet_sim() {
    SimConfig cfg;
    cfg.camera.mask_resolution = 16;
    cfg.lidar.beams = 16;
    cfg.oracle.noise_sigma = 0.0;
    cfg.oracle.pos_noise_sigma = 0.0;
    return cfg;
}

// A network whose output bias pins one action with near certainty.
PolicyNetwork biased_net(const PolicyArch& arch, int action) {
    PolicyNetwork net(arch);  // zero weights everywhere
    net.for_each_param([&](Param& p) {
        if (p.name == "f_act.policy.b") p.value.v[static_cast<size_t>(action)] = 50.0;
    });
    net.bump_version();
    return net;
}

PolicyArch tiny_arch() {
    PolicyArch a = micro_arch();
    a.lidar_beams = 16;
    return a;
}

}  // namespace

TEST_CASE("passive-pinned network params keep the robot still") {
    const Scenario sc = corridor_scene(14.0);
    SimConfig cfg = quiet_sim();
    const PolicyArch arch = tiny_arch();
    const ActionSpace actions = ActionSpace::make();
    PolicyNetwork net = biased_net(arch, actions.stop_index());

    const EpisodeLog log = rollout(sc, cfg, make_network_policy(net, actions), 3, "pinned");
    for (const auto& t : log.ticks) {
        CHECK(t.robot.x == sc.robot_start.x);
        CHECK(t.robot.y == sc.robot_start.y);
    }
    CHECK(log.terminal_cause == "horizon");
}

TEST_CASE("fixed seeds give bit-identical episode logs") {
    GeneratorSpec spec;
    spec.human_count = 4;
    spec.obstacle_count = 3;
    const Scenario sc = generate_scenario(spec, 5);
    SimConfig cfg;
    cfg.camera.mask_resolution = 16;
    cfg.lidar.beams = 16;
    const ActionSpace actions = ActionSpace::make();

    const auto render = [&](const EpisodeLog& log) {
        std::ostringstream os;
        append_episode_jsonl(log, os);
        return os.str();
    };
    const EpisodeLog a = rollout(sc, cfg, make_random_policy(actions), 17, "rand");
    const EpisodeLog b = rollout(sc, cfg, make_random_policy(actions), 17, "rand");
    CHECK(render(a) == render(b));
    const EpisodeLog c = rollout(sc, cfg, make_random_policy(actions), 18, "rand");
    CHECK(render(a) != render(c));
}

TEST_CASE("high-confidence humans never trigger pursuit") {
    // Human 1.5 m ahead, fully visible: confidence well above lambda.
    const Scenario sc = corridor_scene(3.5);
    SimConfig cfg = quiet_sim();
    const EpisodeLog log = rollout(sc, cfg, make_passive_policy(), 9, "passive");
    CHECK(log.pursuits.empty());
    for (const auto& t : log.ticks) CHECK(t.pursued_track == -1);
    CHECK(log.terminal_cause == "horizon");
}

TEST_CASE("weak detection triggers pursuit and arrival ends the episode") {
    // Human 7 m ahead: confidence 0.2 + 0.8*(1 - 7/8) = 0.3 < 0.6 at start.
    const Scenario sc = corridor_scene(9.0);
    SimConfig cfg = quiet_sim();
    const PolicyArch arch = tiny_arch();
    const ActionSpace actions = ActionSpace::make();
    // Action that drives straight at full speed.
    int drive = -1;
    for (int i = 0; i < actions.size(); ++i)
        if (actions.at(i).v == 1.0 && actions.at(i).w == 0.0) drive = i;
    REQUIRE(drive >= 0);
    PolicyNetwork net = biased_net(arch, drive);

    const EpisodeLog log = rollout(sc, cfg, make_network_policy(net, actions), 3, "driver");
    REQUIRE(!log.pursuits.empty());
    CHECK(log.pursuits[0].human_id == 0);
    CHECK(log.terminal_cause == "arrival");
    // The terminal transition carries the arrival bonus.
    const TickRecord& final_tick = log.ticks[log.ticks.size() - 2];
    CHECK(final_tick.arrived);
    CHECK(final_tick.reward > 10.0);
    // Confidence ratchets upward while driving closer.
    double first_conf = -1, last_conf = -1;
    for (const auto& t : log.ticks) {
        if (t.pursued_conf >= 0) {
            if (first_conf < 0) first_conf = t.pursued_conf;
            last_conf = t.pursued_conf;
        }
    }
    CHECK(last_conf > first_conf);
    CHECK(log.mean_conf_delta > 0.0);
}

TEST_CASE("collision ends the episode with the collision penalty") {
    Scenario sc = corridor_scene(14.0);
    sc.robot_start = make_pose(1.0, 6, kPi);  // facing the near wall
    SimConfig cfg = quiet_sim();
    const PolicyArch arch = tiny_arch();
    const ActionSpace actions = ActionSpace::make();
    int drive = -1;
    for (int i = 0; i < actions.size(); ++i)
        if (actions.at(i).v == 1.0 && actions.at(i).w == 0.0) drive = i;
    PolicyNetwork net = biased_net(arch, drive);

    const EpisodeLog log = rollout(sc, cfg, make_network_policy(net, actions), 3, "crash");
    CHECK(log.terminal_cause == "collision");
    const TickRecord& final_tick = log.ticks[log.ticks.size() - 2];
    CHECK(final_tick.collided);
    CHECK(final_tick.reward <= -15.0 + 1.0);  // collision term dominates
}

TEST_CASE("passive policy in a static occluded scene sees no confidence drift") {
    Scenario sc = corridor_scene(9.0);
    // Wall half-occluding the line of sight.
    ObstacleChain wall;
    wall.points = {{5.0, 6.0}, {5.0, 0.5}};
    sc.obstacles.push_back(wall);
    SimConfig cfg = quiet_sim();
    const EpisodeLog log = rollout(sc, cfg, make_passive_policy(), 4, "passive");
    CHECK(std::abs(log.mean_conf_delta) < 1e-9);  // zero noise, static world
}

TEST_CASE("observation carries zero-padded mask history at pursuit start") {
    // 5 m out: weak enough to pursue, near enough to span a 16-px column.
    const Scenario sc = corridor_scene(7.0);
    SimConfig cfg = quiet_sim();
    EpisodeRunner runner(sc, cfg, 3, "probe");
    runner.begin_tick();
    REQUIRE(runner.pursuing());
    const PolicyObs& obs = runner.obs();
    const int res = cfg.camera.mask_resolution;
    // History slots 0 and 1 are zero-padded; slot 2 holds the current mask.
    double slot0 = 0, slot2 = 0;
    for (int i = 0; i < res * res; ++i) {
        slot0 += obs.mask.v[static_cast<size_t>(i)];
        slot2 += obs.mask.v[static_cast<size_t>(2 * res * res + i)];
    }
    CHECK(slot0 == 0.0);
    CHECK(slot2 > 0.0);
    CHECK_FALSE(obs.mask_all_zero);
    // Goal features point roughly straight ahead.
    CHECK(obs.goal_cos > 0.9);
    CHECK(obs.goal_rho > 0.0);
}

TEST_CASE("transition confidences stay in range while pursuing") {
    GeneratorSpec spec;
    spec.human_count = 5;
    spec.obstacle_count = 4;
    const Scenario sc = generate_scenario(spec, 23);
    SimConfig cfg;
    cfg.camera.mask_resolution = 16;
    cfg.lidar.beams = 16;
    const ActionSpace actions = ActionSpace::make();
    const EpisodeLog log = rollout(sc, cfg, make_random_policy(actions), 31, "rand");
    for (const auto& t : log.ticks) {
        CHECK(std::isfinite(t.reward));
        if (t.pursued_track >= 0) {
            CHECK(t.pursued_conf >= 0.0);
            CHECK(t.pursued_conf <= 1.0);
        }
    }
}
