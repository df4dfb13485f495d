// Runs the shortest-path baseline on one generated scenario and prints a
// short tick trace: pose, pursued target and its confidence.

#include <cstdio>

#include "seeknet/metrics.hpp"
#include "seeknet/presets.hpp"

using namespace seeknet;

int main() {
    const Preset preset = desk_preset();
    GeneratorSpec gen = preset.generator;
    gen.human_count = 4;
    gen.obstacle_count = 3;
    const Scenario sc = generate_scenario(gen, 7);

    const auto grid = std::make_shared<const OccupancyGrid>(
        build_occupancy_grid(sc.bounds, sc.wall_segments(), sc.robot_radius));
    const EpisodeLog log =
        rollout(sc, preset.sim, make_shortest_path_policy(grid, preset.sim.pursuit), 11, "demo");

    std::printf("tick   x      y      theta  target conf\n");
    for (const auto& t : log.ticks) {
        if (t.tick % 10 != 0 && t.tick + 1 != static_cast<int>(log.ticks.size())) continue;
        std::printf("%-5d %6.2f %6.2f %6.2f  %-6d %.2f\n", t.tick, t.robot.x, t.robot.y,
                    t.robot.theta, t.pursued_track, t.pursued_conf);
    }
    std::printf("terminal: %s after %zu ticks, total reward %.2f\n", log.terminal_cause.c_str(),
                log.ticks.size(), log.total_reward);
    return 0;
}
