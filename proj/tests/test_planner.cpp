#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <queue>

#include "seeknet/planner.hpp"

using namespace seeknet;

namespace {

// Independent all-pairs-free Dijkstra over the same 8-connected motion model,
// used as the admissible-heuristic equivalence oracle for A*.
double dijkstra_cost(const OccupancyGrid& g, int sx, int sy, int gx, int gy) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<size_t>(g.width) * g.height, inf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> open;
    const auto idx = [&](int x, int y) { return y * g.width + x; };
    dist[static_cast<size_t>(idx(sx, sy))] = 0.0;
    open.push({0.0, idx(sx, sy)});
    const int dxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    while (!open.empty()) {
        const auto [d, id] = open.top();
        open.pop();
        if (d > dist[static_cast<size_t>(id)]) continue;
        const int cx = id % g.width, cy = id / g.width;
        for (int k = 0; k < 8; ++k) {
            const int nx = cx + dxs[k], ny = cy + dys[k];
            if (!g.in_bounds(nx, ny) || g.is_occupied(nx, ny)) continue;
            if (k >= 4 && (g.is_occupied(cx + dxs[k], cy) || g.is_occupied(cx, cy + dys[k])))
                continue;
            const double nd = d + (k < 4 ? 1.0 : std::sqrt(2.0));
            if (nd < dist[static_cast<size_t>(idx(nx, ny))]) {
                dist[static_cast<size_t>(idx(nx, ny))] = nd;
                open.push({nd, idx(nx, ny)});
            }
        }
    }
    return dist[static_cast<size_t>(idx(gx, gy))];
}

OccupancyGrid random_grid(Rng& rng, int w, int h, double fill) {
    OccupancyGrid g;
    g.resolution = 0.1;
    g.width = w;
    g.height = h;
    g.origin = {0, 0};
    g.occupied.assign(static_cast<size_t>(w) * h, 0);
    for (auto& c : g.occupied) c = rng.uniform() < fill ? 1 : 0;
    return g;
}

}  // namespace

TEST_CASE("occupancy grid rasterizes and inflates walls") {
    const Rect bounds{0, 0, 4, 4};
    const std::vector<Segment> walls = {{{2, 0.5}, {2, 3.5}}};
    const OccupancyGrid g = build_occupancy_grid(bounds, walls, 0.3, 0.1);

    // Every sample point on the wall lands in an occupied cell.
    for (double t = 0.0; t <= 1.0; t += 0.02) {
        const Vec2 p{2.0, 0.5 + 3.0 * t};
        auto [cx, cy] = g.cell_of(p);
        REQUIRE(g.in_bounds(cx, cy));
        CHECK(g.is_occupied(cx, cy));
    }
    // Inflation covers at least the robot radius around the wall.
    auto [cx, cy] = g.cell_of({2.25, 2.0});
    CHECK(g.is_occupied(cx, cy));
    auto [fx, fy] = g.cell_of({3.2, 2.0});
    CHECK_FALSE(g.is_occupied(fx, fy));
}

TEST_CASE("astar matches the Dijkstra oracle on 50 random grids") {
    Rng rng(101);
    int compared = 0;
    while (compared < 50) {
        OccupancyGrid g = random_grid(rng, 30, 22, 0.25);
        const int sx = 1 + static_cast<int>(rng.uniform_index(27));
        const int sy = 1 + static_cast<int>(rng.uniform_index(19));
        const int gx = 1 + static_cast<int>(rng.uniform_index(27));
        const int gy = 1 + static_cast<int>(rng.uniform_index(19));
        if (g.is_occupied(sx, sy) || g.is_occupied(gx, gy)) continue;
        const double oracle = dijkstra_cost(g, sx, sy, gx, gy);
        const PlanResult plan = astar_plan(g, g.center_of(sx, sy), g.center_of(gx, gy));
        if (!std::isfinite(oracle)) {
            CHECK_FALSE(plan.reached);
        } else {
            REQUIRE(plan.reached);
            CHECK(plan.cost == Catch::Approx(oracle).margin(1e-9));
        }
        ++compared;
    }
}

TEST_CASE("astar paths never cross occupied cells") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        OccupancyGrid g = random_grid(rng, 25, 25, 0.2);
        const int sx = static_cast<int>(rng.uniform_index(25));
        const int sy = static_cast<int>(rng.uniform_index(25));
        const int gx = static_cast<int>(rng.uniform_index(25));
        const int gy = static_cast<int>(rng.uniform_index(25));
        if (g.is_occupied(sx, sy)) continue;
        const PlanResult plan = astar_plan(g, g.center_of(sx, sy), g.center_of(gx, gy));
        for (const auto& p : plan.path) {
            auto [cx, cy] = g.cell_of(p);
            CHECK_FALSE(g.is_occupied(cx, cy));
        }
    }
}

TEST_CASE("astar rejects an occupied start cell") {
    Rng rng(3);
    OccupancyGrid g = random_grid(rng, 10, 10, 0.0);
    g.set_occupied(5, 5);
    CHECK_THROWS_AS(astar_plan(g, g.center_of(5, 5), g.center_of(1, 1)), PlanningError);
}

TEST_CASE("shortest path policy steering") {
    const Rect bounds{0, 0, 12, 12};
    const OccupancyGrid g = build_occupancy_grid(bounds, {}, 0.3, 0.1);
    RobotState robot;
    robot.pose = make_pose(2, 6, 0);
    robot.radius = 0.3;

    SECTION("target straight ahead drives at full speed") {
        // Up to grid quantization: the lookahead point is a cell center.
        const Velocity u = shortest_path_policy(g, robot, {9, 6});
        CHECK(u.v == Catch::Approx(1.0).margin(0.01));
        CHECK(std::abs(u.w) < 0.25);
    }
    SECTION("target directly behind spins in place") {
        const Velocity u = shortest_path_policy(g, robot, {0.2, 6});
        CHECK(std::abs(u.w) == Catch::Approx(1.0));
        CHECK(u.v < 0.05);
    }
    SECTION("walled-off target falls back to rotate in place") {
        // Sealed box around the target.
        const std::vector<Segment> box = {{{8, 4}, {10, 4}},
                                          {{10, 4}, {10, 8}},
                                          {{10, 8}, {8, 8}},
                                          {{8, 8}, {8, 4}}};
        const OccupancyGrid sealed = build_occupancy_grid(bounds, box, 0.3, 0.1);
        const Velocity u = shortest_path_policy(sealed, robot, {9, 6});
        CHECK(u.v == 0.0);
        CHECK(std::abs(u.w) == 1.0);
    }
    SECTION("within standoff the robot faces the target instead of advancing") {
        const Velocity u = shortest_path_policy(g, robot, {2.5, 6});
        CHECK(u.v == 0.0);
    }
}

TEST_CASE("baseline policies") {
    SECTION("passive always stops") {
        for (int i = 0; i < 5; ++i) {
            const Velocity u = passive_policy();
            CHECK(u.v == 0.0);
            CHECK(u.w == 0.0);
        }
    }
    SECTION("random is uniform over the action set and reproducible") {
        const ActionSpace as = ActionSpace::make();
        Rng a(5), b(5);
        std::vector<int> counts(static_cast<size_t>(as.size()), 0);
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const Velocity u = random_policy(as, a);
            const Velocity v = random_policy(as, b);
            CHECK(u.v == v.v);
            CHECK(u.w == v.w);
            CHECK(u.v >= kVelMin);
            CHECK(u.v <= kVelMax);
            CHECK(std::abs(u.w) <= kYawRateMax);
            for (int k = 0; k < as.size(); ++k) {
                const Velocity cand = as.at(k);
                if (cand.v == u.v && cand.w == u.w) {
                    ++counts[static_cast<size_t>(k)];
                    break;
                }
            }
        }
        for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.04) < 0.005);
    }
}
