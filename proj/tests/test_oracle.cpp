#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "seeknet/oracle.hpp"

using namespace seeknet;

namespace {

HumanAgent human_at(int id, double x, double y, const std::string& cls = "A") {
    HumanAgent h;
    h.id = id;
    h.pose = make_pose(x, y, 0);
    h.body_radius = 0.3;
    h.true_class = cls;
    return h;
}

Scenario two_class_room() {
    Scenario sc;
    sc.bounds = {-20, -20, 20, 20};
    sc.class_set = {"A", "B"};
    return sc;
}

DetectionRecord det_at(int human, double x, double y, double conf, int tick) {
    DetectionRecord d;
    d.human_id = human;
    d.est_pos = {x, y};
    d.confidence = conf;
    d.tick = tick;
    return d;
}

}  // namespace

TEST_CASE("confidence_model closed form") {
    OracleConfig cfg;
    cfg.c_min = 0.2;
    cfg.c_max = 1.0;
    cfg.d_max = 8.0;
    cfg.noise_sigma = 0.0;
    Rng rng(1);

    CHECK(confidence_model(1.0, 0.0, cfg, rng) == Catch::Approx(1.0).margin(1e-12));
    CHECK(confidence_model(0.5, 4.0, cfg, rng) == Catch::Approx(0.4).margin(1e-12));
    CHECK(confidence_model(0.0, 1.0, cfg, rng) == Catch::Approx(0.2).margin(1e-12));
    CHECK(confidence_model(1.0, 100.0, cfg, rng) == Catch::Approx(0.2).margin(1e-12));

    SECTION("noise clamps to [0, 1]") {
        OracleConfig noisy = cfg;
        noisy.noise_sigma = 5.0;
        Rng r2(3);
        for (int i = 0; i < 200; ++i) {
            const double c = confidence_model(0.5, 2.0, noisy, r2);
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
        }
    }
    SECTION("noise-free confidence is monotone in visibility and distance") {
        for (int vi = 0; vi + 1 < 10; ++vi) {
            CHECK(confidence_mean(vi / 10.0, 3.0, cfg) <= confidence_mean((vi + 1) / 10.0, 3.0, cfg));
        }
        for (int di = 0; di + 1 < 12; ++di) {
            CHECK(confidence_mean(0.7, di * 1.0, cfg) >= confidence_mean(0.7, (di + 1) * 1.0, cfg));
        }
    }
}

TEST_CASE("detect emits one record per visible human") {
    Scenario sc = two_class_room();
    CameraConfig cam;
    OracleConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.pos_noise_sigma = 0.0;
    const Pose2D robot = make_pose(0, 0, 0);

    SECTION("no humans in the cone: empty list") {
        const std::vector<HumanAgent> humans = {human_at(0, -5, 0)};
        Rng rng(1);
        CHECK(detect(humans, robot, {}, sc, cam, cfg, rng).empty());
    }
    SECTION("fully occluded humans are not reported") {
        const std::vector<HumanAgent> humans = {human_at(0, 5, 0)};
        const std::vector<Segment> walls = {{{2, -8}, {2, 8}}};
        Rng rng(1);
        CHECK(detect(humans, robot, walls, sc, cam, cfg, rng).empty());
    }
    SECTION("confidence 1.0 always predicts the true class") {
        OracleConfig sure = cfg;
        sure.c_min = 1.0 - 1e-12;  // degenerate band pinned at the top
        sure.c_max = 1.0;
        const std::vector<HumanAgent> humans = {human_at(0, 1, 0, "B")};
        Rng rng(5);
        for (int i = 0; i < 200; ++i) {
            const auto dets = detect(humans, robot, {}, sc, cam, sure, rng);
            REQUIRE(dets.size() == 1);
            CHECK(dets[0].predicted_class == "B");
            CHECK(dets[0].correct);
        }
    }
    SECTION("correct rate at confidence 0.5 over two classes is 0.75") {
        // Pin the confidence to 0.5 via a degenerate band.
        OracleConfig half = cfg;
        half.c_min = 0.5;
        half.c_max = 0.5 + 1e-9;
        const std::vector<HumanAgent> humans = {human_at(0, 1, 0, "A")};
        Rng rng(7);
        int correct = 0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i) {
            const auto dets = detect(humans, robot, {}, sc, cam, half, rng);
            REQUIRE(dets.size() == 1);
            correct += dets[0].correct ? 1 : 0;
        }
        CHECK(std::abs(correct / static_cast<double>(trials) - 0.75) < 0.02);
    }
    SECTION("static world and zero noise make detect idempotent per tick") {
        const std::vector<HumanAgent> humans = {human_at(0, 2, 0), human_at(1, 3, 1)};
        Rng ra(9), rb(9);
        const auto a = detect(humans, robot, {}, sc, cam, cfg, ra, 4);
        const auto b = detect(humans, robot, {}, sc, cam, cfg, rb, 4);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].confidence == b[i].confidence);
            CHECK(a[i].predicted_class == b[i].predicted_class);
            CHECK(a[i].bbox.xmin == b[i].bbox.xmin);
        }
    }
    SECTION("records carry a well-formed viewport box when visible") {
        const std::vector<HumanAgent> humans = {human_at(0, 2, 0.5)};
        Rng rng(11);
        const auto dets = detect(humans, robot, {}, sc, cam, cfg, rng);
        REQUIRE(dets.size() == 1);
        CHECK(dets[0].visible_frac > 0.0);
        CHECK(dets[0].bbox.xmax > dets[0].bbox.xmin);
        CHECK(dets[0].bbox.ymax > dets[0].bbox.ymin);
    }
    SECTION("config validation") {
        OracleConfig bad = cfg;
        bad.lambda = 1.5;
        const std::vector<HumanAgent> humans = {human_at(0, 2, 0)};
        Rng rng(1);
        CHECK_THROWS_AS(detect(humans, robot, {}, sc, cam, bad, rng), DomainError);
    }
}

TEST_CASE("select_target picks the weakest track under lambda") {
    const auto track_with_conf = [](int id, double conf) {
        Track t;
        t.track_id = id;
        DetectionRecord d;
        d.confidence = conf;
        t.history.push_back(d);
        return t;
    };

    SECTION("all strong tracks: no target") {
        const std::vector<Track> tracks = {track_with_conf(0, 0.7), track_with_conf(1, 0.9)};
        CHECK(select_target(tracks, 0.6) == nullptr);
    }
    SECTION("single weak track selected") {
        const std::vector<Track> tracks = {track_with_conf(3, 0.3)};
        const Track* t = select_target(tracks, 0.6);
        REQUIRE(t != nullptr);
        CHECK(t->track_id == 3);
    }
    SECTION("weakest of several wins") {
        const std::vector<Track> tracks = {track_with_conf(0, 0.5), track_with_conf(1, 0.3)};
        CHECK(select_target(tracks, 0.6)->track_id == 1);
    }
    SECTION("ties break to the lowest track id") {
        const std::vector<Track> tracks = {track_with_conf(4, 0.3), track_with_conf(2, 0.3)};
        CHECK(select_target(tracks, 0.6)->track_id == 2);
    }
    SECTION("never returns a track at or above lambda") {
        Rng rng(13);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<Track> tracks;
            for (int i = 0; i < 5; ++i) tracks.push_back(track_with_conf(i, rng.uniform(0, 1)));
            const Track* t = select_target(tracks, 0.6);
            if (t) CHECK(t->latest().confidence < 0.6);
        }
    }
}

TEST_CASE("update_tracks greedy association") {
    TrackerConfig cfg;  // gate 1.0 m, max 10 misses

    SECTION("detection near a track associates") {
        TrackerState st;
        update_tracks(st, {det_at(0, 0, 0, 0.5, 0)}, cfg);
        REQUIRE(st.tracks.size() == 1);
        update_tracks(st, {det_at(0, 0.1, 0, 0.5, 1)}, cfg);
        REQUIRE(st.tracks.size() == 1);
        CHECK(st.tracks[0].history.size() == 2);
        CHECK(st.tracks[0].misses == 0);
    }
    SECTION("detection outside the gate spawns a new track") {
        TrackerState st;
        update_tracks(st, {det_at(0, 0, 0, 0.5, 0)}, cfg);
        update_tracks(st, {det_at(0, 2.0, 0, 0.5, 1)}, cfg);
        CHECK(st.tracks.size() == 2);
    }
    SECTION("greedy picks the globally nearest pair first") {
        TrackerState st;
        update_tracks(st, {det_at(0, 0, 0, 0.5, 0), det_at(1, 1.0, 0, 0.5, 0)}, cfg);
        REQUIRE(st.tracks.size() == 2);
        // Crossed geometry: track0 at x=0, track1 at x=1. New detections at
        // x=0.55 (human 0) and x=0.9 (human 1). Globally nearest pair is
        // (track1, x=0.9); track0 then takes x=0.55.
        update_tracks(st, {det_at(0, 0.55, 0, 0.5, 1), det_at(1, 0.9, 0, 0.5, 1)}, cfg);
        REQUIRE(st.tracks.size() == 2);
        CHECK(st.tracks[0].latest().est_pos.x == 0.55);
        CHECK(st.tracks[1].latest().est_pos.x == 0.9);
    }
    SECTION("stale tracks retire after max misses and ids are never reused") {
        TrackerState st;
        update_tracks(st, {det_at(0, 0, 0, 0.5, 0)}, cfg);
        const int first_id = st.tracks[0].track_id;
        for (int i = 0; i < cfg.max_misses + 1; ++i) update_tracks(st, {}, cfg);
        CHECK(st.tracks.empty());
        update_tracks(st, {det_at(0, 0, 0, 0.5, 99)}, cfg);
        REQUIRE(st.tracks.size() == 1);
        CHECK(st.tracks[0].track_id > first_id);
    }
    SECTION("invalid gate rejected") {
        TrackerState st;
        TrackerConfig bad;
        bad.gating_radius = 0.0;
        CHECK_THROWS_AS(update_tracks(st, {}, bad), DomainError);
    }
}
