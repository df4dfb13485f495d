#pragma once

// Named presets and JSON config overlays for the CLI. The desk preset keeps
// runs CPU-friendly (61px masks, 32-d embedding, 64-d lidar stage); the paper
// preset holds the full-fidelity sizes (244px masks, 128-d embedding, 256-d
// lidar stage).

#include <fstream>
#include <string>

#include <json.hpp>

#include "seeknet/metrics.hpp"
#include "seeknet/policy.hpp"
#include "seeknet/rollout.hpp"
#include "seeknet/train.hpp"

namespace seeknet {

struct Preset {
    std::string name;
    SimConfig sim;
    PolicyArch arch;
    TrainConfig train;
    GeneratorSpec generator;
    HorizonMap horizons = default_horizons();
};

inline Preset desk_preset() {
    Preset p;
    p.name = "desk";
    p.arch = desk_arch();
    p.sim.camera.mask_resolution = p.arch.mask_res;
    p.sim.lidar.beams = p.arch.lidar_beams;
    return p;
}

inline Preset paper_preset() {
    Preset p;
    p.name = "paper";
    p.arch = paper_arch();
    p.sim.camera.mask_resolution = p.arch.mask_res;
    p.sim.lidar.beams = p.arch.lidar_beams;
    return p;
}

inline Preset preset_by_name(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    throw ConfigError("unknown preset: " + name + " (expected desk or paper)");
}

// ---------------------------------------------------------------------------
// JSON overlay: any subset of keys may appear; everything else keeps the
// preset value.
// ---------------------------------------------------------------------------

inline void apply_config_overlay(Preset& p, const nlohmann::json& j) {
    using nlohmann::json;
    const auto num = [](const json& v) { return v.get<double>(); };
    try {
        if (j.contains("oracle")) {
            const auto& o = j["oracle"];
            if (o.contains("c_min")) p.sim.oracle.c_min = num(o["c_min"]);
            if (o.contains("c_max")) p.sim.oracle.c_max = num(o["c_max"]);
            if (o.contains("d_max")) p.sim.oracle.d_max = num(o["d_max"]);
            if (o.contains("noise_sigma")) p.sim.oracle.noise_sigma = num(o["noise_sigma"]);
            if (o.contains("lambda")) p.sim.oracle.lambda = num(o["lambda"]);
            if (o.contains("pos_noise_sigma")) p.sim.oracle.pos_noise_sigma = num(o["pos_noise_sigma"]);
            if (o.contains("visibility_samples"))
                p.sim.oracle.visibility_samples = o["visibility_samples"].get<int>();
        }
        if (j.contains("reward")) {
            const auto& r = j["reward"];
            if (r.contains("r_collision")) p.sim.reward.r_collision = num(r["r_collision"]);
            if (r.contains("w_w")) p.sim.reward.w_w = num(r["w_w"]);
            if (r.contains("w_abs_threshold")) p.sim.reward.w_abs_threshold = num(r["w_abs_threshold"]);
            if (r.contains("r_p")) p.sim.reward.r_p = num(r["r_p"]);
            if (r.contains("r_n")) p.sim.reward.r_n = num(r["r_n"]);
            if (r.contains("r_arrival")) p.sim.reward.r_arrival = num(r["r_arrival"]);
            if (r.contains("w_g")) p.sim.reward.w_g = num(r["w_g"]);
            if (r.contains("xi")) {
                p.sim.reward.xi = num(r["xi"]);
                p.train.entropy_coef = p.sim.reward.xi;
            }
        }
        if (j.contains("lidar")) {
            const auto& l = j["lidar"];
            if (l.contains("beams")) {
                p.sim.lidar.beams = l["beams"].get<int>();
                p.arch.lidar_beams = p.sim.lidar.beams;
            }
            if (l.contains("fov_deg")) p.sim.lidar.fov = num(l["fov_deg"]) * kPi / 180.0;
            if (l.contains("max_range")) p.sim.lidar.max_range = num(l["max_range"]);
        }
        if (j.contains("camera")) {
            const auto& c = j["camera"];
            if (c.contains("fov_deg")) p.sim.camera.fov = num(c["fov_deg"]) * kPi / 180.0;
            if (c.contains("range")) p.sim.camera.range = num(c["range"]);
            if (c.contains("mask_resolution")) {
                p.sim.camera.mask_resolution = c["mask_resolution"].get<int>();
                p.arch.mask_res = p.sim.camera.mask_resolution;
            }
        }
        if (j.contains("tracker")) {
            const auto& t = j["tracker"];
            if (t.contains("gating_radius")) p.sim.tracker.gating_radius = num(t["gating_radius"]);
            if (t.contains("max_misses")) p.sim.tracker.max_misses = t["max_misses"].get<int>();
        }
        if (j.contains("arch")) {
            const auto& a = j["arch"];
            if (a.contains("conv_channels")) {
                const auto v = a["conv_channels"].get<std::vector<int>>();
                if (v.size() != 4) throw ConfigError("config: arch.conv_channels needs 4 entries");
                for (size_t i = 0; i < 4; ++i) p.arch.conv_channels[i] = v[i];
            }
            if (a.contains("embed_dim")) p.arch.embed_dim = a["embed_dim"].get<int>();
            if (a.contains("lidar_channels")) {
                const auto v = a["lidar_channels"].get<std::vector<int>>();
                if (v.size() != 2) throw ConfigError("config: arch.lidar_channels needs 2 entries");
                p.arch.lidar_channels[0] = v[0];
                p.arch.lidar_channels[1] = v[1];
            }
            if (a.contains("lidar_fc")) p.arch.lidar_fc = a["lidar_fc"].get<int>();
            if (a.contains("act_hidden")) p.arch.act_hidden = a["act_hidden"].get<int>();
            if (a.contains("mask_resolution")) {
                p.arch.mask_res = a["mask_resolution"].get<int>();
                p.sim.camera.mask_resolution = p.arch.mask_res;
            }
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            if (t.contains("iterations")) p.train.iterations = t["iterations"].get<int>();
            if (t.contains("batch_episodes")) p.train.batch_episodes = t["batch_episodes"].get<int>();
            if (t.contains("gamma")) p.train.gamma = num(t["gamma"]);
            if (t.contains("lr")) p.train.optimizer.lr = num(t["lr"]);
            if (t.contains("rms_eps")) p.train.optimizer.eps = num(t["rms_eps"]);
            if (t.contains("rms_decay")) p.train.optimizer.decay = num(t["rms_decay"]);
            if (t.contains("grad_clip")) p.train.optimizer.grad_clip = num(t["grad_clip"]);
            if (t.contains("value_coef")) p.train.value_coef = num(t["value_coef"]);
            if (t.contains("entropy_coef")) p.train.entropy_coef = num(t["entropy_coef"]);
            if (t.contains("checkpoint_interval"))
                p.train.checkpoint_interval = t["checkpoint_interval"].get<int>();
        }
        if (j.contains("generator")) {
            const auto& g = j["generator"];
            if (g.contains("room_width")) p.generator.room_width = num(g["room_width"]);
            if (g.contains("room_height")) p.generator.room_height = num(g["room_height"]);
            if (g.contains("obstacle_count")) p.generator.obstacle_count = g["obstacle_count"].get<int>();
            if (g.contains("human_count")) p.generator.human_count = g["human_count"].get<int>();
            if (g.contains("class_set"))
                p.generator.class_set = g["class_set"].get<std::vector<std::string>>();
            if (g.contains("duration")) p.generator.duration = g["duration"].get<int>();
            if (g.contains("dt")) p.generator.dt = num(g["dt"]);
            if (g.contains("occluded_fraction")) p.generator.occluded_fraction = num(g["occluded_fraction"]);
            if (g.contains("human_speed_min")) p.generator.human_speed_min = num(g["human_speed_min"]);
            if (g.contains("human_speed_max")) p.generator.human_speed_max = num(g["human_speed_max"]);
        }
        if (j.contains("horizons")) {
            HorizonMap hm;
            for (const auto& [key, value] : j["horizons"].items())
                hm.emplace_back(std::stoi(key), value.get<int>());
            std::sort(hm.begin(), hm.end());
            p.horizons = hm;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed overlay: ") + e.what());
    }
}

inline Preset load_preset(const std::string& preset_name, const std::string& config_path) {
    Preset p = preset_by_name(preset_name);
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("config: missing file " + config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("config: parse error: ") + e.what());
        }
        apply_config_overlay(p, j);
    }
    return p;
}

}  // namespace seeknet
