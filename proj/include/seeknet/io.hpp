#pragma once

// JSON serialization: scenario/suite files (versioned schema) and episode
// logs as JSONL, one tick per line. Logs carry everything the metrics need,
// so reports can be regenerated offline from the files alone.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seeknet/common.hpp"
#include "seeknet/rollout.hpp"
#include "seeknet/world.hpp"

namespace seeknet {

using nlohmann::json;

inline constexpr int kScenarioSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Scenario <-> JSON
// ---------------------------------------------------------------------------

inline json scenario_to_json(const Scenario& sc) {
    json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["bounds"] = {sc.bounds.xmin, sc.bounds.ymin, sc.bounds.xmax, sc.bounds.ymax};
    j["robot_start"] = {sc.robot_start.x, sc.robot_start.y, sc.robot_start.theta};
    j["robot_radius"] = sc.robot_radius;
    j["rng_seed"] = sc.rng_seed;
    j["duration"] = sc.duration;
    j["dt"] = sc.dt;
    j["class_set"] = sc.class_set;
    j["obstacles"] = json::array();
    for (const auto& chain : sc.obstacles) {
        json pts = json::array();
        for (const auto& p : chain.points) pts.push_back({p.x, p.y});
        j["obstacles"].push_back(pts);
    }
    j["humans"] = json::array();
    for (const auto& h : sc.humans) {
        json hj;
        hj["id"] = h.id;
        hj["pose"] = {h.pose.x, h.pose.y, h.pose.theta};
        hj["body_radius"] = h.body_radius;
        hj["speed"] = h.speed;
        hj["true_class"] = h.true_class;
        hj["waypoints"] = json::array();
        for (const auto& w : h.waypoints) hj["waypoints"].push_back({w.x, w.y, w.theta});
        j["humans"].push_back(hj);
    }
    return j;
}

inline Scenario scenario_from_json(const json& j) {
    try {
        if (!j.contains("schema_version"))
            throw FormatError("scenario: missing schema_version");
        if (j["schema_version"].get<int>() != kScenarioSchemaVersion)
            throw FormatError("scenario: unsupported schema_version");
        Scenario sc;
        const auto& b = j.at("bounds");
        sc.bounds = {b.at(0), b.at(1), b.at(2), b.at(3)};
        const auto& r = j.at("robot_start");
        sc.robot_start = make_pose(r.at(0), r.at(1), r.at(2));
        sc.robot_radius = j.at("robot_radius");
        sc.rng_seed = j.at("rng_seed");
        sc.duration = j.at("duration");
        sc.dt = j.at("dt");
        sc.class_set = j.at("class_set").get<std::vector<std::string>>();
        for (const auto& pts : j.at("obstacles")) {
            ObstacleChain chain;
            for (const auto& p : pts) chain.points.push_back({p.at(0), p.at(1)});
            sc.obstacles.push_back(chain);
        }
        for (const auto& hj : j.at("humans")) {
            HumanAgent h;
            h.id = hj.at("id");
            const auto& hp = hj.at("pose");
            h.pose = make_pose(hp.at(0), hp.at(1), hp.at(2));
            h.body_radius = hj.at("body_radius");
            h.speed = hj.at("speed");
            h.true_class = hj.at("true_class");
            for (const auto& w : hj.at("waypoints"))
                h.waypoints.push_back(make_pose(w.at(0), w.at(1), w.at(2)));
            sc.humans.push_back(h);
        }
        return sc;
    } catch (const json::exception& e) {
        throw FormatError(std::string("scenario: malformed json: ") + e.what());
    }
}

// Suite: a list of scenarios in one file.
inline void save_suite(const std::vector<Scenario>& suite, const std::string& path) {
    json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["scenarios"] = json::array();
    for (const auto& sc : suite) j["scenarios"].push_back(scenario_to_json(sc));
    std::ofstream out(path);
    if (!out) throw ConfigError("save_suite: cannot open " + path);
    out << j.dump(1) << "\n";
}

inline std::vector<Scenario> load_suite(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_suite: missing suite file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("suite: parse error: ") + e.what());
    }
    try {
        if (j.at("schema_version").get<int>() != kScenarioSchemaVersion)
            throw FormatError("suite: unsupported schema_version");
        std::vector<Scenario> suite;
        for (const auto& sj : j.at("scenarios")) suite.push_back(scenario_from_json(sj));
        return suite;
    } catch (const json::exception& e) {
        throw FormatError(std::string("suite: malformed json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Episode logs as JSONL
// ---------------------------------------------------------------------------

inline void append_episode_jsonl(const EpisodeLog& log, std::ostream& out) {
    {
        json j;
        j["type"] = "episode_start";
        j["scenario_seed"] = log.scenario_seed;
        j["episode_seed"] = log.episode_seed;
        j["policy"] = log.policy_name;
        j["horizon"] = log.horizon;
        j["dt"] = log.dt;
        j["human_count"] = log.human_count;
        out << j.dump() << "\n";
    }
    for (const auto& t : log.ticks) {
        json j;
        j["type"] = "tick";
        j["tick"] = t.tick;
        j["robot"] = {t.robot.x, t.robot.y, t.robot.theta};
        j["cmd"] = {t.cmd.v, t.cmd.w};
        j["action"] = t.action_index;
        j["reward"] = t.reward;
        j["pursued_track"] = t.pursued_track;
        j["pursued_human"] = t.pursued_human;
        j["pursued_conf"] = t.pursued_conf;
        j["collided"] = t.collided;
        j["arrived"] = t.arrived;
        json dets = json::array();
        for (const auto& d : t.detections) {
            json dj;
            dj["human_id"] = d.human_id;
            dj["track_id"] = d.track_id;
            dj["confidence"] = d.confidence;
            dj["predicted_class"] = d.predicted_class;
            dj["correct"] = d.correct;
            dj["est"] = {d.x, d.y};
            dj["visible_frac"] = d.visible_frac;
            dets.push_back(dj);
        }
        j["detections"] = dets;
        out << j.dump() << "\n";
    }
    {
        json j;
        j["type"] = "episode_end";
        j["terminal"] = log.terminal_cause;
        j["total_reward"] = log.total_reward;
        j["mean_conf_delta"] = log.mean_conf_delta;
        json purs = json::array();
        for (const auto& p : log.pursuits)
            purs.push_back({{"track_id", p.track_id}, {"human_id", p.human_id}, {"start_tick", p.start_tick}});
        j["pursuits"] = purs;
        json fds = json::array();
        for (const auto& f : log.first_detections)
            fds.push_back({{"human_id", f.human_id}, {"tick", f.tick}, {"correct", f.correct}, {"iou", f.iou}});
        j["first_detections"] = fds;
        out << j.dump() << "\n";
    }
}

inline void save_logs_jsonl(const std::vector<EpisodeLog>& logs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_logs_jsonl: cannot open " + path);
    for (const auto& log : logs) append_episode_jsonl(log, out);
}

inline std::vector<EpisodeLog> load_logs_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_logs_jsonl: missing log file " + path);
    std::vector<EpisodeLog> logs;
    EpisodeLog cur;
    bool open_episode = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("logs: parse error at line " + std::to_string(line_no) + ": " +
                              e.what());
        }
        try {
            const std::string type = j.at("type");
            if (type == "episode_start") {
                if (open_episode) throw FormatError("logs: unterminated episode");
                cur = EpisodeLog{};
                cur.scenario_seed = j.at("scenario_seed");
                cur.episode_seed = j.at("episode_seed");
                cur.policy_name = j.at("policy");
                cur.horizon = j.at("horizon");
                cur.dt = j.at("dt");
                cur.human_count = j.at("human_count");
                open_episode = true;
            } else if (type == "tick") {
                if (!open_episode) throw FormatError("logs: tick outside episode");
                TickRecord t;
                t.tick = j.at("tick");
                const auto& r = j.at("robot");
                t.robot = {r.at(0), r.at(1), r.at(2)};
                const auto& c = j.at("cmd");
                t.cmd = {c.at(0), c.at(1)};
                t.action_index = j.at("action");
                t.reward = j.at("reward");
                t.pursued_track = j.at("pursued_track");
                t.pursued_human = j.at("pursued_human");
                t.pursued_conf = j.at("pursued_conf");
                t.collided = j.at("collided");
                t.arrived = j.at("arrived");
                for (const auto& dj : j.at("detections")) {
                    DetLogEntry d;
                    d.human_id = dj.at("human_id");
                    d.track_id = dj.at("track_id");
                    d.confidence = dj.at("confidence");
                    d.predicted_class = dj.at("predicted_class");
                    d.correct = dj.at("correct");
                    d.x = dj.at("est").at(0);
                    d.y = dj.at("est").at(1);
                    d.visible_frac = dj.at("visible_frac");
                    t.detections.push_back(std::move(d));
                }
                cur.ticks.push_back(std::move(t));
            } else if (type == "episode_end") {
                if (!open_episode) throw FormatError("logs: episode_end outside episode");
                cur.terminal_cause = j.at("terminal");
                cur.total_reward = j.at("total_reward");
                cur.mean_conf_delta = j.at("mean_conf_delta");
                for (const auto& pj : j.at("pursuits")) {
                    PursuitEvent p;
                    p.track_id = pj.at("track_id");
                    p.human_id = pj.at("human_id");
                    p.start_tick = pj.at("start_tick");
                    cur.pursuits.push_back(p);
                }
                for (const auto& fj : j.at("first_detections")) {
                    FirstDetection f;
                    f.human_id = fj.at("human_id");
                    f.tick = fj.at("tick");
                    f.correct = fj.at("correct");
                    f.iou = fj.at("iou");
                    cur.first_detections.push_back(f);
                }
                logs.push_back(std::move(cur));
                open_episode = false;
            } else {
                throw FormatError("logs: unknown record type " + type);
            }
        } catch (const json::exception& e) {
            throw FormatError("logs: malformed record at line " + std::to_string(line_no) + ": " +
                              e.what());
        }
    }
    if (open_episode) throw FormatError("logs: unterminated episode at end of file");
    return logs;
}

// Flat detection stream, one record per line.
inline void save_detections_jsonl(const std::vector<EpisodeLog>& logs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_detections_jsonl: cannot open " + path);
    for (size_t e = 0; e < logs.size(); ++e) {
        for (const auto& t : logs[e].ticks) {
            for (const auto& d : t.detections) {
                json j;
                j["episode"] = e;
                j["tick"] = t.tick;
                j["human_id"] = d.human_id;
                j["track_id"] = d.track_id;
                j["confidence"] = d.confidence;
                j["predicted_class"] = d.predicted_class;
                j["est"] = {d.x, d.y};
                j["visible_frac"] = d.visible_frac;
                out << j.dump() << "\n";
            }
        }
    }
}

}  // namespace seeknet
