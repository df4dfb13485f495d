#pragma once

// Evaluation protocol: classification accuracy at first detection, modal/
// amodal mask mIoU at first detection, tracking accuracy, and pursued-target
// classification accuracy measured a fixed horizon after pursuit start.
// Metrics are pure functions of episode logs.

#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/planner.hpp"
#include "seeknet/policy.hpp"
#include "seeknet/rollout.hpp"

namespace seeknet {

// Table horizon labels mapped to simulation ticks. Labels stay verbatim; at
// dt=0.1 s the default mapping is one tick per 10 label units.
using HorizonMap = std::vector<std::pair<int, int>>;

inline HorizonMap default_horizons() { return {{80, 8}, {160, 16}, {320, 32}}; }

struct MetricsReport {
    double acc_cls = 0.0;
    double miou = 0.0;
    double acc_tr = 0.0;
    std::map<int, double> delta_acc;  // horizon label -> accuracy; empty when no pursuits
    int episodes = 0;
    std::vector<uint64_t> seeds;
    double collision_rate = 0.0;
    int humans_detected = 0;
    int pursuit_events = 0;
    int track_ticks = 0;
};

// ---------------------------------------------------------------------------
// Pure computation from logs
// ---------------------------------------------------------------------------

inline MetricsReport compute_metrics(const std::vector<EpisodeLog>& logs,
                                     const HorizonMap& horizons = default_horizons()) {
    MetricsReport rep;
    rep.episodes = static_cast<int>(logs.size());
    if (logs.empty()) throw ConfigError("compute_metrics: no episodes");

    long long fd_correct = 0, fd_count = 0;
    double iou_sum = 0.0;
    long long tr_correct = 0, tr_count = 0;
    std::map<int, std::pair<long long, long long>> dacc;  // label -> (correct, measured)
    int collisions = 0;
    std::set<uint64_t> seed_set;

    for (const auto& log : logs) {
        seed_set.insert(log.episode_seed);
        if (log.terminal_cause == "collision") ++collisions;

        for (const auto& fd : log.first_detections) {
            fd_correct += fd.correct ? 1 : 0;
            ++fd_count;
            iou_sum += fd.iou;
        }

        // Tracking accuracy: a detection-tick is correct when its track still
        // maps to the ground-truth human it was born from.
        std::map<int, int> birth_human;
        for (const auto& t : log.ticks) {
            for (const auto& d : t.detections) {
                if (d.track_id < 0) continue;
                auto [it, inserted] = birth_human.emplace(d.track_id, d.human_id);
                tr_correct += (it->second == d.human_id) ? 1 : 0;
                ++tr_count;
            }
        }

        // Pursued-target classification accuracy, measured at
        // min(start + horizon, episode end) from the latest detection of the
        // pursued human inside the pursuit window; no detection counts wrong.
        const int last_tick = log.ticks.empty() ? 0 : log.ticks.back().tick;
        rep.pursuit_events += static_cast<int>(log.pursuits.size());
        for (const auto& ev : log.pursuits) {
            for (const auto& [label, ticks] : horizons) {
                const int measure_tick = std::min(ev.start_tick + ticks, last_tick);
                bool found = false, correct = false;
                for (const auto& t : log.ticks) {
                    if (t.tick < ev.start_tick || t.tick > measure_tick) continue;
                    for (const auto& d : t.detections) {
                        if (d.human_id != ev.human_id) continue;
                        found = true;
                        correct = d.correct;  // later ticks overwrite: latest wins
                    }
                }
                auto& cell = dacc[label];
                cell.first += (found && correct) ? 1 : 0;
                cell.second += 1;
            }
        }
    }

    rep.humans_detected = static_cast<int>(fd_count);
    rep.acc_cls = fd_count > 0 ? static_cast<double>(fd_correct) / fd_count : 0.0;
    rep.miou = fd_count > 0 ? iou_sum / static_cast<double>(fd_count) : 0.0;
    rep.acc_tr = tr_count > 0 ? static_cast<double>(tr_correct) / tr_count : 1.0;
    rep.track_ticks = static_cast<int>(tr_count);
    for (const auto& [label, cell] : dacc)
        if (cell.second > 0)
            rep.delta_acc[label] = static_cast<double>(cell.first) / cell.second;
    rep.collision_rate = static_cast<double>(collisions) / static_cast<double>(logs.size());
    rep.seeds.assign(seed_set.begin(), seed_set.end());
    return rep;
}

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

enum class PolicyKind { Passive, Random, Shortest, Learned };

inline const char* policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::Passive: return "passive";
        case PolicyKind::Random: return "random";
        case PolicyKind::Shortest: return "shortest";
        case PolicyKind::Learned: return "seeknet";
    }
    return "?";
}

inline PolicyKind policy_kind_from_name(const std::string& name) {
    if (name == "passive") return PolicyKind::Passive;
    if (name == "random") return PolicyKind::Random;
    if (name == "shortest") return PolicyKind::Shortest;
    if (name == "learned" || name == "seeknet") return PolicyKind::Learned;
    throw ConfigError("unknown policy name: " + name);
}

struct EvalRun {
    std::vector<Scenario> scenarios;
    SimConfig sim;
    PolicyKind kind = PolicyKind::Passive;
    const PolicyNetwork* net = nullptr;  // required for Learned
    ActionSpace actions = ActionSpace::make();
    std::vector<uint64_t> seeds = {1};
    HorizonMap horizons = default_horizons();
};

struct EvalOutcome {
    MetricsReport report;
    std::vector<EpisodeLog> logs;
};

inline EvalOutcome evaluate(const EvalRun& run) {
    if (run.scenarios.empty()) throw ConfigError("evaluate: empty scenario suite");
    if (run.seeds.empty()) throw ConfigError("evaluate: need at least one seed");
    if (run.kind == PolicyKind::Learned && !run.net)
        throw ConfigError("evaluate: learned policy requires a checkpoint");

    // Shared per-scenario grids for the shortest-path baseline.
    std::vector<std::shared_ptr<const OccupancyGrid>> grids(run.scenarios.size());
    if (run.kind == PolicyKind::Shortest) {
        for (size_t i = 0; i < run.scenarios.size(); ++i)
            grids[i] = std::make_shared<const OccupancyGrid>(
                build_occupancy_grid(run.scenarios[i].bounds, run.scenarios[i].wall_segments(),
                                     run.scenarios[i].robot_radius));
    }
    if (run.kind == PolicyKind::Learned) {
        // Warm the zero-mask embedding cache before any parallel fan-out.
        PolicyObs warm;
        const PolicyArch& arch = run.net->arch();
        warm.mask = Tensor({arch.mask_hist, arch.mask_res, arch.mask_res});
        warm.lidar = Tensor({arch.lidar_frames, arch.lidar_beams});
        warm.mask_all_zero = true;
        run.net->forward(warm, nullptr);
    }

    struct Job {
        size_t scenario = 0;
        uint64_t seed = 0;
    };
    std::vector<Job> jobs;
    for (uint64_t seed : run.seeds)
        for (size_t s = 0; s < run.scenarios.size(); ++s) jobs.push_back({s, seed});

    std::vector<EpisodeLog> logs(jobs.size());
    const std::string name = policy_kind_name(run.kind);
    parallel_for(static_cast<int>(jobs.size()), [&](int i) {
        const Job& job = jobs[static_cast<size_t>(i)];
        const uint64_t episode_seed =
            splitmix64(splitmix64(job.seed) + 0x9e3779b97f4a7c15ull * (job.scenario + 1));
        PolicyFn policy;
        switch (run.kind) {
            case PolicyKind::Passive: policy = make_passive_policy(); break;
            case PolicyKind::Random: policy = make_random_policy(run.actions); break;
            case PolicyKind::Shortest:
                policy = make_shortest_path_policy(grids[job.scenario], run.sim.pursuit);
                break;
            case PolicyKind::Learned: policy = make_network_policy(*run.net, run.actions); break;
        }
        logs[static_cast<size_t>(i)] =
            rollout(run.scenarios[job.scenario], run.sim, policy, episode_seed, name);
    });

    EvalOutcome out;
    out.logs = std::move(logs);
    out.report = compute_metrics(out.logs, run.horizons);
    out.report.seeds = run.seeds;
    return out;
}

// ---------------------------------------------------------------------------
// Report rendering. Fixed formatting keeps fixed-seed runs byte-identical.
// ---------------------------------------------------------------------------

struct TableRow {
    std::string train_label;
    std::string test_label;
    MetricsReport report;
};

inline std::string format_fraction(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string report_csv_header(const HorizonMap& horizons) {
    std::string s = "train,test,acc_cls,miou,acc_tr";
    for (const auto& [label, _] : horizons) s += ",dacc_" + std::to_string(label);
    s += ",collision_rate,episodes\n";
    return s;
}

// The passive row renders absent pursuit columns as empty cells.
inline std::string report_csv_row(const TableRow& row, const HorizonMap& horizons) {
    std::string s = row.train_label + "," + row.test_label;
    s += "," + format_fraction(row.report.acc_cls);
    s += "," + format_fraction(row.report.miou);
    s += "," + format_fraction(row.report.acc_tr);
    for (const auto& [label, _] : horizons) {
        const bool absent = row.test_label == "passive" || !row.report.delta_acc.count(label);
        s += absent ? "," : ("," + format_fraction(row.report.delta_acc.at(label)));
    }
    s += "," + format_fraction(row.report.collision_rate);
    s += "," + std::to_string(row.report.episodes) + "\n";
    return s;
}

inline std::string render_table_csv(const std::vector<TableRow>& rows,
                                    const HorizonMap& horizons = default_horizons()) {
    std::string s = report_csv_header(horizons);
    for (const auto& r : rows) s += report_csv_row(r, horizons);
    return s;
}

inline std::string render_table_text(const std::vector<TableRow>& rows,
                                     const HorizonMap& horizons = default_horizons()) {
    const auto pct = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%5.1f", 100.0 * v);
        return std::string(buf);
    };
    std::string s;
    s += "train         test          acc_cls  miou   acc_tr";
    for (const auto& [label, _] : horizons) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "  d%3d ", label);
        s += buf;
    }
    s += "  coll%\n";
    for (const auto& r : rows) {
        char head[64];
        std::snprintf(head, sizeof(head), "%-13s %-13s ", r.train_label.c_str(),
                      r.test_label.c_str());
        s += head;
        s += pct(r.report.acc_cls) + "    " + pct(r.report.miou) + "  " + pct(r.report.acc_tr);
        for (const auto& [label, _] : horizons) {
            const bool absent = r.test_label == "passive" || !r.report.delta_acc.count(label);
            s += absent ? "      -" : ("  " + pct(r.report.delta_acc.at(label)));
        }
        s += "  " + pct(r.report.collision_rate) + "\n";
    }
    return s;
}

}  // namespace seeknet
