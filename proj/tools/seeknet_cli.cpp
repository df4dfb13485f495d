// seeknet command line: scenario generation, policy training, Table-style
// evaluation, receptive-field audits and gradient checks.
//
// Exit codes: 0 success, 2 configuration errors, 3 file-format errors,
// 4 runtime failures.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "seeknet/io.hpp"
#include "seeknet/metrics.hpp"
#include "seeknet/percept.hpp"
#include "seeknet/presets.hpp"
#include "seeknet/train.hpp"

namespace fs = std::filesystem;
using namespace seeknet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitRuntime = 4;

struct GlobalOpts {
    std::string preset = "desk";
    std::string config_path;
    std::string out_dir = "out";
    uint64_t seed = 1;
};

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw ConfigError("empty seed list");
    return seeds;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

std::vector<Scenario> make_suite(const Preset& preset, int count, uint64_t seed) {
    std::vector<Scenario> suite;
    for (int i = 0; i < count; ++i)
        suite.push_back(generate_scenario(preset.generator, splitmix64(seed) + 7919ull * i));
    return suite;
}

int cmd_gen(const GlobalOpts& g, int count) {
    const Preset preset = load_preset(g.preset, g.config_path);
    ensure_out_dir(g.out_dir);
    const auto suite = make_suite(preset, count, g.seed);
    const std::string path = g.out_dir + "/suite.json";
    save_suite(suite, path);
    std::cout << "wrote " << suite.size() << " scenarios to " << path << "\n";
    return kExitOk;
}

int cmd_train(const GlobalOpts& g, const std::string& suite_path, int iters, int batch, double lr,
              int checkpoint_interval) {
    Preset preset = load_preset(g.preset, g.config_path);
    if (iters > 0) preset.train.iterations = iters;
    if (batch > 0) preset.train.batch_episodes = batch;
    if (lr > 0) preset.train.optimizer.lr = lr;
    preset.train.seed = g.seed;
    ensure_out_dir(g.out_dir);
    if (checkpoint_interval > 0) {
        preset.train.checkpoint_interval = checkpoint_interval;
        preset.train.checkpoint_dir = g.out_dir;
    }

    const auto suite = load_suite(suite_path);
    PolicyNetwork net(preset.arch);
    net.init(g.seed);
    PursuitEnv env(suite, preset.sim, ActionSpace::make(preset.arch.v_levels, preset.arch.w_levels));
    const TrainResult result = train(net, env, preset.train);

    save_checkpoint(net, g.out_dir + "/checkpoint.ckpt");
    write_curves_csv(result.curves, g.out_dir + "/curves.csv");
    double final_ret = 0.0;
    const int tail = std::min<int>(10, static_cast<int>(result.curves.size()));
    for (int i = 0; i < tail; ++i)
        final_ret += result.curves[result.curves.size() - 1 - static_cast<size_t>(i)].mean_return;
    std::cout << "trained " << preset.train.iterations << " iterations; late mean return "
              << (tail > 0 ? final_ret / tail : 0.0) << "\n";
    std::cout << "wrote " << g.out_dir << "/checkpoint.ckpt and curves.csv\n";
    return kExitOk;
}

struct EvalArtifacts {
    MetricsReport report;
    std::vector<EpisodeLog> logs;
};

EvalArtifacts run_eval(const Preset& preset, const std::vector<Scenario>& suite,
                       PolicyKind kind, const std::string& checkpoint,
                       const std::vector<uint64_t>& seeds, PolicyNetwork* net_out = nullptr) {
    EvalRun run;
    run.scenarios = suite;
    run.sim = preset.sim;
    run.kind = kind;
    run.seeds = seeds;
    run.horizons = preset.horizons;
    run.actions = ActionSpace::make(preset.arch.v_levels, preset.arch.w_levels);
    static PolicyNetwork net;  // storage when the caller does not keep one
    PolicyNetwork* net_ptr = net_out ? net_out : &net;
    if (kind == PolicyKind::Learned) {
        if (checkpoint.empty()) throw ConfigError("eval: learned policy requires --checkpoint");
        *net_ptr = PolicyNetwork(preset.arch);
        load_checkpoint(*net_ptr, checkpoint);
        run.net = net_ptr;
    }
    EvalOutcome out = evaluate(run);
    return {std::move(out.report), std::move(out.logs)};
}

void dump_sensor_artifacts(const Preset& preset, const Scenario& sc, const std::string& dir) {
    // First-episode debug rasters: lidar beam table plus modal/amodal masks
    // of human 0 from the robot start.
    const auto walls = sc.wall_segments();
    const LidarScan scan = raycast_lidar(walls, sc.humans, sc.robot_start, preset.sim.lidar, 0);
    write_scan_csv(scan, dir + "/scan0.csv");
    if (!sc.humans.empty()) {
        const SegMask modal =
            render_mask(sc.humans[0], sc.robot_start, walls, sc.humans, preset.sim.camera, false);
        const SegMask amodal =
            render_mask(sc.humans[0], sc.robot_start, walls, sc.humans, preset.sim.camera, true);
        write_pgm(modal, dir + "/mask0_modal.pgm");
        write_pgm(amodal, dir + "/mask0_amodal.pgm");
    }
}

void dump_planned_path(const Preset& preset, const Scenario& sc, const std::string& dir) {
    const auto grid =
        build_occupancy_grid(sc.bounds, sc.wall_segments(), sc.robot_radius);
    if (sc.humans.empty()) return;
    RobotState rs;
    rs.pose = sc.robot_start;
    rs.radius = sc.robot_radius;
    std::vector<Vec2> path;
    shortest_path_policy(grid, rs, sc.humans[0].pose.position(), preset.sim.pursuit, &path);
    write_path_csv(path, dir + "/plan0.csv");
}

int cmd_eval(const GlobalOpts& g, const std::string& suite_path, const std::string& policy,
             const std::string& checkpoint, const std::string& seeds_csv, bool dump_sensors,
             bool dump_paths) {
    const Preset preset = load_preset(g.preset, g.config_path);
    const auto suite = load_suite(suite_path);
    const auto seeds = parse_seed_list(seeds_csv);
    const PolicyKind kind = policy_kind_from_name(policy);
    ensure_out_dir(g.out_dir);

    const EvalArtifacts art = run_eval(preset, suite, kind, checkpoint, seeds);

    TableRow row{policy_kind_name(kind), policy_kind_name(kind), art.report};
    std::ofstream csv(g.out_dir + "/report.csv");
    if (!csv) throw ConfigError("eval: cannot open report.csv for writing");
    csv << report_csv_header(preset.horizons) << report_csv_row(row, preset.horizons);
    csv.close();
    save_logs_jsonl(art.logs, g.out_dir + "/logs.jsonl");
    save_detections_jsonl(art.logs, g.out_dir + "/detections.jsonl");
    if (dump_sensors && !suite.empty()) dump_sensor_artifacts(preset, suite[0], g.out_dir);
    if (dump_paths && !suite.empty()) dump_planned_path(preset, suite[0], g.out_dir);

    std::cout << render_table_text({row}, preset.horizons);
    std::cout << "wrote " << g.out_dir << "/report.csv, logs.jsonl, detections.jsonl\n";
    return kExitOk;
}

int cmd_table(const GlobalOpts& g, const std::string& suite_path, const std::string& policies_csv,
              const std::string& checkpoint, const std::string& seeds_csv) {
    const Preset preset = load_preset(g.preset, g.config_path);
    const auto suite = load_suite(suite_path);
    const auto seeds = parse_seed_list(seeds_csv);
    ensure_out_dir(g.out_dir);

    std::vector<std::string> names;
    {
        std::stringstream ss(policies_csv);
        std::string item;
        while (std::getline(ss, item, ',')) names.push_back(item);
    }
    if (names.size() < 2) throw ConfigError("table: need at least two policies");

    std::vector<TableRow> rows;
    for (const auto& name : names) {
        const PolicyKind kind = policy_kind_from_name(name);
        const EvalArtifacts art = run_eval(preset, suite, kind, checkpoint, seeds);
        rows.push_back({policy_kind_name(kind), policy_kind_name(kind), art.report});
    }

    const std::string csv = render_table_csv(rows, preset.horizons);
    const std::string text = render_table_text(rows, preset.horizons);
    std::ofstream fcsv(g.out_dir + "/table.csv");
    fcsv << csv;
    std::ofstream ftxt(g.out_dir + "/table.txt");
    ftxt << text;
    std::cout << text;
    std::cout << "wrote " << g.out_dir << "/table.csv and table.txt\n";
    return kExitOk;
}

int cmd_rf_audit(const std::string& stack_path, const std::string& priors_path) {
    std::ifstream in(stack_path);
    if (!in) throw ConfigError("rf-audit: missing stack file " + stack_path);
    std::vector<LayerSpec> layers;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        LayerSpec l;
        if (!(ss >> l.stride >> l.kernel))
            throw FormatError("rf-audit: expected 'stride kernel' at line " +
                              std::to_string(line_no));
        layers.push_back(l);
    }
    const auto trace = receptive_field_trace(layers);
    std::cout << "layer  stride  kernel  rf\n";
    for (size_t i = 0; i < layers.size(); ++i) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%-6zu %-7d %-7d %lld\n", i, layers[i].stride,
                      layers[i].kernel, trace[i]);
        std::cout << buf;
    }

    if (!priors_path.empty()) {
        std::ifstream pin(priors_path);
        if (!pin) throw ConfigError("rf-audit: missing priors file " + priors_path);
        std::cout << "\nprior coverage (rule: rf >= 2 * max(w, h))\n";
        std::cout << "prior_w  prior_h  first_layer\n";
        while (std::getline(pin, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::stringstream ss(line);
            double w = 0, h = 0;
            if (!(ss >> w >> h)) throw FormatError("rf-audit: expected 'width height' in priors");
            const double need = 2.0 * std::max(w, h);
            int first = -1;
            for (size_t i = 0; i < trace.size(); ++i) {
                if (static_cast<double>(trace[i]) >= need) {
                    first = static_cast<int>(i);
                    break;
                }
            }
            char buf[80];
            if (first >= 0)
                std::snprintf(buf, sizeof(buf), "%-8.1f %-8.1f %d\n", w, h, first);
            else
                std::snprintf(buf, sizeof(buf), "%-8.1f %-8.1f none\n", w, h);
            std::cout << buf;
        }
    }
    return kExitOk;
}

int cmd_grad_check(const GlobalOpts& g, int seeds, int coords, double threshold) {
    const Preset preset = load_preset(g.preset, g.config_path);
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const auto res = grad_check_policy(preset.arch, splitmix64(g.seed) + 31ull * s, coords);
        worst = std::max(worst, res.max_rel_err);
        std::cout << "seed " << s << ": max rel err " << res.max_rel_err << " over "
                  << res.coords_checked << " coordinates\n";
    }
    std::cout << "overall max rel err " << worst << " (threshold " << threshold << ")\n";
    if (worst > threshold) throw NumericError("gradient check exceeded threshold");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"seeknet: occlusion-aware pursuit lab"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--preset", g.preset, "preset name: desk or paper");
    app.add_option("--config", g.config_path, "JSON config overlay");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "master seed");

    auto* gen = app.add_subcommand("gen", "generate a scenario suite");
    int gen_count = 20;
    gen->add_option("--count", gen_count, "number of scenarios");

    auto* train_cmd = app.add_subcommand("train", "train the pursuit policy");
    std::string train_suite;
    int train_iters = 0, train_batch = 0, train_ckpt_interval = 0;
    double train_lr = 0.0;
    train_cmd->add_option("--suite", train_suite, "scenario suite")->required();
    train_cmd->add_option("--iters", train_iters, "training iterations");
    train_cmd->add_option("--batch", train_batch, "episodes per iteration");
    train_cmd->add_option("--lr", train_lr, "learning rate override");
    train_cmd->add_option("--checkpoint-interval", train_ckpt_interval,
                          "write intermediate checkpoints every N iterations");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate one policy on a suite");
    std::string eval_suite, eval_policy = "passive", eval_checkpoint, eval_seeds = "1";
    bool dump_sensors = false, dump_paths = false;
    eval_cmd->add_option("--suite", eval_suite, "scenario suite")->required();
    eval_cmd->add_option("--policy", eval_policy, "passive|random|shortest|learned");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint for the learned policy");
    eval_cmd->add_option("--seeds", eval_seeds, "comma-separated evaluation seeds");
    eval_cmd->add_flag("--dump-sensors", dump_sensors, "write scan CSV and mask PGMs");
    eval_cmd->add_flag("--dump-paths", dump_paths, "write a planned path CSV");

    auto* table_cmd = app.add_subcommand("table", "compare policies side by side");
    std::string table_suite, table_policies = "passive,random,shortest", table_checkpoint,
                table_seeds = "1";
    table_cmd->add_option("--suite", table_suite, "scenario suite")->required();
    table_cmd->add_option("--policies", table_policies, "comma-separated policy list");
    table_cmd->add_option("--checkpoint", table_checkpoint, "checkpoint for the learned policy");
    table_cmd->add_option("--seeds", table_seeds, "comma-separated evaluation seeds");

    auto* rf_cmd = app.add_subcommand("rf-audit", "receptive-field report for a layer stack");
    std::string rf_stack, rf_priors;
    rf_cmd->add_option("--stack", rf_stack, "file with one 'stride kernel' pair per line")
        ->required();
    rf_cmd->add_option("--priors", rf_priors, "optional file with 'width height' prior dims");

    auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference gradient check");
    int gc_seeds = 10, gc_coords = 200;
    double gc_threshold = 1e-4;
    gc_cmd->add_option("--seeds", gc_seeds, "number of random nets to check");
    gc_cmd->add_option("--coords", gc_coords, "coordinates per net");
    gc_cmd->add_option("--threshold", gc_threshold, "max allowed relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen(g, gen_count);
        if (train_cmd->parsed())
            return cmd_train(g, train_suite, train_iters, train_batch, train_lr,
                             train_ckpt_interval);
        if (eval_cmd->parsed())
            return cmd_eval(g, eval_suite, eval_policy, eval_checkpoint, eval_seeds, dump_sensors,
                            dump_paths);
        if (table_cmd->parsed())
            return cmd_table(g, table_suite, table_policies, table_checkpoint, table_seeds);
        if (rf_cmd->parsed()) return cmd_rf_audit(rf_stack, rf_priors);
        if (gc_cmd->parsed()) return cmd_grad_check(g, gc_seeds, gc_coords, gc_threshold);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
