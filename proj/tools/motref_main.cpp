// Command-line front end: refine motions, evaluate them, synthesize test data
// and calibrate trajectory scale. Exit codes: 0 success, 2 usage or input
// problems, 3 optimizer divergence.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "motref/contact.hpp"
#include "motref/errors.hpp"
#include "motref/metrics.hpp"
#include "motref/optim.hpp"
#include "motref/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace motref;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

int thread_cap() {
    if (const char* env = std::getenv("MOTION_REFINE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::numeric_limits<int>::max();
}

// Removes files this run created when it fails partway, so a failed invocation
// never leaves half-written outputs behind.
class OutputTracker {
public:
    void add(const std::string& path) { paths_.push_back(path); }
    void discard_all() {
        for (const auto& p : paths_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    std::vector<std::string> paths_;
};

struct PipelineConfig {
    std::string skeleton, camera, init_motion, predictions, ground_truth, output_dir;
    OptimConfig optim;
    ContactConfig contact;
    bool enable_postproc = false;
    bool emit_trace = true;
    std::uint64_t seed = 1;
};

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config: invalid JSON in '" + path + "': " + e.what());
    }
    PipelineConfig cfg;
    auto need_string = [&j, &path](const char* field) {
        if (!j.contains(field) || !j[field].is_string()) {
            throw ParseError("config: missing or non-string field '" + std::string(field) +
                             "' in '" + path + "'");
        }
        return j[field].get<std::string>();
    };
    cfg.skeleton = need_string("skeleton");
    cfg.camera = need_string("camera");
    cfg.init_motion = need_string("init_motion");
    cfg.predictions = need_string("predictions");
    cfg.output_dir = need_string("output_dir");
    if (j.contains("ground_truth")) cfg.ground_truth = j["ground_truth"].get<std::string>();
    if (j.contains("enable_postproc")) cfg.enable_postproc = j["enable_postproc"].get<bool>();
    if (j.contains("emit_trace")) cfg.emit_trace = j["emit_trace"].get<bool>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("optim")) {
        const json& o = j["optim"];
        if (o.contains("lr0")) cfg.optim.lr0 = o["lr0"].get<double>();
        if (o.contains("epochs")) cfg.optim.epochs = o["epochs"].get<int>();
        if (o.contains("warmup_epochs")) cfg.optim.warmup_epochs = o["warmup_epochs"].get<int>();
        if (o.contains("decay_epoch")) cfg.optim.decay_epoch = o["decay_epoch"].get<int>();
        if (o.contains("decay_factor")) cfg.optim.decay_factor = o["decay_factor"].get<double>();
        if (o.contains("adam_beta1")) cfg.optim.adam_beta1 = o["adam_beta1"].get<double>();
        if (o.contains("adam_beta2")) cfg.optim.adam_beta2 = o["adam_beta2"].get<double>();
        if (o.contains("adam_eps")) cfg.optim.adam_eps = o["adam_eps"].get<double>();
        if (o.contains("weights")) {
            const json& w = o["weights"];
            if (w.contains("lambda_v")) cfg.optim.weights.lambda_v = w["lambda_v"].get<double>();
            if (w.contains("lambda_a")) cfg.optim.weights.lambda_a = w["lambda_a"].get<double>();
            if (w.contains("lambda_k")) cfg.optim.weights.lambda_k = w["lambda_k"].get<double>();
            if (w.contains("lambda_jerk"))
                cfg.optim.weights.lambda_jerk = w["lambda_jerk"].get<double>();
            if (w.contains("lambda_reg")) cfg.optim.weights.lambda_reg = w["lambda_reg"].get<double>();
        }
    }
    if (j.contains("contact")) {
        const json& c = j["contact"];
        if (c.contains("xi_v")) cfg.contact.xi_v = c["xi_v"].get<double>();
        if (c.contains("ik_iterations")) cfg.contact.ik_iterations = c["ik_iterations"].get<int>();
        if (c.contains("ik_damping")) cfg.contact.ik_damping = c["ik_damping"].get<double>();
        if (c.contains("ik_step_tolerance"))
            cfg.contact.ik_step_tolerance = c["ik_step_tolerance"].get<double>();
        if (c.contains("end_effectors"))
            cfg.contact.end_effectors = c["end_effectors"].get<std::vector<int>>();
    }
    return cfg;
}

int run_refine_config(const std::string& config_path, std::ostream& log) {
    OutputTracker outputs;
    try {
        const PipelineConfig cfg = load_pipeline_config(config_path);
        const Skeleton skel = load_skeleton(cfg.skeleton);
        const Camera cam = load_camera(cfg.camera);
        MotionSequence init = load_motion(cfg.init_motion);
        const DynamicsPredictions preds = load_predictions(cfg.predictions);
        if (init.frame_tag == FrameTag::camera) {
            init = camera_to_world(init, cam, skel);
        }
        cfg.optim.validate();
        fs::create_directories(cfg.output_dir);

        OptimConfig optim = cfg.optim;
        optim.record_trace = cfg.emit_trace;
        RefinementResult result = refine(init, skel, cam, preds, optim);
        log << "scale: " << result.scale << "\n";
        log << "final gradient norm: " << result.final_gradient_norm << "\n";
        log << "wall seconds: " << result.wall_seconds << "\n";

        if (cfg.enable_postproc) {
            const JointPositions world = joints_world(result.refined, skel);
            const ContactTargets targets = contact_targets(world, preds, skel, cfg.contact);
            IkResult ik = ik_refine(result.refined, skel, targets, cfg.contact);
            result.refined = ik.seq;
            const std::string report_path = (fs::path(cfg.output_dir) / "contact_report.csv").string();
            save_contact_report_csv(ik.report, report_path);
            outputs.add(report_path);
        }

        const std::string motion_path = (fs::path(cfg.output_dir) / "refined_motion.json").string();
        save_motion(result.refined, motion_path);
        outputs.add(motion_path);

        if (cfg.emit_trace) {
            const std::string trace_path = (fs::path(cfg.output_dir) / "trace.csv").string();
            save_trace_csv(result.trace, trace_path);
            outputs.add(trace_path);
        }

        if (!cfg.ground_truth.empty()) {
            MotionSequence gt = load_motion(cfg.ground_truth);
            if (gt.frame_tag == FrameTag::camera) gt = camera_to_world(gt, cam, skel);
            const metrics::MetricReport before = metrics::full_report(init, gt, skel, cam);
            const metrics::MetricReport after = metrics::full_report(result.refined, gt, skel, cam);
            const std::string before_path = (fs::path(cfg.output_dir) / "report_init.json").string();
            const std::string after_path = (fs::path(cfg.output_dir) / "report_refined.json").string();
            metrics::save_report_json(before, before_path);
            metrics::save_report_json(after, after_path);
            outputs.add(before_path);
            outputs.add(after_path);
            log << "metrics before refinement:\n" << metrics::format_table(before);
            log << "metrics after refinement:\n" << metrics::format_table(after);
        }
        log << "refined motion written to " << motion_path << "\n";
        return kExitOk;
    } catch (const DivergedError& e) {
        outputs.discard_all();
        log << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        outputs.discard_all();
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_refine(const std::string& config_path, const std::string& manifest_path, int jobs) {
    if (config_path.empty() == manifest_path.empty()) {
        std::cerr << "error: refine needs exactly one of --config or --manifest\n";
        return kExitUsage;
    }
    if (!manifest_path.empty()) {
        std::vector<std::string> configs;
        try {
            std::ifstream in(manifest_path);
            if (!in) throw ParseError("manifest: cannot open '" + manifest_path + "'");
            json j;
            in >> j;
            const json& arr = j.is_array() ? j : j.at("configs");
            for (const auto& entry : arr) configs.push_back(entry.get<std::string>());
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitUsage;
        }
        if (configs.empty()) {
            std::cerr << "error: manifest lists no configs\n";
            return kExitUsage;
        }
        const int workers =
            std::max(1, std::min({jobs, thread_cap(), static_cast<int>(configs.size())}));
        std::atomic<size_t> next{0};
        std::atomic<int> worst{kExitOk};
        std::mutex io_mutex;
        auto work = [&]() {
            for (size_t i = next.fetch_add(1); i < configs.size(); i = next.fetch_add(1)) {
                std::ostringstream log;
                const int code = run_refine_config(configs[i], log);
                int prev = worst.load();
                while (code > prev && !worst.compare_exchange_weak(prev, code)) {
                }
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cout << "[" << configs[i] << "]\n" << log.str();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
        return worst.load();
    }
    return run_refine_config(config_path, std::cout);
}

int cmd_metrics(const std::string& pred_path, const std::string& gt_path,
                const std::string& camera_path, const std::string& skeleton_path,
                const std::string& out_path) {
    try {
        const Skeleton skel = load_skeleton(skeleton_path);
        const Camera cam = load_camera(camera_path);
        MotionSequence pred = load_motion(pred_path);
        MotionSequence gt = load_motion(gt_path);
        if (pred.frame_tag == FrameTag::camera) pred = camera_to_world(pred, cam, skel);
        if (gt.frame_tag == FrameTag::camera) gt = camera_to_world(gt, cam, skel);
        const metrics::MetricReport report = metrics::full_report(pred, gt, skel, cam);
        std::cout << metrics::format_table(report);
        if (!out_path.empty()) {
            metrics::save_report_json(report, out_path);
            std::cout << "report written to " << out_path << "\n";
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_synth(const std::string& name, const std::string& out_dir,
              const scenario::ScenarioConfig& scen_cfg, const NoiseConfig& noise) {
    OutputTracker outputs;
    try {
        const scenario::ScenarioData data = scenario::make_scenario(name, scen_cfg);
        const DynamicsPredictions preds = synth_oracle(data.gt, data.skeleton, data.camera, noise);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);

        auto emit = [&outputs](const std::string& path, auto&& writer) {
            writer(path);
            outputs.add(path);
        };
        emit((dir / "skeleton.json").string(),
             [&data](const std::string& p) { save_skeleton(data.skeleton, p); });
        emit((dir / "camera.json").string(),
             [&data](const std::string& p) { save_camera(data.camera, p); });
        emit((dir / "gt_motion.json").string(),
             [&data](const std::string& p) { save_motion(data.gt, p); });
        emit((dir / "init_motion.json").string(),
             [&data](const std::string& p) { save_motion(data.init, p); });
        emit((dir / "predictions.json").string(),
             [&preds](const std::string& p) { save_predictions(preds, p); });

        // A ready-to-run refinement config pointing at the files above.
        json cfg;
        cfg["skeleton"] = (dir / "skeleton.json").string();
        cfg["camera"] = (dir / "camera.json").string();
        cfg["init_motion"] = (dir / "init_motion.json").string();
        cfg["predictions"] = (dir / "predictions.json").string();
        cfg["ground_truth"] = (dir / "gt_motion.json").string();
        cfg["output_dir"] = (dir / "refined").string();
        cfg["emit_trace"] = true;
        cfg["seed"] = noise.seed;
        const std::string cfg_path = (dir / "config.json").string();
        std::ofstream out(cfg_path);
        out << cfg.dump(2) << '\n';
        outputs.add(cfg_path);

        std::cout << "scenario '" << name << "' written to " << out_dir << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        outputs.discard_all();
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_calibrate(const std::string& motion_path, const std::string& skeleton_path,
                  const std::string& camera_path, const std::string& predictions_path) {
    try {
        const Skeleton skel = load_skeleton(skeleton_path);
        const Camera cam = load_camera(camera_path);
        MotionSequence seq = load_motion(motion_path);
        if (seq.frame_tag == FrameTag::camera) seq = camera_to_world(seq, cam, skel);
        const DynamicsPredictions preds = load_predictions(predictions_path);
        const double s = calibrate_scale(seq, skel, cam, preds);
        std::printf("scale: %.17g\n", s);
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Global human motion refinement against predicted dynamics"};
    app.require_subcommand(1);

    auto* refine_cmd = app.add_subcommand("refine", "Refine a motion per a pipeline config");
    std::string config_path, manifest_path;
    int jobs = 1;
    refine_cmd->add_option("--config", config_path, "Pipeline config JSON");
    refine_cmd->add_option("--manifest", manifest_path, "JSON list of pipeline configs");
    refine_cmd->add_option("--jobs", jobs, "Concurrent sequences when using --manifest")
        ->check(CLI::PositiveNumber);

    auto* metrics_cmd = app.add_subcommand("metrics", "Evaluate a motion against ground truth");
    std::string pred_path, gt_path, camera_path, skeleton_path, out_path;
    metrics_cmd->add_option("--pred", pred_path, "Predicted motion JSON")->required();
    metrics_cmd->add_option("--gt", gt_path, "Ground-truth motion JSON")->required();
    metrics_cmd->add_option("--camera", camera_path, "Camera JSON")->required();
    metrics_cmd->add_option("--skeleton", skeleton_path, "Skeleton JSON")->required();
    metrics_cmd->add_option("--out", out_path, "Optional report JSON path");

    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic scenario to a directory");
    std::string scenario_name, synth_dir;
    scenario::ScenarioConfig scen_cfg;
    NoiseConfig noise;
    std::uint64_t seed = 1;
    synth_cmd->add_option("--scenario", scenario_name, "One of: sine_walk, squat, spin, constant, oversmoothed_walk")
        ->required();
    synth_cmd->add_option("--out-dir", synth_dir, "Output directory")->required();
    synth_cmd->add_option("--frames", scen_cfg.frames, "Frame count")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--dt", scen_cfg.dt, "Frame interval in seconds");
    synth_cmd->add_option("--seed", seed, "Seed for all generated noise");
    synth_cmd->add_option("--sigma-kp", noise.sigma_kp, "Keypoint noise, pixels");
    synth_cmd->add_option("--sigma-vel", noise.sigma_vel, "Velocity noise, m/s");
    synth_cmd->add_option("--sigma-acc", noise.sigma_acc, "Acceleration noise, m/s^2");
    synth_cmd->add_option("--dropout", noise.dropout_prob, "Confidence dropout probability");
    synth_cmd->add_option("--sigma-rot", scen_cfg.init_sigma_rot, "Init rotation noise, rad");
    synth_cmd->add_option("--sigma-trans", scen_cfg.init_sigma_trans, "Init translation noise, m");
    synth_cmd->add_option("--smooth-window", scen_cfg.smooth_window,
                          "Moving-average window for oversmoothed_walk");

    auto* cal_cmd = app.add_subcommand("calibrate", "Print the velocity-scale correction");
    std::string cal_motion, cal_skel, cal_cam, cal_preds;
    cal_cmd->add_option("--motion", cal_motion, "Motion JSON")->required();
    cal_cmd->add_option("--skeleton", cal_skel, "Skeleton JSON")->required();
    cal_cmd->add_option("--camera", cal_cam, "Camera JSON")->required();
    cal_cmd->add_option("--predictions", cal_preds, "Predictions JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (refine_cmd->parsed()) return cmd_refine(config_path, manifest_path, jobs);
    if (metrics_cmd->parsed()) {
        return cmd_metrics(pred_path, gt_path, camera_path, skeleton_path, out_path);
    }
    if (synth_cmd->parsed()) {
        scen_cfg.seed = seed;
        noise.seed = seed;
        return cmd_synth(scenario_name, synth_dir, scen_cfg, noise);
    }
    if (cal_cmd->parsed()) return cmd_calibrate(cal_motion, cal_skel, cal_cam, cal_preds);
    return kExitUsage;
}
