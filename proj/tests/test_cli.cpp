// End-to-end tests that drive the installed command-line binary. The test
// runner exports MOTREF_CLI with the binary's path; every test shells out,
// captures stdout/stderr into files and inspects exit codes and artifacts.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <doctest.h>
#include <json.hpp>

#include "motref/body.hpp"
#include "motref/dynamics.hpp"
#include "motref/geom.hpp"
#include "motref/motion.hpp"
#include "oracles.hpp"

using nlohmann::json;
using namespace motref;

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
    const char* p = std::getenv("MOTREF_CLI");
    REQUIRE_MESSAGE(p != nullptr, "MOTREF_CLI must point at the motref binary");
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the binary with `args`, redirecting stdout/stderr into files under
// `dir`, and returns the exit code.
struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run_cli(const oracle::TempDir& dir, const std::string& args) {
    const std::string out_file = dir.file("last_stdout.txt");
    const std::string err_file = dir.file("last_stderr.txt");
    const std::string cmd = cli_path() + " " + args + " >" + out_file + " 2>" + err_file;
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    CliRun r;
    r.code = WEXITSTATUS(status);
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "expected file to exist: " << path);
    json j;
    in >> j;
    return j;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help succeeds and bad invocations exit with code 2") {
    oracle::TempDir dir;
    CHECK(run_cli(dir, "--help").code == 0);
    CHECK(run_cli(dir, "--help").out.find("refine") != std::string::npos);

    CHECK(run_cli(dir, "").code == 2);                    // a subcommand is required
    CHECK(run_cli(dir, "refine").code == 2);              // neither --config nor --manifest
    const CliRun both = run_cli(dir, "refine --config a.json --manifest b.json");
    CHECK(both.code == 2);
    CHECK(both.err.find("exactly one") != std::string::npos);

    const CliRun missing = run_cli(dir, "refine --config " + dir.file("nope.json"));
    CHECK(missing.code == 2);
    CHECK(missing.out.find("error:") != std::string::npos);

    const CliRun bad_scenario =
        run_cli(dir, "synth --scenario moonwalk --out-dir " + dir.file("s"));
    CHECK(bad_scenario.code == 2);
    CHECK(bad_scenario.err.find("error:") != std::string::npos);
}

TEST_CASE("synth writes a complete scenario directory, deterministically") {
    oracle::TempDir dir;
    const std::string out = dir.file("scene");
    const std::string args = "synth --scenario sine_walk --out-dir " + out +
                             " --frames 16 --seed 7 --sigma-kp 1.5 --sigma-vel 0.02 --dropout 0.1";
    REQUIRE(run_cli(dir, args).code == 0);

    const std::vector<std::string> files = {"skeleton.json",    "camera.json",      "gt_motion.json",
                                            "init_motion.json", "predictions.json", "config.json"};
    for (const auto& f : files) REQUIRE(fs::exists(fs::path(out) / f));

    // The emitted artifacts load back through the library.
    const Skeleton skel = load_skeleton((fs::path(out) / "skeleton.json").string());
    const MotionSequence gt = load_motion((fs::path(out) / "gt_motion.json").string());
    const DynamicsPredictions preds = load_predictions((fs::path(out) / "predictions.json").string());
    CHECK(gt.frames() == 16);
    CHECK(gt.joints() == skel.joint_count());
    CHECK(static_cast<int>(preds.keypoints2d.size()) == 16);

    // Same command, same seed: byte-identical files.
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(slurp((fs::path(out) / f).string()));
    REQUIRE(run_cli(dir, args).code == 0);
    for (size_t i = 0; i < files.size(); ++i) {
        CHECK_MESSAGE(slurp((fs::path(out) / files[i]).string()) == first[i],
                      "file changed between identical synth runs: " << files[i]);
    }

    // A different seed must actually change the generated noise.
    const std::string other = dir.file("scene_seed8");
    REQUIRE(run_cli(dir, "synth --scenario sine_walk --out-dir " + other +
                         " --frames 16 --seed 8 --sigma-kp 1.5 --sigma-vel 0.02 --dropout 0.1")
                .code == 0);
    CHECK(slurp((fs::path(other) / "predictions.json").string()) != first[4]);
    CHECK(slurp((fs::path(other) / "init_motion.json").string()) != first[3]);
}

TEST_CASE("refine runs end to end on a synthesized scenario") {
    oracle::TempDir dir;
    const std::string scene = dir.file("scene");
    REQUIRE(run_cli(dir, "synth --scenario sine_walk --out-dir " + scene +
                             " --frames 12 --seed 3 --sigma-kp 1.0")
                .code == 0);

    const std::string cfg_path = (fs::path(scene) / "config.json").string();
    json cfg = read_json(cfg_path);
    cfg["optim"] = json{{"epochs", 40}, {"warmup_epochs", 5}, {"decay_epoch", 30}};
    cfg["enable_postproc"] = true;
    write_json(cfg_path, cfg);

    const CliRun run = run_cli(dir, "refine --config " + cfg_path);
    REQUIRE_MESSAGE(run.code == 0, "stdout:\n" << run.out << "\nstderr:\n" << run.err);
    CHECK(run.out.find("scale:") != std::string::npos);
    CHECK(run.out.find("refined motion written") != std::string::npos);
    CHECK(run.out.find("metrics before refinement") != std::string::npos);

    const fs::path out_dir = fs::path(scene) / "refined";
    const MotionSequence refined = load_motion((out_dir / "refined_motion.json").string());
    refined.validate();
    CHECK(refined.frame_tag == FrameTag::world);
    CHECK(refined.frames() == 12);

    // Header plus one row per epoch.
    CHECK(count_lines(slurp((out_dir / "trace.csv").string())) == 41);

    const json before = read_json((out_dir / "report_init.json").string());
    const json after = read_json((out_dir / "report_refined.json").string());
    CHECK(before.contains("wa_mpjpe_mm"));
    CHECK(after.contains("jitter_m_s3"));

    const std::string contact = slurp((out_dir / "contact_report.csv").string());
    CHECK(contact.find("frame,effector,p_s,pre_error,post_error") == 0);
}

TEST_CASE("too-short sequences are reported as input errors, not crashes") {
    oracle::TempDir dir;
    const Skeleton skel = make_toy6_skeleton();

    MotionSequence seq;
    seq.dt = 0.05;
    seq.frame_tag = FrameTag::world;
    seq.beta = Eigen::VectorXd::Zero(skel.shape_dim());
    for (int t = 0; t < 3; ++t) {
        seq.theta.emplace_back(skel.joint_count(), AxisAngle::Zero());
        seq.root_orient.push_back(AxisAngle::Zero());
        seq.root_trans.push_back(Vec3(0.01 * t, 0.0, 0.0));
    }

    Camera cam;
    cam.fx = 500.0;
    cam.fy = 500.0;
    cam.cx = 320.0;
    cam.cy = 240.0;
    cam.extrinsics.assign(3, RigidTransform{Mat3::Identity(), Vec3(0.0, 0.0, 2.5)});

    const DynamicsPredictions preds = synth_oracle(seq, skel, cam, NoiseConfig{});

    save_skeleton(skel, dir.file("skeleton.json"));
    save_camera(cam, dir.file("camera.json"));
    save_motion(seq, dir.file("motion.json"));
    save_predictions(preds, dir.file("predictions.json"));
    write_json(dir.file("config.json"), json{{"skeleton", dir.file("skeleton.json")},
                                             {"camera", dir.file("camera.json")},
                                             {"init_motion", dir.file("motion.json")},
                                             {"predictions", dir.file("predictions.json")},
                                             {"output_dir", dir.file("out")}});

    const CliRun run = run_cli(dir, "refine --config " + dir.file("config.json"));
    CHECK(run.code == 2);
    CHECK(run.out.find("sequence too short for jerk term") != std::string::npos);
    CHECK_FALSE(fs::exists(fs::path(dir.file("out")) / "refined_motion.json"));
}

TEST_CASE("optimizer divergence exits with code 3 and leaves no outputs") {
    oracle::TempDir dir;
    const std::string scene = dir.file("scene");
    REQUIRE(run_cli(dir, "synth --scenario sine_walk --out-dir " + scene + " --frames 8 --seed 5")
                .code == 0);

    // Alternating astronomically large root heights overflow the squared jerk
    // term on the very first evaluation.
    const std::string motion_path = (fs::path(scene) / "init_motion.json").string();
    json motion = read_json(motion_path);
    REQUIRE(motion["frame_tag"] == "world");
    for (size_t t = 0; t < motion["frames"].size(); t += 2) {
        motion["frames"][t]["root_trans"][2] = 1e200;
    }
    write_json(motion_path, motion);

    const CliRun run = run_cli(dir, "refine --config " + (fs::path(scene) / "config.json").string());
    CHECK(run.code == 3);
    CHECK(run.out.find("epoch 0") != std::string::npos);
    CHECK_FALSE(fs::exists(fs::path(scene) / "refined" / "refined_motion.json"));
    CHECK_FALSE(fs::exists(fs::path(scene) / "refined" / "trace.csv"));
}

TEST_CASE("calibrate prints the scale for self-consistent data") {
    oracle::TempDir dir;
    const std::string scene = dir.file("scene");
    REQUIRE(run_cli(dir, "synth --scenario sine_walk --out-dir " + scene + " --frames 12 --seed 2")
                .code == 0);

    const fs::path p(scene);
    const CliRun run = run_cli(dir, "calibrate --motion " + (p / "gt_motion.json").string() +
                                        " --skeleton " + (p / "skeleton.json").string() +
                                        " --camera " + (p / "camera.json").string() +
                                        " --predictions " + (p / "predictions.json").string());
    REQUIRE(run.code == 0);
    const auto pos = run.out.find("scale: ");
    REQUIRE(pos != std::string::npos);
    const double scale = std::stod(run.out.substr(pos + 7));
    CHECK(scale == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("metrics prints a table and writes the optional report") {
    oracle::TempDir dir;
    const std::string scene = dir.file("scene");
    REQUIRE(run_cli(dir, "synth --scenario sine_walk --out-dir " + scene +
                             " --frames 20 --seed 4 --sigma-rot 0.03 --sigma-trans 0.01")
                .code == 0);

    const fs::path p(scene);
    const std::string report = dir.file("report.json");
    const CliRun run = run_cli(dir, "metrics --pred " + (p / "init_motion.json").string() +
                                        " --gt " + (p / "gt_motion.json").string() +
                                        " --camera " + (p / "camera.json").string() +
                                        " --skeleton " + (p / "skeleton.json").string() +
                                        " --out " + report);
    REQUIRE_MESSAGE(run.code == 0, run.err);
    CHECK(run.out.find("WA-MPJPE") != std::string::npos);
    CHECK(run.out.find("Jitter") != std::string::npos);
    CHECK(run.out.find("MPJVE") != std::string::npos);

    const json j = read_json(report);
    CHECK(j.contains("wa_mpjpe_mm"));
    CHECK(j.contains("pck_pixels"));
    CHECK(j["wa_mpjpe_mm"].get<double>() > 0.0);
}

TEST_CASE("manifest fan-out refines every listed config") {
    oracle::TempDir dir;
    std::vector<std::string> config_paths;
    for (int i = 0; i < 2; ++i) {
        const std::string scene = dir.file("scene" + std::to_string(i));
        REQUIRE(run_cli(dir, "synth --scenario sine_walk --out-dir " + scene + " --frames 10 --seed " +
                                 std::to_string(10 + i))
                    .code == 0);
        const std::string cfg_path = (fs::path(scene) / "config.json").string();
        json cfg = read_json(cfg_path);
        cfg["optim"] = json{{"epochs", 15}, {"warmup_epochs", 3}, {"decay_epoch", 10}};
        cfg["emit_trace"] = false;
        write_json(cfg_path, cfg);
        config_paths.push_back(cfg_path);
    }

    const std::string manifest = dir.file("manifest.json");
    write_json(manifest, json{{"configs", config_paths}});

    const CliRun run = run_cli(dir, "refine --manifest " + manifest + " --jobs 2");
    REQUIRE_MESSAGE(run.code == 0, run.out);
    for (int i = 0; i < 2; ++i) {
        CHECK(run.out.find("[" + config_paths[i] + "]") != std::string::npos);
        CHECK(fs::exists(fs::path(dir.file("scene" + std::to_string(i))) / "refined" /
                         "refined_motion.json"));
    }

    const CliRun empty = run_cli(dir, "refine --manifest " + dir.file("missing.json"));
    CHECK(empty.code == 2);
}

} // TEST_SUITE("cli")
