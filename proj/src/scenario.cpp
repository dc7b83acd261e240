#include "motref/scenario.hpp"

#include <cmath>
#include <numbers>

namespace motref {
namespace scenario {
namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Joint indices in the 24-joint body skeleton.
enum Joint {
    kPelvis = 0, kLeftHip = 1, kRightHip = 2, kSpine1 = 3, kLeftKnee = 4, kRightKnee = 5,
    kSpine2 = 6, kLeftAnkle = 7, kRightAnkle = 8, kSpine3 = 9, kNeck = 12,
    kLeftShoulder = 16, kRightShoulder = 17, kLeftElbow = 18, kRightElbow = 19,
};

Camera static_camera(int frames) {
    // 2.8 m in front of the subject track, lens axis along world +y, z-up world:
    // camera x = world x, camera y (image down) = world -z, camera z (depth) = world +y.
    Camera cam;
    cam.fx = cam.fy = 1400.0;
    cam.cx = cam.cy = 500.0;
    RigidTransform w2c;
    w2c.R << 1.0, 0.0, 0.0,
             0.0, 0.0, -1.0,
             0.0, 1.0, 0.0;
    const Vec3 position(0.0, -2.8, 1.0);
    w2c.t = -(w2c.R * position);
    cam.extrinsics.assign(frames, w2c);
    return cam;
}

MotionSequence blank_motion(const ScenarioConfig& cfg, int joints) {
    MotionSequence seq;
    seq.dt = cfg.dt;
    seq.frame_tag = FrameTag::world;
    seq.beta = Eigen::VectorXd::Zero(2);
    seq.theta.assign(cfg.frames, std::vector<AxisAngle>(joints, AxisAngle::Zero()));
    seq.root_orient.assign(cfg.frames, AxisAngle::Zero());
    seq.root_trans.assign(cfg.frames, Vec3::Zero());
    return seq;
}

// Body faces the camera (template faces +x; yaw it to face -y).
AxisAngle facing_camera(double extra_yaw = 0.0) {
    return {0.0, 0.0, -0.5 * std::numbers::pi + extra_yaw};
}

MotionSequence make_constant(const ScenarioConfig& cfg) {
    MotionSequence seq = blank_motion(cfg, 24);
    for (int t = 0; t < cfg.frames; ++t) {
        seq.root_orient[t] = facing_camera();
        seq.root_trans[t] = {0.0, 0.0, 0.95};
        // Arms hang at the sides (T-pose bones point along +-y, so the drop is
        // a rotation about x), elbows slightly bent.
        seq.theta[t][kLeftShoulder] = {-1.2, 0.0, 0.0};
        seq.theta[t][kRightShoulder] = {1.2, 0.0, 0.0};
        seq.theta[t][kLeftElbow] = {-0.3, 0.0, 0.0};
        seq.theta[t][kRightElbow] = {0.3, 0.0, 0.0};
        seq.theta[t][kLeftKnee] = {0.0, 0.1, 0.0};
        seq.theta[t][kRightKnee] = {0.0, 0.1, 0.0};
    }
    return seq;
}

// Lateral pacing walk in front of the camera: the root ambles out and back
// around the origin while the gait runs at 1.4 Hz with a crisp 4.6 Hz harmonic,
// so the sequence carries energy both below and above the smoothness knee. The
// root stays within a few decimeters of the origin on purpose: the refinement
// driver rescales root translations from velocity statistics, and a trajectory
// far from the origin would turn that single scalar into a large displacement.
MotionSequence make_sine_walk(const ScenarioConfig& cfg) {
    MotionSequence seq = blank_motion(cfg, 24);
    const double wg = kTau * 1.4;  // gait
    const double wh = kTau * 4.6;  // harmonic detail
    const double pace = kTau * 0.1; // out-and-back path frequency
    for (int t = 0; t < cfg.frames; ++t) {
        const double s = t * cfg.dt;
        seq.root_trans[t] = {0.35 * std::sin(pace * s),
                             0.008 * std::sin(kTau * 2.2 * s),
                             0.95 + 0.012 * std::sin(kTau * 4.5 * s)};
        // Walking along +x: keep the template heading and add a slight yaw sway.
        seq.root_orient[t] = {0.0, 0.0, 0.06 * std::sin(wg * s)};

        const double swing = 0.35 * std::sin(wg * s) + 0.04 * std::sin(wh * s);
        const double bend_l = 0.25 * 0.5 * (1.0 - std::cos(wg * s)) + 0.03 * std::sin(wh * s + 0.9);
        const double bend_r =
            0.25 * 0.5 * (1.0 - std::cos(wg * s + std::numbers::pi)) + 0.03 * std::sin(wh * s + 2.1);
        seq.theta[t][kLeftHip] = {0.0, swing, 0.0};
        seq.theta[t][kRightHip] = {0.0, -swing, 0.0};
        seq.theta[t][kLeftKnee] = {0.0, bend_l, 0.0};
        seq.theta[t][kRightKnee] = {0.0, bend_r, 0.0};
        seq.theta[t][kLeftAnkle] = {0.0, 0.15 * std::sin(wg * s + 0.6) + 0.02 * std::sin(wh * s), 0.0};
        seq.theta[t][kRightAnkle] = {0.0, -0.15 * std::sin(wg * s + 0.6) + 0.02 * std::sin(wh * s + 1.3), 0.0};
        // Arms hang (x component) and swing opposite to the same-side leg
        // (y component swings a hanging arm through the sagittal plane).
        seq.theta[t][kLeftShoulder] = {-1.2, -0.3 * std::sin(wg * s) - 0.03 * std::sin(wh * s + 0.4), 0.0};
        seq.theta[t][kRightShoulder] = {1.2, 0.3 * std::sin(wg * s) + 0.03 * std::sin(wh * s + 1.7), 0.0};
        seq.theta[t][kLeftElbow] = {-0.3 - 0.15 * std::sin(wg * s + 0.3) - 0.03 * std::sin(wh * s), 0.0, 0.0};
        seq.theta[t][kRightElbow] = {0.3 + 0.15 * std::sin(wg * s + 0.3) + 0.03 * std::sin(wh * s + 1.1), 0.0, 0.0};
        seq.theta[t][kSpine1] = {0.0, 0.0, 0.05 * std::sin(wg * s) + 0.015 * std::sin(wh * s + 0.8)};
        seq.theta[t][kSpine2] = {0.0, 0.0, 0.04 * std::sin(wg * s + 0.5)};
        seq.theta[t][kSpine3] = {0.0, 0.0, 0.03 * std::sin(wg * s + 1.0)};
        seq.theta[t][kNeck] = {0.0, 0.04 * std::sin(wg * s), 0.0};
    }
    return seq;
}

// Feet planted, body bobbing, arms swinging forward on the way down.
MotionSequence make_squat(const ScenarioConfig& cfg) {
    MotionSequence seq = blank_motion(cfg, 24);
    const double w = kTau * 0.8;
    for (int t = 0; t < cfg.frames; ++t) {
        const double s = t * cfg.dt;
        const double depth = 0.5 * (1.0 - std::cos(w * s)); // 0..1
        seq.root_orient[t] = facing_camera();
        seq.root_trans[t] = {0.0, 0.0, 0.95 - 0.18 * depth};
        seq.theta[t][kLeftHip] = {0.0, 0.9 * depth, 0.0};
        seq.theta[t][kRightHip] = {0.0, 0.9 * depth, 0.0};
        seq.theta[t][kLeftKnee] = {0.0, -1.4 * depth, 0.0};
        seq.theta[t][kRightKnee] = {0.0, -1.4 * depth, 0.0};
        seq.theta[t][kLeftAnkle] = {0.0, 0.5 * depth, 0.0};
        seq.theta[t][kRightAnkle] = {0.0, 0.5 * depth, 0.0};
        // Hanging arms swing forward on the way down; the fast hand motion is
        // what the contact pass gets to clean up.
        seq.theta[t][kLeftShoulder] = {-1.2, 0.9 * depth, 0.0};
        seq.theta[t][kRightShoulder] = {1.2, 0.9 * depth, 0.0};
        seq.theta[t][kLeftElbow] = {-0.2 - 0.3 * depth, 0.0, 0.0};
        seq.theta[t][kRightElbow] = {0.2 + 0.3 * depth, 0.0, 0.0};
    }
    return seq;
}

MotionSequence make_spin(const ScenarioConfig& cfg) {
    MotionSequence seq = make_constant(cfg);
    const double turns = 0.8;
    for (int t = 0; t < cfg.frames; ++t) {
        const double yaw = kTau * turns * t / cfg.frames;
        seq.root_orient[t] = facing_camera(yaw);
        seq.root_trans[t] = {0.0, 0.0, 0.95 + 0.01 * std::sin(kTau * 4.0 * t * cfg.dt)};
    }
    return seq;
}

MotionSequence add_parameter_noise(const MotionSequence& gt, const ScenarioConfig& cfg) {
    using namespace counter_rng;
    MotionSequence init = gt;
    for (int t = 0; t < init.frames(); ++t) {
        for (int j = 0; j < init.joints(); ++j) {
            for (int c = 0; c < 3; ++c) {
                init.theta[t][j][c] +=
                    cfg.init_sigma_rot * gaussian(cfg.seed, kStreamInitTheta, t, j, c);
            }
        }
        for (int c = 0; c < 3; ++c) {
            init.root_orient[t][c] +=
                cfg.init_sigma_rot * gaussian(cfg.seed, kStreamInitOrient, t, 0, c);
            init.root_trans[t][c] +=
                cfg.init_sigma_trans * gaussian(cfg.seed, kStreamInitTrans, t, 0, c);
        }
    }
    return init;
}

// Centered moving average over the parameter tracks. The window shrinks
// symmetrically near the sequence ends, which keeps the average unbiased
// there; padding schemes turn the boundary slope of the gait into a visible
// positional kick. Leaves low frequencies almost intact while stripping the
// fast content.
MotionSequence smooth_parameters(const MotionSequence& gt, int window) {
    if (window < 3 || window % 2 == 0) {
        throw std::invalid_argument("scenario: smooth window must be odd and >= 3");
    }
    const int t_count = gt.frames();
    MotionSequence out = gt;
    for (int t = 0; t < t_count; ++t) {
        const int half = std::min({window / 2, t, t_count - 1 - t});
        for (int j = 0; j < gt.joints(); ++j) out.theta[t][j].setZero();
        out.root_orient[t].setZero();
        out.root_trans[t].setZero();
        for (int k = -half; k <= half; ++k) {
            const int src = t + k;
            for (int j = 0; j < gt.joints(); ++j) out.theta[t][j] += gt.theta[src][j];
            out.root_orient[t] += gt.root_orient[src];
            out.root_trans[t] += gt.root_trans[src];
        }
        const double inv = 1.0 / (2 * half + 1);
        for (int j = 0; j < gt.joints(); ++j) out.theta[t][j] *= inv;
        out.root_orient[t] *= inv;
        out.root_trans[t] *= inv;
    }
    return out;
}

} // namespace

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"sine_walk", "squat", "spin", "constant",
                                                   "oversmoothed_walk"};
    return names;
}

ScenarioData make_scenario(const std::string& name, const ScenarioConfig& cfg) {
    if (cfg.frames < 4) throw std::invalid_argument("scenario: needs at least 4 frames");
    ScenarioData data;
    data.skeleton = make_body24_skeleton();
    data.camera = static_camera(cfg.frames);
    if (name == "sine_walk") {
        data.gt = make_sine_walk(cfg);
        data.init = add_parameter_noise(data.gt, cfg);
    } else if (name == "squat") {
        data.gt = make_squat(cfg);
        data.init = add_parameter_noise(data.gt, cfg);
    } else if (name == "spin") {
        data.gt = make_spin(cfg);
        data.init = add_parameter_noise(data.gt, cfg);
    } else if (name == "constant") {
        data.gt = make_constant(cfg);
        data.init = add_parameter_noise(data.gt, cfg);
    } else if (name == "oversmoothed_walk") {
        data.gt = make_sine_walk(cfg);
        data.init = smooth_parameters(data.gt, cfg.smooth_window);
    } else {
        throw std::invalid_argument("scenario: unknown name '" + name + "'");
    }
    return data;
}

} // namespace scenario
} // namespace motref
