#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motref/body.hpp"
#include "motref/geom.hpp"
#include "motref/motion.hpp"

namespace motref {

// Per-joint observation targets driving the refinement: 2D keypoints with
// confidences plus 3D velocity and acceleration fields in the camera frame.
// K prediction joints map into the skeleton through joint_map.
struct DynamicsPredictions {
    std::vector<int> joint_map;                         // size K
    std::vector<std::vector<Vec2>> keypoints2d;         // [T][K]
    std::vector<std::vector<Vec3>> vel3d;               // [T-1][K]
    std::vector<std::vector<Vec3>> acc3d;               // [T-2][K]
    std::vector<std::vector<double>> confidence;        // [T][K], each in [0,1]

    int frames() const { return static_cast<int>(keypoints2d.size()); }
    int pred_joints() const { return static_cast<int>(joint_map.size()); }
    void validate() const; // throws std::invalid_argument
};

struct NoiseConfig {
    double sigma_kp = 0.0;   // pixels
    double sigma_vel = 0.0;  // m/s
    double sigma_acc = 0.0;  // m/s^2
    double dropout_prob = 0.0;
    std::uint64_t seed = 1;
};

// Backward difference (pos[t] - pos[t-1]) / dt; result[i] pairs frames (i, i+1).
std::vector<std::vector<Vec3>> velocity_field(const JointPositions& pos, double dt);

// Central second difference (pos[t+1] - 2 pos[t] + pos[t-1]) / dt^2; result[i]
// is centered on frame i+1.
std::vector<std::vector<Vec3>> acceleration_field(const JointPositions& pos, double dt);

// Raw third difference pos[t+3] - 3 pos[t+2] + 3 pos[t+1] - pos[t], deliberately
// not divided by dt^3 so the smoothness energy stays well scaled.
std::vector<std::vector<Vec3>> jerk_residuals(const JointPositions& pos);

// Deterministic counter-based Gaussian noise: the value depends only on
// (seed, stream, frame, joint, component), never on evaluation order.
namespace counter_rng {
std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t frame,
                  std::uint64_t joint, std::uint64_t component);
double uniform(std::uint64_t key);  // (0, 1]
double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t frame,
                std::uint64_t joint, std::uint64_t component);

inline constexpr std::uint64_t kStreamKeypoints = 1;
inline constexpr std::uint64_t kStreamVelocity = 2;
inline constexpr std::uint64_t kStreamAcceleration = 3;
inline constexpr std::uint64_t kStreamDropout = 4;
inline constexpr std::uint64_t kStreamInitTheta = 5;
inline constexpr std::uint64_t kStreamInitOrient = 6;
inline constexpr std::uint64_t kStreamInitTrans = 7;
} // namespace counter_rng

// Builds predictions from a ground-truth world motion: exact projections,
// camera-frame velocity/acceleration stencils on the mapped joints, Gaussian
// noise per NoiseConfig, confidence 1 except for dropped-out frame/joint pairs.
DynamicsPredictions synth_oracle(const MotionSequence& gt_world, const Skeleton& skel,
                                 const Camera& cam, const NoiseConfig& noise);

DynamicsPredictions load_predictions(const std::string& path);
void save_predictions(const DynamicsPredictions& preds, const std::string& path);

} // namespace motref
