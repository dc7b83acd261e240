#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "motref/body.hpp"
#include "motref/geom.hpp"

namespace motref {

// A motion: per-frame joint rotations theta[t][j], root orientation and root
// translation, plus shared shape coefficients. frame_tag says whether the root
// trajectory lives in world or camera coordinates.
struct MotionSequence {
    double dt = 1.0 / 30.0;
    FrameTag frame_tag = FrameTag::world;
    Eigen::VectorXd beta;
    std::vector<std::vector<AxisAngle>> theta;
    std::vector<AxisAngle> root_orient;
    std::vector<Vec3> root_trans;

    int frames() const { return static_cast<int>(theta.size()); }
    int joints() const { return theta.empty() ? 0 : static_cast<int>(theta[0].size()); }
    void validate() const; // throws std::invalid_argument / TooShortError
};

// Lifts a camera-frame trajectory to world coordinates using the per-frame
// camera-to-world pose (the inverse of the stored extrinsics):
//   orient_w = R_c2w * orient_c
//   trans_w  = t_c2w + R_c2w * (trans_c + t_root) - t_root
// Joint rotations, beta and dt pass through untouched.
MotionSequence camera_to_world(const MotionSequence& seq, const Camera& cam, const Skeleton& skel);

// Exact inverse of camera_to_world.
MotionSequence world_to_camera(const MotionSequence& seq, const Camera& cam, const Skeleton& skel);

// Forward kinematics over the whole sequence (requires a world-frame motion).
// Shape coefficients are applied to the skeleton first.
JointPositions joints_world(const MotionSequence& seq, const Skeleton& skel);

// Maps world-frame joints through the stored per-frame extrinsics.
JointPositions joints_to_camera(const JointPositions& world, const Camera& cam);

MotionSequence load_motion(const std::string& path);
void save_motion(const MotionSequence& seq, const std::string& path);

} // namespace motref
