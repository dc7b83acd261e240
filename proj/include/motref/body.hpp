#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "motref/geom.hpp"

namespace motref {

// Which coordinate frame a set of joint positions (or a motion) lives in.
enum class FrameTag { world, camera };

// Joints-only kinematic tree. Offsets are bone vectors from the parent joint
// in the rest pose; shape_basis[j] columns are per-coefficient offset deltas.
struct Skeleton {
    std::vector<int> parent;       // parent[0] == -1, parent[i] < i
    std::vector<Vec3> rest_offsets;
    std::vector<Eigen::Matrix3Xd> shape_basis; // empty or one 3xB block per joint
    Vec3 t_root = Vec3::Zero();    // root offset used when lifting camera-frame trajectories
    std::vector<std::string> names;
    std::vector<int> end_effectors;
    std::vector<int> joint_map;    // prediction joint k -> skeleton joint index

    int joint_count() const { return static_cast<int>(parent.size()); }
    int shape_dim() const { return shape_basis.empty() ? 0 : static_cast<int>(shape_basis[0].cols()); }
    void validate() const; // throws std::invalid_argument
};

// Joint positions for a whole sequence, pos[t][j].
struct JointPositions {
    std::vector<std::vector<Vec3>> pos;
    FrameTag frame = FrameTag::world;

    int frames() const { return static_cast<int>(pos.size()); }
    int joints() const { return pos.empty() ? 0 : static_cast<int>(pos[0].size()); }
};

// Returns a copy whose rest offsets are displaced by shape_basis * beta.
// beta may be shorter than the basis (missing coefficients are zero) but not longer.
Skeleton apply_shape(const Skeleton& skel, const Eigen::VectorXd& beta);

// Plain forward kinematics: joint 0 sits at root_trans, every child at
// parent + (accumulated rotation) * offset, where the accumulated rotation is
// the product of the root orientation and all ancestor joint rotations.
std::vector<Vec3> forward_kinematics(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                                     const AxisAngle& root_orient, const Vec3& root_trans);

// Forward pass with everything the reverse pass needs retained.
struct FkFrame {
    std::vector<Vec3> pos;       // world joint positions
    std::vector<Mat3> local_rot; // R(theta[i])
    std::vector<Mat3> accum_rot; // rotation applied to joint i's children
    Mat3 root_rot;               // R(root_orient)
};

FkFrame forward_kinematics_cached(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                                  const AxisAngle& root_orient, const Vec3& root_trans);

// Reverse-mode pass through forward_kinematics. d_pos[j] holds dL/d(position j)
// on entry and is consumed. Gradients are accumulated (+=) into grad_theta
// (3 * joint_count), grad_orient (3) and grad_trans (3).
void fk_backward(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                 const AxisAngle& root_orient, const FkFrame& fwd, std::vector<Vec3>& d_pos,
                 double* grad_theta, double* grad_orient, double* grad_trans);

// Dense Jacobian of all joint positions w.r.t. (theta, root_orient, root_trans).
// Rows: 3 * joint_count positions; columns: 3J joint rotations, then root
// orientation, then root translation.
Eigen::MatrixXd fk_jacobian(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                            const AxisAngle& root_orient, const Vec3& root_trans);

Skeleton load_skeleton(const std::string& path);
void save_skeleton(const Skeleton& skel, const std::string& path);

// Built-in skeletons. The 24-joint body is the default for scenarios and the
// CLI; the 6-joint toy and parametric chain keep tests small.
Skeleton make_body24_skeleton();
Skeleton make_toy6_skeleton();
Skeleton make_chain_skeleton(int joints, double bone_length = 0.25);

} // namespace motref
