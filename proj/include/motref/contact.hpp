#pragma once

#include <string>
#include <vector>

#include "motref/dynamics.hpp"
#include "motref/motion.hpp"

namespace motref {

struct ContactConfig {
    double xi_v = 0.1;              // m/s; speed at which a joint counts as fully moving
    std::vector<int> end_effectors; // empty = take them from the skeleton
    int ik_iterations = 20;
    double ik_damping = 1e-2;
    double ik_step_tolerance = 1e-4; // meters

    void validate() const;
};

// max(0, 1 - speed / xi_v). Throws std::invalid_argument for negative speed.
double stationary_probability(double speed, double xi_v);

// Per-frame end-effector targets: a blend of the joint's own consecutive
// positions, target[t] = p_s * pos[t] + (1 - p_s) * pos[t+1], where p_s comes
// from the predicted camera-frame speed of the joint (the nearest mapped
// ancestor's prediction if the effector itself is unmapped). The last frame
// has no successor and uses p_s = 1.
struct ContactTargets {
    std::vector<int> effectors;                 // skeleton joint indices, size E
    std::vector<std::vector<Vec3>> target;      // [T][E]
    std::vector<std::vector<double>> p_s;       // [T][E]
};

ContactTargets contact_targets(const JointPositions& world, const DynamicsPredictions& preds,
                               const Skeleton& skel, const ContactConfig& cfg);

struct IkFrameReport {
    int frame = 0;
    int effector = 0; // skeleton joint index
    double p_s = 1.0;
    double pre_error = 0.0;  // meters
    double post_error = 0.0; // meters
};

struct IkResult {
    MotionSequence seq;
    std::vector<IkFrameReport> report;
};

// Damped-least-squares IK toward the contact targets. Only the joint rotations
// on the chains from the root to each effector move; root orientation and
// translation are frozen, so bone lengths are preserved exactly. Steps that
// would worsen any effector on a frame are backed off, so per-effector error
// never increases, and frames already within tolerance are left untouched.
IkResult ik_refine(const MotionSequence& seq_world, const Skeleton& skel,
                   const ContactTargets& targets, const ContactConfig& cfg);

// Writes "frame,effector,p_s,pre_error,post_error" rows.
void save_contact_report_csv(const std::vector<IkFrameReport>& report, const std::string& path);

} // namespace motref
