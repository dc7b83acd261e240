#pragma once

#include <Eigen/Core>

#include "motref/dynamics.hpp"
#include "motref/motion.hpp"

namespace motref {

// Term weights for the refinement objective. Defaults follow the published
// configuration the refinement was tuned with.
struct EnergyWeights {
    double lambda_v = 1.0;
    double lambda_a = 0.1;
    double lambda_k = 1.0;
    double lambda_jerk = 1e4;
    double lambda_reg = 1e4;
};

// Unweighted term values; total is the weighted sum.
struct EnergyBreakdown {
    double velocity = 0.0;
    double acceleration = 0.0;
    double keypoint = 0.0;
    double jerk = 0.0;
    double regularization = 0.0;
    double total = 0.0;
};

// Everything the objective needs: the motion being optimized, the anchor it is
// regularized toward, and the fixed evidence. Both motions must be world-frame
// with identical dt, frame count and shape.
struct RefinementState {
    MotionSequence current;
    MotionSequence anchor;
    Skeleton skeleton;
    Camera camera;
    DynamicsPredictions predictions;

    void validate() const; // throws std::invalid_argument / TooShortError
};

// Objective value. Velocity and acceleration residuals compare camera-frame
// stencils of the mapped joints against the predicted fields, keypoint
// residuals compare projections against the predicted 2D evidence (residuals
// scaled by confidence; stencil terms use the min confidence of the frames
// involved), the jerk term penalizes raw third differences of all world
// joints, and the regularizer is the squared parameter distance to the anchor.
// Each term is a mean over its valid frames and over joints (the regularizer
// over frames only).
EnergyBreakdown evaluate(const RefinementState& state, const EnergyWeights& w);

// Analytic gradient w.r.t. the packed parameters, laid out frame-major:
// [theta (3J) | root_orient (3) | root_trans (3)] per frame.
Eigen::VectorXd gradient(const RefinementState& state, const EnergyWeights& w);

// One shared forward/backward pass; cheaper than calling both of the above.
EnergyBreakdown evaluate_with_gradient(const RefinementState& state, const EnergyWeights& w,
                                       Eigen::VectorXd& grad);

// Packed-parameter helpers used by the optimizer and by gradient checks.
Eigen::VectorXd pack_parameters(const MotionSequence& seq);
void unpack_parameters(const Eigen::VectorXd& x, MotionSequence& seq);

} // namespace motref
