#pragma once

#include <string>
#include <vector>

#include "motref/energy.hpp"

namespace motref {

// Adam configuration plus the learning-rate schedule: linear warmup to lr0
// over warmup_epochs, flat until decay_epoch, then lr0 * decay_factor.
struct OptimConfig {
    double lr0 = 1e-3;
    int epochs = 1500;
    int warmup_epochs = 10;
    int decay_epoch = 1000;
    double decay_factor = 0.1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    EnergyWeights weights;
    bool record_trace = false;

    void validate() const; // throws std::invalid_argument
};

double learning_rate(int epoch, const OptimConfig& cfg);

struct TraceRow {
    int epoch = 0;
    EnergyBreakdown energy;
    double lr = 0.0;
};

struct RefinementResult {
    MotionSequence refined;
    std::vector<TraceRow> trace;
    double final_gradient_norm = 0.0;
    double wall_seconds = 0.0;
    double scale = 1.0;
};

// Single scalar fixing the depth/scale mismatch between the initialization and
// the predicted velocity magnitudes:
//   s = mean ||predicted velocity|| / mean ||velocity induced by init||
// clamped to [0.2, 5]; 1 when the induced motion is essentially static.
// Callers apply s to the root translations before optimizing.
double calibrate_scale(const MotionSequence& init_world, const Skeleton& skel, const Camera& cam,
                       const DynamicsPredictions& preds);

// Full refinement: scale calibration, then cfg.epochs Adam steps on the packed
// parameters, anchored at the (scaled) initialization. Deterministic: identical
// inputs give bit-identical results. Throws DivergedError if the energy goes
// non-finite.
RefinementResult refine(const MotionSequence& init_world, const Skeleton& skel, const Camera& cam,
                        const DynamicsPredictions& preds, const OptimConfig& cfg);

// Writes "epoch,E_V,E_A,E_K,E_jerk,E_reg,total,lr" rows.
void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

} // namespace motref
