#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motref/dynamics.hpp"
#include "motref/motion.hpp"

namespace motref {
namespace scenario {

// A self-contained synthetic test case: ground-truth world motion, a corrupted
// initialization (parameter noise, or low-pass filtering for the oversmoothed
// scenario), and a static camera that keeps the subject in front of the lens.
struct ScenarioData {
    MotionSequence gt;
    MotionSequence init;
    Camera camera;
    Skeleton skeleton;
};

struct ScenarioConfig {
    int frames = 300;
    double dt = 1.0 / 30.0;
    std::uint64_t seed = 1;
    double init_sigma_rot = 0.05;   // rad, per axis-angle component
    double init_sigma_trans = 0.02; // m, per root translation component
    int smooth_window = 3;          // oversmoothed scenario only; odd
};

const std::vector<std::string>& scenario_names();

// Throws std::invalid_argument for unknown names.
ScenarioData make_scenario(const std::string& name, const ScenarioConfig& cfg = {});

} // namespace scenario
} // namespace motref
