#include "motref/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "motref/errors.hpp"

namespace motref {

void OptimConfig::validate() const {
    if (!(lr0 > 0.0) || !std::isfinite(lr0)) {
        throw std::invalid_argument("optim: lr0 must be positive");
    }
    if (epochs < 1) throw std::invalid_argument("optim: epochs must be >= 1");
    if (warmup_epochs < 1 || warmup_epochs > decay_epoch || decay_epoch > epochs) {
        throw std::invalid_argument("optim: need 1 <= warmup_epochs <= decay_epoch <= epochs");
    }
    if (!(decay_factor > 0.0)) throw std::invalid_argument("optim: decay_factor must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw std::invalid_argument("optim: Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw std::invalid_argument("optim: adam_eps must be positive");
}

double learning_rate(int epoch, const OptimConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) {
        throw std::invalid_argument("learning_rate: epoch " + std::to_string(epoch) +
                                    " outside [0, " + std::to_string(cfg.epochs) + ")");
    }
    if (epoch < cfg.warmup_epochs) {
        return cfg.lr0 * static_cast<double>(epoch + 1) / cfg.warmup_epochs;
    }
    if (epoch < cfg.decay_epoch) {
        return cfg.lr0;
    }
    return cfg.lr0 * cfg.decay_factor;
}

double calibrate_scale(const MotionSequence& init_world, const Skeleton& skel, const Camera& cam,
                       const DynamicsPredictions& preds) {
    if (preds.frames() != init_world.frames()) {
        throw std::invalid_argument("calibrate_scale: prediction frames must match the motion");
    }
    const JointPositions world = joints_world(init_world, skel);

    JointPositions mapped;
    mapped.frame = FrameTag::world;
    mapped.pos.resize(world.frames());
    for (int t = 0; t < world.frames(); ++t) {
        for (int k : preds.joint_map) mapped.pos[t].push_back(world.pos[t][k]);
    }
    const auto induced = velocity_field(joints_to_camera(mapped, cam), init_world.dt);

    double num = 0.0, den = 0.0;
    long n = 0;
    for (size_t t = 0; t < induced.size(); ++t) {
        for (size_t k = 0; k < induced[t].size(); ++k) {
            num += preds.vel3d[t][k].norm();
            den += induced[t][k].norm();
            ++n;
        }
    }
    if (n == 0) return 1.0;
    num /= n;
    den /= n;
    if (den < 1e-8) return 1.0;
    return std::clamp(num / den, 0.2, 5.0);
}

RefinementResult refine(const MotionSequence& init_world, const Skeleton& skel, const Camera& cam,
                        const DynamicsPredictions& preds, const OptimConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();

    RefinementState state;
    state.current = init_world;
    state.skeleton = skel;
    state.camera = cam;
    state.predictions = preds;

    const double scale = calibrate_scale(init_world, skel, cam, preds);
    for (auto& t : state.current.root_trans) t *= scale;
    state.anchor = state.current;
    state.validate();

    Eigen::VectorXd x = pack_parameters(state.current);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd g(x.size());

    RefinementResult result;
    result.scale = scale;
    if (cfg.record_trace) result.trace.reserve(cfg.epochs);

    double beta1_pow = 1.0;
    double beta2_pow = 1.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const EnergyBreakdown e = evaluate_with_gradient(state, cfg.weights, g);
        if (!std::isfinite(e.total)) {
            throw DivergedError(epoch);
        }
        const double lr = learning_rate(epoch, cfg);
        if (cfg.record_trace) {
            result.trace.push_back({epoch, e, lr});
        }
        beta1_pow *= cfg.adam_beta1;
        beta2_pow *= cfg.adam_beta2;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            const double m_hat = m[i] / (1.0 - beta1_pow);
            const double v_hat = v[i] / (1.0 - beta2_pow);
            x[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
        unpack_parameters(x, state.current);
    }

    evaluate_with_gradient(state, cfg.weights, g);
    result.final_gradient_norm = g.norm();
    result.refined = state.current;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("trace: cannot write '" + path + "'");
    out << "epoch,E_V,E_A,E_K,E_jerk,E_reg,total,lr\n";
    out.precision(17);
    for (const auto& row : trace) {
        out << row.epoch << ',' << row.energy.velocity << ',' << row.energy.acceleration << ','
            << row.energy.keypoint << ',' << row.energy.jerk << ',' << row.energy.regularization
            << ',' << row.energy.total << ',' << row.lr << '\n';
    }
}

} // namespace motref
