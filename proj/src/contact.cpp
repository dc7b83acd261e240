#include "motref/contact.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "motref/errors.hpp"

namespace motref {
namespace {

// Index into preds.vel3d carrying the motion of `joint` at `frame`, walking up
// the tree when the joint itself has no prediction.
int mapped_prediction_index(const Skeleton& skel, const DynamicsPredictions& preds, int joint) {
    for (int j = joint; j >= 0; j = skel.parent[j]) {
        const auto it = std::find(preds.joint_map.begin(), preds.joint_map.end(), j);
        if (it != preds.joint_map.end()) {
            return static_cast<int>(it - preds.joint_map.begin());
        }
    }
    throw std::invalid_argument("contact: no prediction covers joint " + std::to_string(joint) +
                                " or any of its ancestors");
}

std::vector<int> chain_to_root(const Skeleton& skel, int effector) {
    std::vector<int> chain;
    for (int j = skel.parent[effector]; j >= 0; j = skel.parent[j]) {
        chain.push_back(j);
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

} // namespace

void ContactConfig::validate() const {
    if (!(xi_v > 0.0)) throw std::invalid_argument("contact: xi_v must be positive");
    if (ik_iterations < 1) throw std::invalid_argument("contact: ik_iterations must be >= 1");
    if (!(ik_damping > 0.0)) throw std::invalid_argument("contact: ik_damping must be positive");
    if (!(ik_step_tolerance > 0.0)) {
        throw std::invalid_argument("contact: ik_step_tolerance must be positive");
    }
}

double stationary_probability(double speed, double xi_v) {
    if (speed < 0.0) throw std::invalid_argument("stationary_probability: negative speed");
    if (!(xi_v > 0.0)) throw std::invalid_argument("stationary_probability: xi_v must be positive");
    return std::max(0.0, 1.0 - speed / xi_v);
}

ContactTargets contact_targets(const JointPositions& world, const DynamicsPredictions& preds,
                               const Skeleton& skel, const ContactConfig& cfg) {
    cfg.validate();
    if (world.frames() != preds.frames()) {
        throw std::invalid_argument("contact_targets: prediction frames must match positions");
    }
    if (world.joints() != skel.joint_count()) {
        throw std::invalid_argument("contact_targets: positions must cover every skeleton joint");
    }
    ContactTargets out;
    out.effectors = cfg.end_effectors.empty() ? skel.end_effectors : cfg.end_effectors;
    if (out.effectors.empty()) {
        throw std::invalid_argument("contact_targets: no end effectors configured");
    }
    for (int e : out.effectors) {
        if (e < 0 || e >= skel.joint_count()) {
            throw std::invalid_argument("contact_targets: effector out of range");
        }
    }

    const int t_count = world.frames();
    const int e_count = static_cast<int>(out.effectors.size());
    out.target.assign(t_count, std::vector<Vec3>(e_count));
    out.p_s.assign(t_count, std::vector<double>(e_count, 1.0));

    for (int e = 0; e < e_count; ++e) {
        const int k = mapped_prediction_index(skel, preds, out.effectors[e]);
        for (int t = 0; t < t_count; ++t) {
            if (t == t_count - 1) {
                out.p_s[t][e] = 1.0;
                out.target[t][e] = world.pos[t][out.effectors[e]];
                continue;
            }
            // vel3d[i] covers the step (i, i+1); the first frame borrows the
            // first available step.
            const int vi = std::max(t - 1, 0);
            const double speed = preds.vel3d[vi][k].norm();
            const double p = stationary_probability(speed, cfg.xi_v);
            out.p_s[t][e] = p;
            out.target[t][e] =
                p * world.pos[t][out.effectors[e]] + (1.0 - p) * world.pos[t + 1][out.effectors[e]];
        }
    }
    return out;
}

IkResult ik_refine(const MotionSequence& seq_world, const Skeleton& skel,
                   const ContactTargets& targets, const ContactConfig& cfg) {
    cfg.validate();
    seq_world.validate();
    if (seq_world.frame_tag != FrameTag::world) {
        throw std::invalid_argument("ik_refine: motion must be world-frame");
    }
    if (static_cast<int>(targets.target.size()) != seq_world.frames()) {
        throw std::invalid_argument("ik_refine: target frames must match the motion");
    }
    const Skeleton shaped = apply_shape(skel, seq_world.beta);
    const int e_count = static_cast<int>(targets.effectors.size());

    // Union of all chain joints, in tree order; effectors themselves excluded
    // because their own rotation cannot move them.
    std::vector<int> chain;
    for (int e = 0; e < e_count; ++e) {
        for (int j : chain_to_root(shaped, targets.effectors[e])) {
            if (std::find(chain.begin(), chain.end(), j) == chain.end()) chain.push_back(j);
        }
    }
    std::sort(chain.begin(), chain.end());
    const int dof = 3 * static_cast<int>(chain.size());

    // ancestors[e] marks which chain entries move effector e.
    std::vector<std::vector<bool>> moves(e_count, std::vector<bool>(chain.size(), false));
    for (int e = 0; e < e_count; ++e) {
        const auto anc = chain_to_root(shaped, targets.effectors[e]);
        for (size_t c = 0; c < chain.size(); ++c) {
            moves[e][c] = std::find(anc.begin(), anc.end(), chain[c]) != anc.end();
        }
    }

    IkResult result;
    result.seq = seq_world;
    result.report.reserve(static_cast<size_t>(seq_world.frames()) * e_count);

    Eigen::MatrixXd jac(3 * e_count, dof);
    Eigen::VectorXd residual(3 * e_count);

    for (int t = 0; t < seq_world.frames(); ++t) {
        std::vector<AxisAngle> theta = result.seq.theta[t];
        const AxisAngle orient = result.seq.root_orient[t];
        const Vec3 trans = result.seq.root_trans[t];

        auto effector_errors = [&](const std::vector<AxisAngle>& th, std::vector<double>& err,
                                   FkFrame* frame_out) {
            const FkFrame f = forward_kinematics_cached(shaped, th, orient, trans);
            err.resize(e_count);
            for (int e = 0; e < e_count; ++e) {
                err[e] = (f.pos[targets.effectors[e]] - targets.target[t][e]).norm();
            }
            if (frame_out) *frame_out = f;
        };

        std::vector<double> pre_err, err;
        FkFrame frame;
        effector_errors(theta, pre_err, &frame);
        err = pre_err;

        const bool within_tolerance =
            *std::max_element(pre_err.begin(), pre_err.end()) < cfg.ik_step_tolerance;

        if (!within_tolerance) {
            for (int iter = 0; iter < cfg.ik_iterations; ++iter) {
                jac.setZero();
                Mat3 rot;
                std::array<Mat3, 3> d_rot;
                for (size_t c = 0; c < chain.size(); ++c) {
                    const int k = chain[c];
                    axis_angle_to_matrix_jacobian(theta[k], rot, d_rot);
                    const Mat3 pre =
                        (k == 0) ? frame.root_rot : frame.accum_rot[shaped.parent[k]];
                    for (int d = 0; d < 3; ++d) {
                        const Mat3 m = pre * d_rot[d] * frame.local_rot[k].transpose() * pre.transpose();
                        for (int e = 0; e < e_count; ++e) {
                            if (!moves[e][c]) continue;
                            jac.block<3, 1>(3 * e, 3 * static_cast<int>(c) + d) =
                                m * (frame.pos[targets.effectors[e]] - frame.pos[k]);
                        }
                    }
                }
                for (int e = 0; e < e_count; ++e) {
                    residual.segment<3>(3 * e) =
                        targets.target[t][e] - frame.pos[targets.effectors[e]];
                }
                // Damped least squares: (J^T J + damping^2 I) dq = J^T r.
                Eigen::MatrixXd lhs = jac.transpose() * jac;
                lhs.diagonal().array() += cfg.ik_damping * cfg.ik_damping;
                Eigen::VectorXd dq = lhs.ldlt().solve(jac.transpose() * residual);

                // Back off until no effector gets worse; give up on this frame
                // if even a tiny step hurts.
                bool accepted = false;
                std::vector<AxisAngle> cand;
                std::vector<double> cand_err;
                for (int halving = 0; halving < 8; ++halving) {
                    cand = theta;
                    for (size_t c = 0; c < chain.size(); ++c) {
                        for (int d = 0; d < 3; ++d) {
                            cand[chain[c]][d] += dq[3 * static_cast<int>(c) + d];
                        }
                    }
                    effector_errors(cand, cand_err, nullptr);
                    bool ok = true;
                    for (int e = 0; e < e_count; ++e) {
                        if (cand_err[e] > err[e] + 1e-12) {
                            ok = false;
                            break;
                        }
                    }
                    if (ok) {
                        accepted = true;
                        break;
                    }
                    dq *= 0.5;
                }
                if (!accepted) break;

                double improvement = 0.0;
                for (int e = 0; e < e_count; ++e) {
                    improvement = std::max(improvement, err[e] - cand_err[e]);
                }
                theta = cand;
                err = cand_err;
                effector_errors(theta, err, &frame);
                if (improvement < cfg.ik_step_tolerance) break;
            }
            result.seq.theta[t] = theta;
        }

        for (int e = 0; e < e_count; ++e) {
            result.report.push_back(
                {t, targets.effectors[e], targets.p_s[t][e], pre_err[e], err[e]});
        }
    }
    return result;
}

void save_contact_report_csv(const std::vector<IkFrameReport>& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("contact report: cannot write '" + path + "'");
    out << "frame,effector,p_s,pre_error,post_error\n";
    out.precision(17);
    for (const auto& row : report) {
        out << row.frame << ',' << row.effector << ',' << row.p_s << ',' << row.pre_error << ','
            << row.post_error << '\n';
    }
}

} // namespace motref
