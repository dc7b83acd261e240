#include "motref/energy.hpp"

#include <cmath>

#include "motref/errors.hpp"

namespace motref {
namespace {

// Gradient of the squared pixel residual w.r.t. the camera-space point.
Vec3 project_backward(const Camera& cam, const Vec3& q, const Vec2& d_pixel) {
    const double inv_z = 1.0 / q.z();
    Vec3 d_q;
    d_q.x() = cam.fx * inv_z * d_pixel.x();
    d_q.y() = cam.fy * inv_z * d_pixel.y();
    d_q.z() = -(cam.fx * q.x() * d_pixel.x() + cam.fy * q.y() * d_pixel.y()) * inv_z * inv_z;
    return d_q;
}

struct Workspace {
    std::vector<FkFrame> fk;                    // per frame
    std::vector<std::vector<Vec3>> cam_joints;  // [T][K] mapped joints, camera frame
    std::vector<std::vector<Vec2>> pixels;      // [T][K]
    Skeleton shaped;
};

Workspace run_forward(const RefinementState& state) {
    Workspace ws;
    ws.shaped = apply_shape(state.skeleton, state.current.beta);
    const int t_count = state.current.frames();
    const int k_count = state.predictions.pred_joints();
    const auto& map = state.predictions.joint_map;

    ws.fk.reserve(t_count);
    ws.cam_joints.resize(t_count);
    ws.pixels.resize(t_count);
    for (int t = 0; t < t_count; ++t) {
        ws.fk.push_back(forward_kinematics_cached(ws.shaped, state.current.theta[t],
                                                  state.current.root_orient[t],
                                                  state.current.root_trans[t]));
        ws.cam_joints[t].reserve(k_count);
        ws.pixels[t].reserve(k_count);
        for (int k = 0; k < k_count; ++k) {
            const Vec3 q = state.camera.extrinsics[t].apply(ws.fk[t].pos[map[k]]);
            if (q.z() <= 1e-6) {
                throw BehindCameraError(t, map[k], q.z());
            }
            ws.cam_joints[t].push_back(q);
            ws.pixels[t].emplace_back(state.camera.fx * q.x() / q.z() + state.camera.cx,
                                      state.camera.fy * q.y() / q.z() + state.camera.cy);
        }
    }
    return ws;
}

EnergyBreakdown run(const RefinementState& state, const EnergyWeights& w, Eigen::VectorXd* grad) {
    state.validate();
    const int t_count = state.current.frames();
    const int j_count = state.current.joints();
    const int k_count = state.predictions.pred_joints();
    const double dt = state.current.dt;
    const auto& preds = state.predictions;
    const auto& map = preds.joint_map;

    const Workspace ws = run_forward(state);

    EnergyBreakdown e;

    // dL/d(camera-space mapped joint) and dL/d(world joint), filled as terms go.
    std::vector<std::vector<Vec3>> d_cam;
    std::vector<std::vector<Vec3>> d_world;
    if (grad) {
        d_cam.assign(t_count, std::vector<Vec3>(k_count, Vec3::Zero()));
        d_world.assign(t_count, std::vector<Vec3>(j_count, Vec3::Zero()));
        grad->setZero(static_cast<Eigen::Index>(t_count) * (3 * j_count + 6));
    }

    // Velocity term: camera-frame backward differences vs the predicted field.
    {
        const double scale = 1.0 / (static_cast<double>(t_count - 1) * k_count);
        for (int t = 1; t < t_count; ++t) {
            for (int k = 0; k < k_count; ++k) {
                const double c = std::min(preds.confidence[t][k], preds.confidence[t - 1][k]);
                const Vec3 r = (ws.cam_joints[t][k] - ws.cam_joints[t - 1][k]) / dt -
                               preds.vel3d[t - 1][k];
                e.velocity += c * c * r.squaredNorm() * scale;
                if (grad && w.lambda_v != 0.0) {
                    const Vec3 d = (2.0 * w.lambda_v * scale * c * c / dt) * r;
                    d_cam[t][k] += d;
                    d_cam[t - 1][k] -= d;
                }
            }
        }
    }

    // Acceleration term: central second differences vs the predicted field.
    if (t_count >= 3) {
        const double scale = 1.0 / (static_cast<double>(t_count - 2) * k_count);
        const double dt2 = dt * dt;
        for (int t = 1; t + 1 < t_count; ++t) {
            for (int k = 0; k < k_count; ++k) {
                const double c = std::min({preds.confidence[t - 1][k], preds.confidence[t][k],
                                           preds.confidence[t + 1][k]});
                const Vec3 r = (ws.cam_joints[t + 1][k] - 2.0 * ws.cam_joints[t][k] +
                                ws.cam_joints[t - 1][k]) / dt2 -
                               preds.acc3d[t - 1][k];
                e.acceleration += c * c * r.squaredNorm() * scale;
                if (grad && w.lambda_a != 0.0) {
                    const Vec3 d = (2.0 * w.lambda_a * scale * c * c / dt2) * r;
                    d_cam[t + 1][k] += d;
                    d_cam[t][k] -= 2.0 * d;
                    d_cam[t - 1][k] += d;
                }
            }
        }
    }

    // Keypoint term: projected mapped joints vs 2D evidence, in raw pixels.
    {
        const double scale = 1.0 / (static_cast<double>(t_count) * k_count);
        for (int t = 0; t < t_count; ++t) {
            for (int k = 0; k < k_count; ++k) {
                const double c = preds.confidence[t][k];
                const Vec2 r = ws.pixels[t][k] - preds.keypoints2d[t][k];
                e.keypoint += c * c * r.squaredNorm() * scale;
                if (grad && w.lambda_k != 0.0) {
                    const Vec2 d_pix = (2.0 * w.lambda_k * scale * c * c) * r;
                    d_cam[t][k] += project_backward(state.camera, ws.cam_joints[t][k], d_pix);
                }
            }
        }
    }

    // Jerk term: raw third differences of every world joint.
    {
        const double scale = 1.0 / (static_cast<double>(t_count - 3) * j_count);
        for (int t = 0; t + 3 < t_count; ++t) {
            for (int j = 0; j < j_count; ++j) {
                const Vec3 r = ws.fk[t + 3].pos[j] - 3.0 * ws.fk[t + 2].pos[j] +
                               3.0 * ws.fk[t + 1].pos[j] - ws.fk[t].pos[j];
                e.jerk += r.squaredNorm() * scale;
                if (grad && w.lambda_jerk != 0.0) {
                    const Vec3 d = (2.0 * w.lambda_jerk * scale) * r;
                    d_world[t + 3][j] += d;
                    d_world[t + 2][j] -= 3.0 * d;
                    d_world[t + 1][j] += 3.0 * d;
                    d_world[t][j] -= d;
                }
            }
        }
    }

    // Regularizer: squared parameter distance to the anchor, mean over frames.
    {
        const double scale = 1.0 / static_cast<double>(t_count);
        const int stride = 3 * j_count + 6;
        for (int t = 0; t < t_count; ++t) {
            double frame_sum = 0.0;
            for (int j = 0; j < j_count; ++j) {
                frame_sum += (state.current.theta[t][j] - state.anchor.theta[t][j]).squaredNorm();
            }
            frame_sum += (state.current.root_orient[t] - state.anchor.root_orient[t]).squaredNorm();
            frame_sum += (state.current.root_trans[t] - state.anchor.root_trans[t]).squaredNorm();
            e.regularization += frame_sum * scale;
            if (grad && w.lambda_reg != 0.0) {
                const double g = 2.0 * w.lambda_reg * scale;
                double* gf = grad->data() + static_cast<size_t>(t) * stride;
                for (int j = 0; j < j_count; ++j) {
                    for (int c = 0; c < 3; ++c) {
                        gf[3 * j + c] += g * (state.current.theta[t][j][c] - state.anchor.theta[t][j][c]);
                    }
                }
                for (int c = 0; c < 3; ++c) {
                    gf[3 * j_count + c] +=
                        g * (state.current.root_orient[t][c] - state.anchor.root_orient[t][c]);
                    gf[3 * j_count + 3 + c] +=
                        g * (state.current.root_trans[t][c] - state.anchor.root_trans[t][c]);
                }
            }
        }
    }

    // Zero-weight terms contribute nothing, and skipping them here keeps the
    // total finite even if their targets are garbage.
    e.total = 0.0;
    if (w.lambda_v != 0.0) e.total += w.lambda_v * e.velocity;
    if (w.lambda_a != 0.0) e.total += w.lambda_a * e.acceleration;
    if (w.lambda_k != 0.0) e.total += w.lambda_k * e.keypoint;
    if (w.lambda_jerk != 0.0) e.total += w.lambda_jerk * e.jerk;
    if (w.lambda_reg != 0.0) e.total += w.lambda_reg * e.regularization;

    if (grad) {
        // Camera-space adjoints flow back to world space, then through FK.
        const int stride = 3 * j_count + 6;
        for (int t = 0; t < t_count; ++t) {
            const Mat3 rt = state.camera.extrinsics[t].R.transpose();
            for (int k = 0; k < k_count; ++k) {
                d_world[t][map[k]] += rt * d_cam[t][k];
            }
            double* gf = grad->data() + static_cast<size_t>(t) * stride;
            fk_backward(ws.shaped, state.current.theta[t], state.current.root_orient[t], ws.fk[t],
                        d_world[t], gf, gf + 3 * j_count, gf + 3 * j_count + 3);
        }
    }
    return e;
}

} // namespace

void RefinementState::validate() const {
    current.validate();
    anchor.validate();
    if (current.frame_tag != FrameTag::world || anchor.frame_tag != FrameTag::world) {
        throw std::invalid_argument("refinement state: motions must be world-frame");
    }
    if (current.frames() < 4) {
        throw TooShortError("sequence too short for jerk term (need at least 4 frames)");
    }
    if (anchor.frames() != current.frames() || anchor.joints() != current.joints()) {
        throw std::invalid_argument("refinement state: anchor shape must match current");
    }
    if (current.dt != anchor.dt) {
        throw std::invalid_argument("refinement state: anchor dt must match current");
    }
    if (current.joints() != skeleton.joint_count()) {
        throw std::invalid_argument("refinement state: motion joints must match the skeleton");
    }
    if (camera.frames() != current.frames()) {
        throw std::invalid_argument("refinement state: camera extrinsics must cover every frame");
    }
    predictions.validate();
    if (predictions.frames() != current.frames()) {
        throw std::invalid_argument("refinement state: prediction frames must match the motion");
    }
    for (int m : predictions.joint_map) {
        if (m < 0 || m >= skeleton.joint_count()) {
            throw std::invalid_argument("refinement state: prediction joint_map out of range");
        }
    }
}

EnergyBreakdown evaluate(const RefinementState& state, const EnergyWeights& w) {
    return run(state, w, nullptr);
}

Eigen::VectorXd gradient(const RefinementState& state, const EnergyWeights& w) {
    Eigen::VectorXd g;
    run(state, w, &g);
    return g;
}

EnergyBreakdown evaluate_with_gradient(const RefinementState& state, const EnergyWeights& w,
                                       Eigen::VectorXd& grad) {
    return run(state, w, &grad);
}

Eigen::VectorXd pack_parameters(const MotionSequence& seq) {
    const int j = seq.joints();
    const int stride = 3 * j + 6;
    Eigen::VectorXd x(static_cast<Eigen::Index>(seq.frames()) * stride);
    for (int t = 0; t < seq.frames(); ++t) {
        double* f = x.data() + static_cast<size_t>(t) * stride;
        for (int i = 0; i < j; ++i) {
            for (int c = 0; c < 3; ++c) f[3 * i + c] = seq.theta[t][i][c];
        }
        for (int c = 0; c < 3; ++c) {
            f[3 * j + c] = seq.root_orient[t][c];
            f[3 * j + 3 + c] = seq.root_trans[t][c];
        }
    }
    return x;
}

void unpack_parameters(const Eigen::VectorXd& x, MotionSequence& seq) {
    const int j = seq.joints();
    const int stride = 3 * j + 6;
    if (x.size() != static_cast<Eigen::Index>(seq.frames()) * stride) {
        throw std::invalid_argument("unpack_parameters: size mismatch");
    }
    for (int t = 0; t < seq.frames(); ++t) {
        const double* f = x.data() + static_cast<size_t>(t) * stride;
        for (int i = 0; i < j; ++i) {
            for (int c = 0; c < 3; ++c) seq.theta[t][i][c] = f[3 * i + c];
        }
        for (int c = 0; c < 3; ++c) {
            seq.root_orient[t][c] = f[3 * j + c];
            seq.root_trans[t][c] = f[3 * j + 3 + c];
        }
    }
}

} // namespace motref
