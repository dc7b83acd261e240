#include "motref/body.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "motref/errors.hpp"

namespace motref {
namespace {

using nlohmann::json;

// True when `anc` appears on the parent chain of `j` (strictly above it).
bool is_ancestor(const Skeleton& skel, int anc, int j) {
    for (int p = skel.parent[j]; p >= 0; p = skel.parent[p]) {
        if (p == anc) return true;
    }
    return false;
}

} // namespace

void Skeleton::validate() const {
    const int j = joint_count();
    if (j < 1) throw std::invalid_argument("skeleton: needs at least one joint");
    if (parent[0] != -1) throw std::invalid_argument("skeleton: parent[0] must be -1");
    for (int i = 1; i < j; ++i) {
        if (parent[i] < 0 || parent[i] >= i) {
            throw std::invalid_argument("skeleton: parent[" + std::to_string(i) +
                                        "] must point to an earlier joint");
        }
    }
    if (static_cast<int>(rest_offsets.size()) != j) {
        throw std::invalid_argument("skeleton: rest_offsets size must equal joint count");
    }
    for (const auto& o : rest_offsets) {
        if (!o.allFinite()) throw std::invalid_argument("skeleton: non-finite rest offset");
    }
    if (!shape_basis.empty()) {
        if (static_cast<int>(shape_basis.size()) != j) {
            throw std::invalid_argument("skeleton: shape_basis must have one block per joint");
        }
        const auto cols = shape_basis[0].cols();
        for (const auto& b : shape_basis) {
            if (b.cols() != cols) {
                throw std::invalid_argument("skeleton: shape_basis blocks must share width");
            }
        }
    }
    if (!names.empty() && static_cast<int>(names.size()) != j) {
        throw std::invalid_argument("skeleton: names size must equal joint count");
    }
    for (int e : end_effectors) {
        if (e < 0 || e >= j) throw std::invalid_argument("skeleton: end effector out of range");
    }
    for (int m : joint_map) {
        if (m < 0 || m >= j) throw std::invalid_argument("skeleton: joint_map entry out of range");
    }
}

Skeleton apply_shape(const Skeleton& skel, const Eigen::VectorXd& beta) {
    const int b = skel.shape_dim();
    if (beta.size() > b) {
        throw std::invalid_argument("apply_shape: beta has " + std::to_string(beta.size()) +
                                    " coefficients but the basis only has " + std::to_string(b));
    }
    Skeleton out = skel;
    for (int i = 0; i < skel.joint_count(); ++i) {
        for (int k = 0; k < beta.size(); ++k) {
            out.rest_offsets[i] += skel.shape_basis[i].col(k) * beta[k];
        }
    }
    return out;
}

std::vector<Vec3> forward_kinematics(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                                     const AxisAngle& root_orient, const Vec3& root_trans) {
    return forward_kinematics_cached(skel, theta, root_orient, root_trans).pos;
}

FkFrame forward_kinematics_cached(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                                  const AxisAngle& root_orient, const Vec3& root_trans) {
    const int j = skel.joint_count();
    if (static_cast<int>(theta.size()) != j) {
        throw std::invalid_argument("forward_kinematics: theta size must equal joint count");
    }
    FkFrame f;
    f.pos.resize(j);
    f.local_rot.resize(j);
    f.accum_rot.resize(j);
    f.root_rot = axis_angle_to_matrix(root_orient);
    for (int i = 0; i < j; ++i) {
        f.local_rot[i] = axis_angle_to_matrix(theta[i]);
        if (i == 0) {
            f.accum_rot[0] = f.root_rot * f.local_rot[0];
            f.pos[0] = root_trans;
        } else {
            const int p = skel.parent[i];
            f.pos[i] = f.pos[p] + f.accum_rot[p] * skel.rest_offsets[i];
            f.accum_rot[i] = f.accum_rot[p] * f.local_rot[i];
        }
    }
    return f;
}

void fk_backward(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                 const AxisAngle& root_orient, const FkFrame& fwd, std::vector<Vec3>& d_pos,
                 double* grad_theta, double* grad_orient, double* grad_trans) {
    const int j = skel.joint_count();
    std::vector<Mat3> d_accum(j, Mat3::Zero());
    Mat3 rot;
    std::array<Mat3, 3> d_rot;
    for (int i = j - 1; i >= 1; --i) {
        const int p = skel.parent[i];
        // p_i = p_parent + A_parent * offset_i ; A_i = A_parent * R_i
        d_accum[p].noalias() += d_pos[i] * skel.rest_offsets[i].transpose();
        d_accum[p].noalias() += d_accum[i] * fwd.local_rot[i].transpose();
        d_pos[p] += d_pos[i];
        const Mat3 d_local = fwd.accum_rot[p].transpose() * d_accum[i];
        axis_angle_to_matrix_jacobian(theta[i], rot, d_rot);
        for (int c = 0; c < 3; ++c) {
            grad_theta[3 * i + c] += (d_local.array() * d_rot[c].array()).sum();
        }
    }
    // Root: A_0 = R(root_orient) * R(theta_0), p_0 = root_trans.
    const Mat3 d_local0 = fwd.root_rot.transpose() * d_accum[0];
    axis_angle_to_matrix_jacobian(theta[0], rot, d_rot);
    for (int c = 0; c < 3; ++c) {
        grad_theta[c] += (d_local0.array() * d_rot[c].array()).sum();
    }
    const Mat3 d_root = d_accum[0] * fwd.local_rot[0].transpose();
    axis_angle_to_matrix_jacobian(root_orient, rot, d_rot);
    for (int c = 0; c < 3; ++c) {
        grad_orient[c] += (d_root.array() * d_rot[c].array()).sum();
    }
    for (int c = 0; c < 3; ++c) grad_trans[c] += d_pos[0][c];
}

Eigen::MatrixXd fk_jacobian(const Skeleton& skel, const std::vector<AxisAngle>& theta,
                            const AxisAngle& root_orient, const Vec3& root_trans) {
    const int j = skel.joint_count();
    const FkFrame f = forward_kinematics_cached(skel, theta, root_orient, root_trans);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * j, 3 * j + 6);

    Mat3 rot;
    std::array<Mat3, 3> d_rot;
    for (int k = 0; k < j; ++k) {
        axis_angle_to_matrix_jacobian(theta[k], rot, d_rot);
        const Mat3 pre = (k == 0) ? f.root_rot : f.accum_rot[skel.parent[k]];
        for (int c = 0; c < 3; ++c) {
            // d p_i / d theta_k[c] = pre * dR * R_k^T * pre^T * (p_i - p_k) for descendants i.
            const Mat3 m = pre * d_rot[c] * f.local_rot[k].transpose() * pre.transpose();
            for (int i = k + 1; i < j; ++i) {
                if (!is_ancestor(skel, k, i)) continue;
                jac.block<3, 1>(3 * i, 3 * k + c) = m * (f.pos[i] - f.pos[k]);
            }
        }
    }
    axis_angle_to_matrix_jacobian(root_orient, rot, d_rot);
    for (int c = 0; c < 3; ++c) {
        const Mat3 m = d_rot[c] * f.root_rot.transpose();
        for (int i = 1; i < j; ++i) {
            jac.block<3, 1>(3 * i, 3 * j + c) = m * (f.pos[i] - f.pos[0]);
        }
    }
    for (int i = 0; i < j; ++i) {
        jac.block<3, 3>(3 * i, 3 * j + 3).setIdentity();
    }
    return jac;
}

Skeleton load_skeleton(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("skeleton: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("skeleton: invalid JSON in '" + path + "': " + e.what());
    }

    Skeleton s;
    if (!j.contains("parents") || !j["parents"].is_array()) {
        throw ParseError("skeleton: missing or non-array field 'parents'");
    }
    s.parent = j["parents"].get<std::vector<int>>();
    if (!j.contains("rest_offsets") || !j["rest_offsets"].is_array()) {
        throw ParseError("skeleton: missing or non-array field 'rest_offsets'");
    }
    for (const auto& row : j["rest_offsets"]) {
        if (!row.is_array() || row.size() != 3) {
            throw ParseError("skeleton: field 'rest_offsets' rows must have 3 numbers");
        }
        s.rest_offsets.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
    }
    if (j.contains("shape_basis")) {
        if (!j["shape_basis"].is_array() || j["shape_basis"].size() != s.parent.size()) {
            throw ParseError("skeleton: field 'shape_basis' must have one entry per joint");
        }
        for (const auto& block : j["shape_basis"]) {
            if (!block.is_array() || block.size() != 3) {
                throw ParseError("skeleton: field 'shape_basis' entries must be 3 x B");
            }
            const size_t b = block[0].size();
            Eigen::Matrix3Xd m(3, b);
            for (int r = 0; r < 3; ++r) {
                if (block[r].size() != b) {
                    throw ParseError("skeleton: field 'shape_basis' rows must share width");
                }
                for (size_t c = 0; c < b; ++c) m(r, c) = block[r][c].get<double>();
            }
            s.shape_basis.push_back(m);
        }
    }
    if (!j.contains("t_root") || !j["t_root"].is_array() || j["t_root"].size() != 3) {
        throw ParseError("skeleton: missing or malformed field 't_root'");
    }
    s.t_root = Vec3(j["t_root"][0].get<double>(), j["t_root"][1].get<double>(),
                    j["t_root"][2].get<double>());
    if (j.contains("names")) s.names = j["names"].get<std::vector<std::string>>();
    if (j.contains("end_effectors")) s.end_effectors = j["end_effectors"].get<std::vector<int>>();
    if (j.contains("joint_map")) s.joint_map = j["joint_map"].get<std::vector<int>>();
    try {
        s.validate();
    } catch (const std::invalid_argument& err) {
        throw ParseError(err.what());
    }
    return s;
}

void save_skeleton(const Skeleton& skel, const std::string& path) {
    json j;
    j["parents"] = skel.parent;
    j["rest_offsets"] = json::array();
    for (const auto& o : skel.rest_offsets) j["rest_offsets"].push_back({o[0], o[1], o[2]});
    if (!skel.shape_basis.empty()) {
        j["shape_basis"] = json::array();
        for (const auto& block : skel.shape_basis) {
            json rows = json::array();
            for (int r = 0; r < 3; ++r) {
                json row = json::array();
                for (int c = 0; c < block.cols(); ++c) row.push_back(block(r, c));
                rows.push_back(row);
            }
            j["shape_basis"].push_back(rows);
        }
    }
    j["t_root"] = {skel.t_root[0], skel.t_root[1], skel.t_root[2]};
    if (!skel.names.empty()) j["names"] = skel.names;
    if (!skel.end_effectors.empty()) j["end_effectors"] = skel.end_effectors;
    if (!skel.joint_map.empty()) j["joint_map"] = skel.joint_map;
    std::ofstream out(path);
    if (!out) throw ParseError("skeleton: cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

Skeleton make_body24_skeleton() {
    Skeleton s;
    s.parent = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
    s.names = {"pelvis",     "left_hip",      "right_hip",      "spine1",     "left_knee",
               "right_knee", "spine2",        "left_ankle",     "right_ankle", "spine3",
               "left_foot",  "right_foot",    "neck",           "left_collar", "right_collar",
               "head",       "left_shoulder", "right_shoulder", "left_elbow",  "right_elbow",
               "left_wrist", "right_wrist",   "left_hand",      "right_hand"};
    // T-pose in a z-up world, body facing +x, left side along +y. Meters.
    s.rest_offsets = {
        {0.00, 0.00, 0.00},   // pelvis
        {0.00, 0.09, -0.06},  // left_hip
        {0.00, -0.09, -0.06}, // right_hip
        {0.00, 0.00, 0.11},   // spine1
        {0.00, 0.00, -0.38},  // left_knee
        {0.00, 0.00, -0.38},  // right_knee
        {0.00, 0.00, 0.12},   // spine2
        {0.00, 0.00, -0.40},  // left_ankle
        {0.00, 0.00, -0.40},  // right_ankle
        {0.00, 0.00, 0.12},   // spine3
        {0.13, 0.00, -0.05},  // left_foot
        {0.13, 0.00, -0.05},  // right_foot
        {0.00, 0.00, 0.12},   // neck
        {0.00, 0.08, 0.05},   // left_collar
        {0.00, -0.08, 0.05},  // right_collar
        {0.00, 0.00, 0.12},   // head
        {0.00, 0.10, 0.02},   // left_shoulder
        {0.00, -0.10, 0.02},  // right_shoulder
        {0.00, 0.26, 0.00},   // left_elbow
        {0.00, -0.26, 0.00},  // right_elbow
        {0.00, 0.25, 0.00},   // left_wrist
        {0.00, -0.25, 0.00},  // right_wrist
        {0.00, 0.08, 0.00},   // left_hand
        {0.00, -0.08, 0.00},  // right_hand
    };
    // Two plain shape directions: overall size, leg length.
    const std::vector<int> leg_joints = {4, 5, 7, 8, 10, 11};
    s.shape_basis.resize(24);
    for (int i = 0; i < 24; ++i) {
        Eigen::Matrix3Xd b = Eigen::Matrix3Xd::Zero(3, 2);
        b.col(0) = 0.05 * s.rest_offsets[i];
        s.shape_basis[i] = b;
    }
    for (int i : leg_joints) s.shape_basis[i].col(1) = 0.05 * s.rest_offsets[i];
    s.t_root = {0.0, 0.0, 0.3};
    s.end_effectors = {10, 11, 22, 23};
    // 17 prediction joints; extremity coverage keeps the whole tree observable.
    s.joint_map = {0, 1, 2, 4, 5, 7, 8, 10, 11, 12, 15, 16, 17, 18, 19, 20, 21};
    s.validate();
    return s;
}

Skeleton make_toy6_skeleton() {
    Skeleton s;
    s.parent = {-1, 0, 1, 2, 0, 4};
    s.names = {"root", "spine", "neck", "head", "hip", "foot"};
    s.rest_offsets = {
        {0.0, 0.0, 0.0},
        {0.0, 0.0, 0.25},
        {0.0, 0.0, 0.22},
        {0.0, 0.0, 0.15},
        {0.0, 0.1, -0.4},
        {0.1, 0.0, -0.4},
    };
    s.t_root = {0.0, 0.0, 0.2};
    s.end_effectors = {3, 5};
    s.joint_map = {0, 1, 2, 3, 4, 5};
    s.validate();
    return s;
}

Skeleton make_chain_skeleton(int joints, double bone_length) {
    if (joints < 1) throw std::invalid_argument("make_chain_skeleton: need at least one joint");
    Skeleton s;
    s.parent.resize(joints);
    s.rest_offsets.resize(joints);
    for (int i = 0; i < joints; ++i) {
        s.parent[i] = i - 1;
        s.rest_offsets[i] = (i == 0) ? Vec3::Zero() : Vec3(bone_length, 0.0, 0.0);
        s.names.push_back("link" + std::to_string(i));
    }
    s.t_root = {0.0, 0.0, 0.1};
    s.end_effectors = {joints - 1};
    s.joint_map.resize(joints);
    for (int i = 0; i < joints; ++i) s.joint_map[i] = i;
    s.validate();
    return s;
}

} // namespace motref
