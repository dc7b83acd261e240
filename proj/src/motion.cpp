#include "motref/motion.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "motref/errors.hpp"

namespace motref {
namespace {

using nlohmann::json;

void check_sizes(const MotionSequence& seq, const Camera& cam) {
    if (cam.frames() != seq.frames()) {
        throw std::invalid_argument("motion/camera frame count mismatch: " +
                                    std::to_string(seq.frames()) + " vs " +
                                    std::to_string(cam.frames()));
    }
}

Vec3 parse_vec3(const json& arr, const char* field) {
    if (!arr.is_array() || arr.size() != 3) {
        throw ParseError(std::string("motion: field '") + field + "' must have 3 numbers");
    }
    return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

} // namespace

void MotionSequence::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("motion: dt must be positive and finite");
    }
    const int t = frames();
    if (t < 1) throw std::invalid_argument("motion: needs at least one frame");
    const int j = joints();
    if (j < 1) throw std::invalid_argument("motion: needs at least one joint");
    if (static_cast<int>(root_orient.size()) != t || static_cast<int>(root_trans.size()) != t) {
        throw std::invalid_argument("motion: root arrays must match the frame count");
    }
    for (int f = 0; f < t; ++f) {
        if (static_cast<int>(theta[f].size()) != j) {
            throw std::invalid_argument("motion: ragged theta at frame " + std::to_string(f));
        }
        for (const auto& v : theta[f]) {
            if (!v.allFinite()) throw std::invalid_argument("motion: non-finite theta");
        }
        if (!root_orient[f].allFinite() || !root_trans[f].allFinite()) {
            throw std::invalid_argument("motion: non-finite root parameters");
        }
    }
    if (!beta.allFinite()) throw std::invalid_argument("motion: non-finite beta");
}

MotionSequence camera_to_world(const MotionSequence& seq, const Camera& cam, const Skeleton& skel) {
    if (seq.frame_tag != FrameTag::camera) {
        throw std::invalid_argument("camera_to_world: motion is not camera-frame");
    }
    check_sizes(seq, cam);
    MotionSequence out = seq;
    out.frame_tag = FrameTag::world;
    for (int t = 0; t < seq.frames(); ++t) {
        const RigidTransform c2w = cam.extrinsics[t].inverse();
        const Mat3 orient_c = axis_angle_to_matrix(seq.root_orient[t]);
        out.root_orient[t] = matrix_to_axis_angle(c2w.R * orient_c);
        out.root_trans[t] = c2w.t + c2w.R * (seq.root_trans[t] + skel.t_root) - skel.t_root;
    }
    return out;
}

MotionSequence world_to_camera(const MotionSequence& seq, const Camera& cam, const Skeleton& skel) {
    if (seq.frame_tag != FrameTag::world) {
        throw std::invalid_argument("world_to_camera: motion is not world-frame");
    }
    check_sizes(seq, cam);
    MotionSequence out = seq;
    out.frame_tag = FrameTag::camera;
    for (int t = 0; t < seq.frames(); ++t) {
        const RigidTransform& w2c = cam.extrinsics[t];
        const Mat3 orient_w = axis_angle_to_matrix(seq.root_orient[t]);
        out.root_orient[t] = matrix_to_axis_angle(w2c.R * orient_w);
        out.root_trans[t] = w2c.R * (seq.root_trans[t] + skel.t_root) + w2c.t - skel.t_root;
    }
    return out;
}

JointPositions joints_world(const MotionSequence& seq, const Skeleton& skel) {
    if (seq.frame_tag != FrameTag::world) {
        throw std::invalid_argument("joints_world: motion is not world-frame");
    }
    if (seq.joints() != skel.joint_count()) {
        throw std::invalid_argument("joints_world: motion has " + std::to_string(seq.joints()) +
                                    " joints, skeleton has " + std::to_string(skel.joint_count()));
    }
    const Skeleton shaped = apply_shape(skel, seq.beta);
    JointPositions out;
    out.frame = FrameTag::world;
    out.pos.resize(seq.frames());
    for (int t = 0; t < seq.frames(); ++t) {
        out.pos[t] = forward_kinematics(shaped, seq.theta[t], seq.root_orient[t], seq.root_trans[t]);
    }
    return out;
}

JointPositions joints_to_camera(const JointPositions& world, const Camera& cam) {
    if (world.frame != FrameTag::world) {
        throw std::invalid_argument("joints_to_camera: input is not world-frame");
    }
    if (cam.frames() != world.frames()) {
        throw std::invalid_argument("joints_to_camera: camera has " + std::to_string(cam.frames()) +
                                    " extrinsics, sequence has " + std::to_string(world.frames()));
    }
    JointPositions out;
    out.frame = FrameTag::camera;
    out.pos.resize(world.frames());
    for (int t = 0; t < world.frames(); ++t) {
        out.pos[t].reserve(world.pos[t].size());
        for (const auto& p : world.pos[t]) {
            out.pos[t].push_back(cam.extrinsics[t].apply(p));
        }
    }
    return out;
}

MotionSequence load_motion(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("motion: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("motion: invalid JSON in '" + path + "': " + e.what());
    }

    MotionSequence seq;
    if (!j.contains("dt") || !j["dt"].is_number()) {
        throw ParseError("motion: missing or non-numeric field 'dt'");
    }
    seq.dt = j["dt"].get<double>();
    if (!j.contains("frame_tag") || !j["frame_tag"].is_string()) {
        throw ParseError("motion: missing or non-string field 'frame_tag'");
    }
    const std::string tag = j["frame_tag"].get<std::string>();
    if (tag == "world") {
        seq.frame_tag = FrameTag::world;
    } else if (tag == "camera") {
        seq.frame_tag = FrameTag::camera;
    } else {
        throw ParseError("motion: field 'frame_tag' must be \"world\" or \"camera\"");
    }
    if (!j.contains("beta") || !j["beta"].is_array()) {
        throw ParseError("motion: missing or non-array field 'beta'");
    }
    seq.beta.resize(j["beta"].size());
    for (size_t i = 0; i < j["beta"].size(); ++i) seq.beta[i] = j["beta"][i].get<double>();
    if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty()) {
        throw ParseError("motion: missing, non-array or empty field 'frames'");
    }
    for (const auto& f : j["frames"]) {
        if (!f.contains("theta") || !f["theta"].is_array()) {
            throw ParseError("motion: frame missing array field 'theta'");
        }
        std::vector<AxisAngle> theta;
        for (const auto& row : f["theta"]) {
            if (!row.is_array() || row.size() != 3) {
                throw ParseError("motion: field 'theta' rows must have 3 numbers");
            }
            theta.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
        }
        if (!f.contains("root_orient")) throw ParseError("motion: frame missing field 'root_orient'");
        if (!f.contains("root_trans")) throw ParseError("motion: frame missing field 'root_trans'");
        seq.theta.push_back(std::move(theta));
        seq.root_orient.push_back(parse_vec3(f["root_orient"], "root_orient"));
        seq.root_trans.push_back(parse_vec3(f["root_trans"], "root_trans"));
    }
    try {
        seq.validate();
    } catch (const std::invalid_argument& err) {
        throw ParseError(err.what());
    }
    return seq;
}

void save_motion(const MotionSequence& seq, const std::string& path) {
    json j;
    j["dt"] = seq.dt;
    j["frame_tag"] = seq.frame_tag == FrameTag::world ? "world" : "camera";
    j["beta"] = json::array();
    for (int i = 0; i < seq.beta.size(); ++i) j["beta"].push_back(seq.beta[i]);
    j["frames"] = json::array();
    for (int t = 0; t < seq.frames(); ++t) {
        json f;
        f["theta"] = json::array();
        for (const auto& v : seq.theta[t]) f["theta"].push_back({v[0], v[1], v[2]});
        const auto& o = seq.root_orient[t];
        const auto& r = seq.root_trans[t];
        f["root_orient"] = {o[0], o[1], o[2]};
        f["root_trans"] = {r[0], r[1], r[2]};
        j["frames"].push_back(std::move(f));
    }
    std::ofstream out(path);
    if (!out) throw ParseError("motion: cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

} // namespace motref
