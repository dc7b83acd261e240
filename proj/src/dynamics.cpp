#include "motref/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "motref/errors.hpp"

namespace motref {
namespace {

using nlohmann::json;

void check_grid(const JointPositions& pos, int min_frames, const char* op) {
    if (pos.frames() < min_frames) {
        throw TooShortError(std::string(op) + ": needs at least " + std::to_string(min_frames) +
                            " frames, got " + std::to_string(pos.frames()));
    }
    for (const auto& frame : pos.pos) {
        if (static_cast<int>(frame.size()) != pos.joints()) {
            throw std::invalid_argument(std::string(op) + ": ragged joint array");
        }
    }
}

} // namespace

void DynamicsPredictions::validate() const {
    const int t = frames();
    const int k = pred_joints();
    if (t < 1 || k < 1) {
        throw std::invalid_argument("predictions: need at least one frame and one joint");
    }
    if (static_cast<int>(vel3d.size()) != t - 1) {
        throw std::invalid_argument("predictions: vel3d must have T-1 entries");
    }
    if (static_cast<int>(acc3d.size()) != std::max(0, t - 2)) {
        throw std::invalid_argument("predictions: acc3d must have T-2 entries");
    }
    if (static_cast<int>(confidence.size()) != t) {
        throw std::invalid_argument("predictions: confidence must have T entries");
    }
    auto check_width = [k](size_t got, const char* name) {
        if (static_cast<int>(got) != k) {
            throw std::invalid_argument(std::string("predictions: ") + name +
                                        " rows must match joint_map size");
        }
    };
    for (const auto& row : keypoints2d) check_width(row.size(), "keypoints2d");
    for (const auto& row : vel3d) check_width(row.size(), "vel3d");
    for (const auto& row : acc3d) check_width(row.size(), "acc3d");
    for (const auto& row : confidence) {
        check_width(row.size(), "confidence");
        for (double c : row) {
            if (!(c >= 0.0 && c <= 1.0)) {
                throw std::invalid_argument("predictions: confidence values must lie in [0, 1]");
            }
        }
    }
}

std::vector<std::vector<Vec3>> velocity_field(const JointPositions& pos, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("velocity_field: dt must be positive");
    check_grid(pos, 2, "velocity_field");
    std::vector<std::vector<Vec3>> out(pos.frames() - 1);
    for (int t = 1; t < pos.frames(); ++t) {
        out[t - 1].reserve(pos.joints());
        for (int j = 0; j < pos.joints(); ++j) {
            out[t - 1].push_back((pos.pos[t][j] - pos.pos[t - 1][j]) / dt);
        }
    }
    return out;
}

std::vector<std::vector<Vec3>> acceleration_field(const JointPositions& pos, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("acceleration_field: dt must be positive");
    check_grid(pos, 3, "acceleration_field");
    std::vector<std::vector<Vec3>> out(pos.frames() - 2);
    const double dt2 = dt * dt;
    for (int t = 1; t + 1 < pos.frames(); ++t) {
        out[t - 1].reserve(pos.joints());
        for (int j = 0; j < pos.joints(); ++j) {
            out[t - 1].push_back((pos.pos[t + 1][j] - 2.0 * pos.pos[t][j] + pos.pos[t - 1][j]) / dt2);
        }
    }
    return out;
}

std::vector<std::vector<Vec3>> jerk_residuals(const JointPositions& pos) {
    check_grid(pos, 4, "jerk_residuals");
    std::vector<std::vector<Vec3>> out(pos.frames() - 3);
    for (int t = 0; t + 3 < pos.frames(); ++t) {
        out[t].reserve(pos.joints());
        for (int j = 0; j < pos.joints(); ++j) {
            out[t].push_back(pos.pos[t + 3][j] - 3.0 * pos.pos[t + 2][j] +
                             3.0 * pos.pos[t + 1][j] - pos.pos[t][j]);
        }
    }
    return out;
}

namespace counter_rng {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}
} // namespace

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t frame,
                  std::uint64_t joint, std::uint64_t component) {
    std::uint64_t h = splitmix64(seed ^ 0x5851F42D4C957F2DULL);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ frame);
    h = splitmix64(h ^ joint);
    h = splitmix64(h ^ component);
    return h;
}

double uniform(std::uint64_t key) {
    // 53 mantissa bits, shifted into (0, 1] so log() below is always defined.
    return static_cast<double>((key >> 11) + 1) * 0x1.0p-53;
}

double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t frame,
                std::uint64_t joint, std::uint64_t component) {
    const std::uint64_t k1 = mix(seed, stream, frame, joint, component);
    const std::uint64_t k2 = splitmix64(k1 ^ 0xA0761D6478BD642FULL);
    const double u1 = uniform(k1);
    const double u2 = uniform(k2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace counter_rng

DynamicsPredictions synth_oracle(const MotionSequence& gt_world, const Skeleton& skel,
                                 const Camera& cam, const NoiseConfig& noise) {
    if (noise.sigma_kp < 0.0 || noise.sigma_vel < 0.0 || noise.sigma_acc < 0.0 ||
        noise.dropout_prob < 0.0 || noise.dropout_prob > 1.0) {
        throw std::invalid_argument("synth_oracle: noise parameters out of range");
    }
    if (skel.joint_map.empty()) {
        throw std::invalid_argument("synth_oracle: skeleton has no joint_map");
    }
    const JointPositions world = joints_world(gt_world, skel);
    const int t_count = world.frames();
    const int k_count = static_cast<int>(skel.joint_map.size());
    if (t_count < 3) throw TooShortError("synth_oracle: needs at least 3 frames");

    // Mapped joints only, in the camera frame.
    JointPositions mapped;
    mapped.frame = FrameTag::world;
    mapped.pos.resize(t_count);
    for (int t = 0; t < t_count; ++t) {
        mapped.pos[t].reserve(k_count);
        for (int k = 0; k < k_count; ++k) {
            mapped.pos[t].push_back(world.pos[t][skel.joint_map[k]]);
        }
    }
    const JointPositions cam_joints = joints_to_camera(mapped, cam);

    DynamicsPredictions out;
    out.joint_map = skel.joint_map;
    out.vel3d = velocity_field(cam_joints, gt_world.dt);
    out.acc3d = acceleration_field(cam_joints, gt_world.dt);
    out.keypoints2d.resize(t_count);
    out.confidence.assign(t_count, std::vector<double>(k_count, 1.0));

    using namespace counter_rng;
    for (int t = 0; t < t_count; ++t) {
        out.keypoints2d[t].reserve(k_count);
        for (int k = 0; k < k_count; ++k) {
            Vec2 kp = project(cam, t, mapped.pos[t][k], skel.joint_map[k]);
            if (noise.sigma_kp > 0.0) {
                kp.x() += noise.sigma_kp * gaussian(noise.seed, kStreamKeypoints, t, k, 0);
                kp.y() += noise.sigma_kp * gaussian(noise.seed, kStreamKeypoints, t, k, 1);
            }
            out.keypoints2d[t].push_back(kp);
            if (noise.dropout_prob > 0.0 &&
                uniform(mix(noise.seed, kStreamDropout, t, k, 0)) < noise.dropout_prob) {
                out.confidence[t][k] = 0.0;
            }
        }
    }
    if (noise.sigma_vel > 0.0) {
        for (size_t t = 0; t < out.vel3d.size(); ++t) {
            for (int k = 0; k < k_count; ++k) {
                for (int c = 0; c < 3; ++c) {
                    out.vel3d[t][k][c] += noise.sigma_vel * gaussian(noise.seed, kStreamVelocity, t, k, c);
                }
            }
        }
    }
    if (noise.sigma_acc > 0.0) {
        for (size_t t = 0; t < out.acc3d.size(); ++t) {
            for (int k = 0; k < k_count; ++k) {
                for (int c = 0; c < 3; ++c) {
                    out.acc3d[t][k][c] += noise.sigma_acc * gaussian(noise.seed, kStreamAcceleration, t, k, c);
                }
            }
        }
    }
    out.validate();
    return out;
}

DynamicsPredictions load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("predictions: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("predictions: invalid JSON in '" + path + "': " + e.what());
    }

    DynamicsPredictions p;
    if (!j.contains("joint_map") || !j["joint_map"].is_array()) {
        throw ParseError("predictions: missing or non-array field 'joint_map'");
    }
    p.joint_map = j["joint_map"].get<std::vector<int>>();

    auto parse_rows = [&j](const char* field, size_t width, auto&& push_row) {
        if (!j.contains(field) || !j[field].is_array()) {
            throw ParseError(std::string("predictions: missing or non-array field '") + field + "'");
        }
        for (const auto& row : j[field]) {
            if (!row.is_array()) {
                throw ParseError(std::string("predictions: field '") + field + "' must be 2-D");
            }
            for (const auto& cell : row) {
                if (width > 0 && (!cell.is_array() || cell.size() != width)) {
                    throw ParseError(std::string("predictions: field '") + field + "' entries must have " +
                                     std::to_string(width) + " numbers");
                }
            }
            push_row(row);
        }
    };

    parse_rows("keypoints2d", 2, [&p](const json& row) {
        std::vector<Vec2> r;
        for (const auto& cell : row) r.emplace_back(cell[0].get<double>(), cell[1].get<double>());
        p.keypoints2d.push_back(std::move(r));
    });
    parse_rows("vel3d", 3, [&p](const json& row) {
        std::vector<Vec3> r;
        for (const auto& cell : row)
            r.emplace_back(cell[0].get<double>(), cell[1].get<double>(), cell[2].get<double>());
        p.vel3d.push_back(std::move(r));
    });
    parse_rows("acc3d", 3, [&p](const json& row) {
        std::vector<Vec3> r;
        for (const auto& cell : row)
            r.emplace_back(cell[0].get<double>(), cell[1].get<double>(), cell[2].get<double>());
        p.acc3d.push_back(std::move(r));
    });
    if (!j.contains("confidence") || !j["confidence"].is_array()) {
        throw ParseError("predictions: missing or non-array field 'confidence'");
    }
    for (const auto& row : j["confidence"]) {
        if (!row.is_array()) throw ParseError("predictions: field 'confidence' must be 2-D");
        p.confidence.push_back(row.get<std::vector<double>>());
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& err) {
        throw ParseError(err.what());
    }
    return p;
}

void save_predictions(const DynamicsPredictions& preds, const std::string& path) {
    json j;
    j["joint_map"] = preds.joint_map;
    j["keypoints2d"] = json::array();
    for (const auto& row : preds.keypoints2d) {
        json r = json::array();
        for (const auto& v : row) r.push_back({v[0], v[1]});
        j["keypoints2d"].push_back(std::move(r));
    }
    auto dump3 = [](const std::vector<std::vector<Vec3>>& rows) {
        json out = json::array();
        for (const auto& row : rows) {
            json r = json::array();
            for (const auto& v : row) r.push_back({v[0], v[1], v[2]});
            out.push_back(std::move(r));
        }
        return out;
    };
    j["vel3d"] = dump3(preds.vel3d);
    j["acc3d"] = dump3(preds.acc3d);
    j["confidence"] = preds.confidence;
    std::ofstream out(path);
    if (!out) throw ParseError("predictions: cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

} // namespace motref
