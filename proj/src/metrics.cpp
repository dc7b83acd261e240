#include "motref/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <json.hpp>

#include <fstream>

#include "motref/dynamics.hpp"
#include "motref/errors.hpp"

namespace motref {
namespace metrics {
namespace {

constexpr int kSegmentFrames = 100;

void check_pair(const JointPositions& a, const JointPositions& b, const char* op) {
    if (a.frames() != b.frames() || a.joints() != b.joints()) {
        throw std::invalid_argument(std::string(op) + ": sequences must share frames and joints");
    }
    if (a.frames() < 1 || a.joints() < 1) {
        throw std::invalid_argument(std::string(op) + ": empty input");
    }
}

// Rigid Kabsch fit mapping src onto dst (no scale). Coincident point sets fall
// back to a pure translation and set *degenerate.
RigidTransform rigid_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                         bool* degenerate = nullptr) {
    const size_t n = src.size();
    Vec3 src_mean = Vec3::Zero(), dst_mean = Vec3::Zero();
    for (size_t i = 0; i < n; ++i) {
        src_mean += src[i];
        dst_mean += dst[i];
    }
    src_mean /= static_cast<double>(n);
    dst_mean /= static_cast<double>(n);

    Mat3 h = Mat3::Zero();
    double spread = 0.0;
    for (size_t i = 0; i < n; ++i) {
        h.noalias() += (src[i] - src_mean) * (dst[i] - dst_mean).transpose();
        spread += (src[i] - src_mean).squaredNorm() + (dst[i] - dst_mean).squaredNorm();
    }
    if (spread < 1e-18) {
        if (degenerate) *degenerate = true;
        return {Mat3::Identity(), dst_mean - src_mean};
    }
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
    return {r, dst_mean - r * src_mean};
}

} // namespace

double segment_align_mpjpe(const JointPositions& pred, const JointPositions& gt, AlignMode mode,
                           std::vector<int>* degenerate_segments) {
    check_pair(pred, gt, "segment_align_mpjpe");
    if (pred.frames() < 2) {
        throw TooShortError("segment_align_mpjpe: needs at least 2 frames");
    }
    if (degenerate_segments) degenerate_segments->clear();

    double segment_sum = 0.0;
    int segment_count = 0;
    for (int begin = 0; begin < pred.frames(); begin += kSegmentFrames) {
        const int end = std::min(begin + kSegmentFrames, pred.frames());
        if (end - begin < 2) break; // trailing 1-frame segment carries no pose error signal

        const int align_end = (mode == AlignMode::full_segment) ? end : begin + 2;
        std::vector<Vec3> src, dst;
        src.reserve(static_cast<size_t>(align_end - begin) * pred.joints());
        for (int t = begin; t < align_end; ++t) {
            for (int j = 0; j < pred.joints(); ++j) {
                src.push_back(pred.pos[t][j]);
                dst.push_back(gt.pos[t][j]);
            }
        }
        bool degenerate = false;
        const RigidTransform fit = rigid_fit(src, dst, &degenerate);
        if (degenerate && degenerate_segments) degenerate_segments->push_back(segment_count);

        double err = 0.0;
        for (int t = begin; t < end; ++t) {
            for (int j = 0; j < pred.joints(); ++j) {
                err += (fit.apply(pred.pos[t][j]) - gt.pos[t][j]).norm();
            }
        }
        segment_sum += err / (static_cast<double>(end - begin) * pred.joints());
        ++segment_count;
    }
    return 1000.0 * segment_sum / segment_count;
}

double pa_mpjpe(const JointPositions& pred, const JointPositions& gt) {
    check_pair(pred, gt, "pa_mpjpe");
    if (pred.joints() < 3) {
        throw std::invalid_argument("pa_mpjpe: needs at least 3 joints per frame");
    }
    const int j = pred.joints();
    double total = 0.0;
    for (int t = 0; t < pred.frames(); ++t) {
        Eigen::Matrix3Xd src(3, j), dst(3, j);
        for (int i = 0; i < j; ++i) {
            src.col(i) = pred.pos[t][i];
            dst.col(i) = gt.pos[t][i];
        }
        const Eigen::Matrix4d sim = Eigen::umeyama(src, dst, true);
        double frame_err = 0.0;
        for (int i = 0; i < j; ++i) {
            const Vec3 aligned = sim.topLeftCorner<3, 3>() * src.col(i) + sim.topRightCorner<3, 1>();
            frame_err += (aligned - dst.col(i)).norm();
        }
        total += frame_err / j;
    }
    return 1000.0 * total / pred.frames();
}

double rte(const MotionSequence& pred, const MotionSequence& gt) {
    if (pred.frames() != gt.frames() || pred.frames() < 1) {
        throw std::invalid_argument("rte: sequences must share a positive frame count");
    }
    const RigidTransform fit = rigid_fit(pred.root_trans, gt.root_trans);
    double total = 0.0;
    for (int t = 0; t < pred.frames(); ++t) {
        total += (fit.apply(pred.root_trans[t]) - gt.root_trans[t]).norm();
    }
    return total / pred.frames();
}

DynamicsErrors dynamics_errors(const JointPositions& pred_cam, const JointPositions& gt_cam,
                               double dt) {
    check_pair(pred_cam, gt_cam, "dynamics_errors");
    if (pred_cam.frames() < 3) {
        throw TooShortError("dynamics_errors: needs at least 3 frames");
    }
    const auto pv = velocity_field(pred_cam, dt);
    const auto gv = velocity_field(gt_cam, dt);
    const auto pa = acceleration_field(pred_cam, dt);
    const auto ga = acceleration_field(gt_cam, dt);

    DynamicsErrors out;
    long n = 0;
    for (size_t t = 0; t < pv.size(); ++t) {
        for (size_t k = 0; k < pv[t].size(); ++k) {
            out.velocity += (pv[t][k] - gv[t][k]).norm();
            ++n;
        }
    }
    out.velocity /= n;
    n = 0;
    for (size_t t = 0; t < pa.size(); ++t) {
        for (size_t k = 0; k < pa[t].size(); ++k) {
            out.acceleration += (pa[t][k] - ga[t][k]).norm();
            ++n;
        }
    }
    out.acceleration /= n;
    return out;
}

double jitter(const JointPositions& pos, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("jitter: dt must be positive");
    if (pos.frames() < 4) throw TooShortError("jitter: needs at least 4 frames");
    const auto res = jerk_residuals(pos);
    const double dt3 = dt * dt * dt;
    double total = 0.0;
    long n = 0;
    for (const auto& frame : res) {
        for (const auto& r : frame) {
            total += r.norm() / dt3;
            ++n;
        }
    }
    return total / n;
}

double foot_sliding(const JointPositions& world, const Skeleton& skel, double height_thresh) {
    if (world.frames() < 2) throw TooShortError("foot_sliding: needs at least 2 frames");
    if (world.joints() != skel.joint_count()) {
        throw std::invalid_argument("foot_sliding: positions must cover every skeleton joint");
    }
    if (!(height_thresh > 0.0)) {
        throw std::invalid_argument("foot_sliding: height_thresh must be positive");
    }
    std::vector<int> feet;
    for (int e : skel.end_effectors) {
        std::string name = e < static_cast<int>(skel.names.size()) ? skel.names[e] : "";
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (name.find("foot") != std::string::npos) feet.push_back(e);
    }
    if (feet.empty()) feet = skel.end_effectors;
    if (feet.empty()) throw std::invalid_argument("foot_sliding: skeleton has no end effectors");

    double min_height = std::numeric_limits<double>::infinity();
    for (const auto& frame : world.pos) {
        for (int f : feet) min_height = std::min(min_height, frame[f].z());
    }

    double drift = 0.0;
    long n = 0;
    for (int f : feet) {
        for (int t = 0; t + 1 < world.frames(); ++t) {
            const bool contact_now = world.pos[t][f].z() - min_height < height_thresh;
            const bool contact_next = world.pos[t + 1][f].z() - min_height < height_thresh;
            if (contact_now && contact_next) {
                const Vec3 d = world.pos[t + 1][f] - world.pos[t][f];
                drift += std::hypot(d.x(), d.y());
                ++n;
            }
        }
    }
    return n == 0 ? 0.0 : 1000.0 * drift / n;
}

DatasetStats percentile_range(std::span<const double> samples, double lo_pct, double hi_pct) {
    if (samples.size() < 2) {
        throw std::invalid_argument("percentile_range: need at least 2 samples");
    }
    if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 100.0)) {
        throw std::invalid_argument("percentile_range: need 0 <= lo < hi <= 100");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    auto interp = [&sorted](double pct) {
        const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
        const size_t lo = static_cast<size_t>(std::floor(rank));
        const size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = rank - static_cast<double>(lo);
        return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    };
    DatasetStats stats{interp(lo_pct), interp(hi_pct)};
    if (!(stats.r_max > stats.r_min)) {
        throw std::invalid_argument("percentile_range: degenerate (constant) samples");
    }
    return stats;
}

double pce(std::span<const double> pred, std::span<const double> gt, const DatasetStats& stats,
           double tau) {
    if (pred.size() != gt.size() || pred.empty()) {
        throw std::invalid_argument("pce: inputs must be non-empty and equal-sized");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("pce: tau must be positive");
    const double threshold = tau * (stats.r_max - stats.r_min);
    long hits = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (std::abs(pred[i] - gt[i]) < threshold) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

double pck(std::span<const Vec2> pred, std::span<const Vec2> gt, double threshold_px) {
    if (pred.size() != gt.size() || pred.empty()) {
        throw std::invalid_argument("pck: inputs must be non-empty and equal-sized");
    }
    if (!(threshold_px > 0.0)) throw std::invalid_argument("pck: threshold must be positive");
    long hits = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if ((pred[i] - gt[i]).norm() < threshold_px) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

MetricReport full_report(const MotionSequence& pred, const MotionSequence& gt,
                         const Skeleton& skel, const Camera& cam) {
    if (pred.frames() != gt.frames()) {
        throw std::invalid_argument("full_report: sequences must share the frame count");
    }
    if (pred.dt != gt.dt) {
        throw std::invalid_argument("full_report: sequences must share dt");
    }
    const JointPositions pred_world = joints_world(pred, skel);
    const JointPositions gt_world = joints_world(gt, skel);
    const JointPositions pred_cam = joints_to_camera(pred_world, cam);
    const JointPositions gt_cam = joints_to_camera(gt_world, cam);

    MetricReport r;
    r.wa_mpjpe_mm = segment_align_mpjpe(pred_world, gt_world, AlignMode::full_segment);
    r.w_mpjpe_mm = segment_align_mpjpe(pred_world, gt_world, AlignMode::first_two_frames);
    r.pa_mpjpe_mm = pa_mpjpe(pred_world, gt_world);
    r.rte_m = rte(pred, gt);
    r.jitter_m_s3 = jitter(pred_world, pred.dt);
    r.foot_sliding_mm = foot_sliding(pred_world, skel);

    const DynamicsErrors dyn = dynamics_errors(pred_cam, gt_cam, pred.dt);
    r.mpjve_m_s = dyn.velocity;
    r.mpjae_m_s2 = dyn.acceleration;

    // Per-component error percentages, thresholds normalized by the ground
    // truth percentile range. Skipped when ground truth is constant.
    auto flatten = [](const std::vector<std::vector<Vec3>>& field) {
        std::vector<double> flat;
        flat.reserve(field.size() * (field.empty() ? 0 : field[0].size()) * 3);
        for (const auto& row : field) {
            for (const auto& v : row) {
                flat.push_back(v.x());
                flat.push_back(v.y());
                flat.push_back(v.z());
            }
        }
        return flat;
    };
    const std::vector<double> taus = {0.10, 0.05, 0.01};
    try {
        const auto pv = flatten(velocity_field(gt_cam, gt.dt));
        const auto qv = flatten(velocity_field(pred_cam, pred.dt));
        const DatasetStats sv = percentile_range(pv);
        for (double tau : taus) r.pce_velocity[tau] = pce(qv, pv, sv, tau);
    } catch (const std::invalid_argument&) {
    }
    try {
        const auto pa = flatten(acceleration_field(gt_cam, gt.dt));
        const auto qa = flatten(acceleration_field(pred_cam, pred.dt));
        const DatasetStats sa = percentile_range(pa);
        for (double tau : taus) r.pce_acceleration[tau] = pce(qa, pa, sa, tau);
    } catch (const std::invalid_argument&) {
    }

    // Keypoint accuracy on joints visible in both sequences.
    std::vector<Vec2> pred_px, gt_px;
    for (int t = 0; t < pred.frames(); ++t) {
        for (int j = 0; j < pred_world.joints(); ++j) {
            const Vec3 qp = cam.extrinsics[t].apply(pred_world.pos[t][j]);
            const Vec3 qg = cam.extrinsics[t].apply(gt_world.pos[t][j]);
            if (qp.z() <= 1e-6 || qg.z() <= 1e-6) continue;
            pred_px.push_back(project(cam, t, pred_world.pos[t][j], j));
            gt_px.push_back(project(cam, t, gt_world.pos[t][j], j));
        }
    }
    if (!pred_px.empty()) {
        for (double thr : {10.0, 5.0}) r.pck_pixels[thr] = pck(pred_px, gt_px, thr);
    }
    return r;
}

std::string format_table(const MetricReport& r) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    auto row = [&out](const std::string& name, double value, const char* unit) {
        out << "  " << name;
        for (size_t i = name.size(); i < 18; ++i) out << ' ';
        out << value << ' ' << unit << '\n';
    };
    row("WA-MPJPE", r.wa_mpjpe_mm, "mm");
    row("W-MPJPE", r.w_mpjpe_mm, "mm");
    row("PA-MPJPE", r.pa_mpjpe_mm, "mm");
    row("RTE", r.rte_m, "m");
    row("Jitter", r.jitter_m_s3, "m/s^3");
    row("FS", r.foot_sliding_mm, "mm");
    row("MPJVE", r.mpjve_m_s, "m/s");
    row("MPJAE", r.mpjae_m_s2, "m/s^2");
    for (const auto& [tau, pct] : r.pce_velocity) {
        std::ostringstream name;
        name << "PCE-V@" << tau;
        row(name.str(), pct, "%");
    }
    for (const auto& [tau, pct] : r.pce_acceleration) {
        std::ostringstream name;
        name << "PCE-A@" << tau;
        row(name.str(), pct, "%");
    }
    for (const auto& [thr, pct] : r.pck_pixels) {
        std::ostringstream name;
        name << "PCK@" << thr << "px";
        row(name.str(), pct, "%");
    }
    return out.str();
}

void save_report_json(const MetricReport& r, const std::string& path) {
    nlohmann::json j;
    j["wa_mpjpe_mm"] = r.wa_mpjpe_mm;
    j["w_mpjpe_mm"] = r.w_mpjpe_mm;
    j["pa_mpjpe_mm"] = r.pa_mpjpe_mm;
    j["rte_m"] = r.rte_m;
    j["jitter_m_s3"] = r.jitter_m_s3;
    j["foot_sliding_mm"] = r.foot_sliding_mm;
    j["mpjve_m_s"] = r.mpjve_m_s;
    j["mpjae_m_s2"] = r.mpjae_m_s2;
    auto dump_map = [](const std::map<double, double>& m) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : m) {
            std::ostringstream key;
            key << k;
            out[key.str()] = v;
        }
        return out;
    };
    j["pce_velocity"] = dump_map(r.pce_velocity);
    j["pce_acceleration"] = dump_map(r.pce_acceleration);
    j["pck_pixels"] = dump_map(r.pck_pixels);
    std::ofstream out(path);
    if (!out) throw ParseError("report: cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

} // namespace metrics
} // namespace motref
