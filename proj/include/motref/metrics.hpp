#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "motref/motion.hpp"

namespace motref {
namespace metrics {

// How each 100-frame segment is registered to ground truth before measuring
// joint error: a rigid fit over the whole segment, or over its first two frames.
enum class AlignMode { full_segment, first_two_frames };

// Mean per-joint position error in millimeters after per-segment rigid SE(3)
// alignment (no scale). Sequences are cut into non-overlapping 100-frame
// segments; a trailing segment shorter than 2 frames is dropped. Segments where
// the alignment is degenerate (coincident points) fall back to translation-only
// and are listed in degenerate_segments when provided.
double segment_align_mpjpe(const JointPositions& pred, const JointPositions& gt, AlignMode mode,
                           std::vector<int>* degenerate_segments = nullptr);

// Mean per-joint error in mm after a per-frame similarity alignment
// (rotation, translation and scale). Needs at least 3 joints.
double pa_mpjpe(const JointPositions& pred, const JointPositions& gt);

// Root trajectory error in meters after one rigid fit over the whole sequence.
double rte(const MotionSequence& pred, const MotionSequence& gt);

// Mean Euclidean norms of velocity error (m/s, backward differences) and
// acceleration error (m/s^2, central second differences) on camera-frame joints.
struct DynamicsErrors {
    double velocity = 0.0;
    double acceleration = 0.0;
};
DynamicsErrors dynamics_errors(const JointPositions& pred_cam, const JointPositions& gt_cam,
                               double dt);

// Mean norm of third-order forward differences divided by dt^3, in m/s^3.
double jitter(const JointPositions& pos, double dt);

// Foot skating: mean horizontal drift (mm) between consecutive frames where a
// foot joint stays within height_thresh of the sequence-minimum foot height.
// Feet are the end effectors whose names contain "foot"; if none match, all
// end effectors are used. Height is the world z axis.
double foot_sliding(const JointPositions& world, const Skeleton& skel,
                    double height_thresh = 0.05);

// Range between two percentiles (linear interpolation between closest ranks)
// of a sample set; used to normalize the error threshold below.
struct DatasetStats {
    double r_min = 0.0;
    double r_max = 0.0;
};
DatasetStats percentile_range(std::span<const double> samples, double lo_pct = 0.1,
                              double hi_pct = 99.9);

// Percentage of samples with |pred - gt| strictly below tau * (r_max - r_min).
double pce(std::span<const double> pred, std::span<const double> gt, const DatasetStats& stats,
           double tau);

// Percentage of keypoints within (strictly below) a pixel threshold.
double pck(std::span<const Vec2> pred, std::span<const Vec2> gt, double threshold_px);

struct MetricReport {
    double wa_mpjpe_mm = 0.0;
    double w_mpjpe_mm = 0.0;
    double pa_mpjpe_mm = 0.0;
    double rte_m = 0.0;
    double jitter_m_s3 = 0.0;
    double foot_sliding_mm = 0.0;
    double mpjve_m_s = 0.0;
    double mpjae_m_s2 = 0.0;
    std::map<double, double> pce_velocity;     // tau -> %
    std::map<double, double> pce_acceleration; // tau -> %
    std::map<double, double> pck_pixels;       // threshold(px) -> %
};

// Runs the whole suite for a predicted motion against ground truth.
MetricReport full_report(const MotionSequence& pred, const MotionSequence& gt,
                         const Skeleton& skel, const Camera& cam);

std::string format_table(const MetricReport& report);
void save_report_json(const MetricReport& report, const std::string& path);

} // namespace metrics
} // namespace motref
