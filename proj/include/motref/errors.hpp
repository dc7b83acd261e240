#pragma once

#include <stdexcept>
#include <string>

namespace motref {

// A point fell on or behind the camera plane during projection.
// Carries the frame and joint it happened at so callers can report it.
class BehindCameraError : public std::runtime_error {
public:
    BehindCameraError(int frame, int joint, double depth)
        : std::runtime_error("point behind camera at frame " + std::to_string(frame) +
                             ", joint " + std::to_string(joint) +
                             " (depth " + std::to_string(depth) + ")"),
          frame_(frame), joint_(joint), depth_(depth) {}

    int frame() const { return frame_; }
    int joint() const { return joint_; }
    double depth() const { return depth_; }

private:
    int frame_;
    int joint_;
    double depth_;
};

// Sequence has too few frames for the requested operation.
class TooShortError : public std::invalid_argument {
public:
    explicit TooShortError(const std::string& what) : std::invalid_argument(what) {}
};

// A data file violated its schema. The message names the offending field.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Optimization produced a non-finite energy.
class DivergedError : public std::runtime_error {
public:
    explicit DivergedError(int epoch)
        : std::runtime_error("non-finite energy at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}

    int epoch() const { return epoch_; }

private:
    int epoch_;
};

} // namespace motref
