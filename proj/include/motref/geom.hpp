#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace motref {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rotation as a 3-vector: direction = axis, norm = angle in radians.
using AxisAngle = Eigen::Vector3d;
using RotationMatrix = Eigen::Matrix3d;

// Rigid SE(3) transform, applied as p' = R * p + t.
struct RigidTransform {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return R * p + t; }

    RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }

    // Composition: (a * b).apply(p) == a.apply(b.apply(p)).
    RigidTransform operator*(const RigidTransform& other) const {
        return {R * other.R, R * other.t + t};
    }
};

// Pinhole camera with per-frame world-to-camera extrinsics:
// p_cam = extrinsics[t].R * p_world + extrinsics[t].t.
struct Camera {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    std::vector<RigidTransform> extrinsics;

    int frames() const { return static_cast<int>(extrinsics.size()); }
    void validate() const; // throws std::invalid_argument
};

// True when R is orthonormal with determinant +1, within tol (max abs entry of R^T R - I).
bool is_rotation(const Mat3& R, double tol = 1e-6);

// Rodrigues formula. For angles below 1e-7 a second-order Taylor expansion is
// used so there is never a division by the angle.
Mat3 axis_angle_to_matrix(const AxisAngle& aa);

// Rodrigues plus the three partial derivative matrices d_rot[c] = dR/d(aa[c]).
void axis_angle_to_matrix_jacobian(const AxisAngle& aa, Mat3& rot, std::array<Mat3, 3>& d_rot);

// Log map. Result has norm in [0, pi]; at exactly pi the axis sign is canonical
// (first nonzero component positive). Throws std::invalid_argument if the input
// is not a rotation within 1e-6.
AxisAngle matrix_to_axis_angle(const RotationMatrix& rot);

// Projects a world point through frame t of the camera. Throws BehindCameraError
// when the camera-space depth is <= 1e-6; joint is only used for the error message.
Vec2 project(const Camera& cam, int frame, const Vec3& p_world, int joint = -1);

Camera load_camera(const std::string& path);
void save_camera(const Camera& cam, const std::string& path);

} // namespace motref
