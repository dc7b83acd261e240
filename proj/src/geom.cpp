#include "motref/geom.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/LU>
#include <json.hpp>

#include "motref/errors.hpp"

namespace motref {
namespace {

using nlohmann::json;

constexpr double kSmallAngle = 1e-7;

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

// Coefficients of R = I + a*[v]x + b*[v]x^2 as functions of s = theta^2,
// plus their derivatives w.r.t. s when requested. Small-angle branches use
// truncated series so nothing divides by the angle.
struct RotCoeffs {
    double a, b;   // sin(t)/t, (1-cos(t))/t^2
    double da, db; // d/ds of the above
};

RotCoeffs rot_coeffs(double s, bool with_derivs) {
    RotCoeffs c{};
    const double theta = std::sqrt(s);
    if (theta < kSmallAngle) {
        c.a = 1.0 - s / 6.0 + s * s / 120.0;
        c.b = 0.5 - s / 24.0 + s * s / 720.0;
    } else {
        const double half = 0.5 * theta;
        const double sh = std::sin(half);
        c.a = std::sin(theta) / theta;
        c.b = 2.0 * sh * sh / s; // equals (1-cos)/s without cancellation
    }
    if (with_derivs) {
        if (theta < 1e-2) {
            // Closed forms below lose precision once theta^3 terms cancel.
            c.da = -1.0 / 6.0 + s / 60.0 - s * s / 1680.0 + s * s * s / 90720.0;
            c.db = -1.0 / 24.0 + s / 360.0 - s * s / 13440.0 + s * s * s / 907200.0;
        } else {
            const double st = std::sin(theta);
            const double ct = std::cos(theta);
            const double half = 0.5 * theta;
            const double sh = std::sin(half);
            c.da = (theta * ct - st) / (2.0 * s * theta);
            c.db = (theta * st - 4.0 * sh * sh) / (2.0 * s * s);
        }
    }
    return c;
}

json load_json_file(const std::string& path, const char* kind) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(std::string(kind) + ": cannot open '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string(kind) + ": invalid JSON in '" + path + "': " + e.what());
    }
    return j;
}

void dump_json_file(const json& j, const std::string& path, const char* kind) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError(std::string(kind) + ": cannot write '" + path + "'");
    }
    out << j.dump(2) << '\n';
}

double require_number(const json& j, const char* field, const char* kind) {
    if (!j.contains(field) || !j[field].is_number()) {
        throw ParseError(std::string(kind) + ": missing or non-numeric field '" + field + "'");
    }
    return j[field].get<double>();
}

} // namespace

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw std::invalid_argument("camera: focal lengths must be positive and finite");
    }
    for (size_t t = 0; t < extrinsics.size(); ++t) {
        if (!is_rotation(extrinsics[t].R)) {
            throw std::invalid_argument("camera: extrinsic R at frame " + std::to_string(t) +
                                        " is not a rotation");
        }
        if (!extrinsics[t].t.allFinite()) {
            throw std::invalid_argument("camera: extrinsic t at frame " + std::to_string(t) +
                                        " is not finite");
        }
    }
}

bool is_rotation(const Mat3& R, double tol) {
    if (!R.allFinite()) return false;
    const Mat3 err = R.transpose() * R - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 axis_angle_to_matrix(const AxisAngle& aa) {
    if (!aa.allFinite()) {
        throw std::invalid_argument("axis_angle_to_matrix: non-finite input");
    }
    const double s = aa.squaredNorm();
    const RotCoeffs c = rot_coeffs(s, false);
    // [v]x^2 == v v^T - s I lets us skip forming the skew square.
    return (1.0 - c.b * s) * Mat3::Identity() + c.b * (aa * aa.transpose()) + c.a * skew(aa);
}

void axis_angle_to_matrix_jacobian(const AxisAngle& aa, Mat3& rot, std::array<Mat3, 3>& d_rot) {
    if (!aa.allFinite()) {
        throw std::invalid_argument("axis_angle_to_matrix_jacobian: non-finite input");
    }
    const double s = aa.squaredNorm();
    const RotCoeffs c = rot_coeffs(s, true);
    const Mat3 K = skew(aa);
    const Mat3 K2 = aa * aa.transpose() - s * Mat3::Identity();
    rot = Mat3::Identity() + c.a * K + c.b * K2;
    for (int i = 0; i < 3; ++i) {
        const Vec3 e = Vec3::Unit(i);
        const double vi = aa[i];
        d_rot[i] = (2.0 * vi * c.da) * K + c.a * skew(e) + (2.0 * vi * c.db) * K2 +
                   c.b * (e * aa.transpose() + aa * e.transpose() - 2.0 * vi * Mat3::Identity());
    }
}

AxisAngle matrix_to_axis_angle(const RotationMatrix& rot) {
    if (!is_rotation(rot)) {
        throw std::invalid_argument("matrix_to_axis_angle: input is not a rotation (tol 1e-6)");
    }
    // sin_vec = sin(theta) * axis; atan2 keeps theta well conditioned everywhere.
    const Vec3 sin_vec(0.5 * (rot(2, 1) - rot(1, 2)),
                       0.5 * (rot(0, 2) - rot(2, 0)),
                       0.5 * (rot(1, 0) - rot(0, 1)));
    const double sin_theta = sin_vec.norm();
    const double cos_theta = 0.5 * (rot.trace() - 1.0);
    const double theta = std::atan2(sin_theta, cos_theta);

    if (theta < kSmallAngle) {
        return sin_vec; // equals theta * axis to within O(theta^3)
    }
    if (cos_theta > -0.999) {
        return (theta / sin_theta) * sin_vec;
    }
    // Near pi the skew part vanishes; recover the axis from the symmetric part.
    const Mat3 sym = 0.5 * (rot + rot.transpose());
    int k = 0;
    sym.diagonal().maxCoeff(&k);
    const double denom = 1.0 - cos_theta;
    Vec3 axis = Vec3::Zero();
    axis[k] = std::sqrt(std::max(0.0, (sym(k, k) - cos_theta) / denom));
    for (int i = 0; i < 3; ++i) {
        if (i != k) axis[i] = sym(k, i) / (denom * axis[k]);
    }
    axis.normalize();
    if (sin_theta < 1e-12) {
        // Exactly pi: both signs are valid, pick a canonical one.
        for (int i = 0; i < 3; ++i) {
            if (std::abs(axis[i]) > 1e-12) {
                if (axis[i] < 0.0) axis = -axis;
                break;
            }
        }
    } else if (axis.dot(sin_vec) < 0.0) {
        axis = -axis;
    }
    return theta * axis;
}

Vec2 project(const Camera& cam, int frame, const Vec3& p_world, int joint) {
    if (frame < 0 || frame >= cam.frames()) {
        throw std::invalid_argument("project: frame " + std::to_string(frame) +
                                    " outside camera extrinsics range");
    }
    const Vec3 q = cam.extrinsics[frame].apply(p_world);
    if (q.z() <= 1e-6) {
        throw BehindCameraError(frame, joint, q.z());
    }
    return {cam.fx * q.x() / q.z() + cam.cx, cam.fy * q.y() / q.z() + cam.cy};
}

Camera load_camera(const std::string& path) {
    const json j = load_json_file(path, "camera");
    Camera cam;
    cam.fx = require_number(j, "fx", "camera");
    cam.fy = require_number(j, "fy", "camera");
    cam.cx = require_number(j, "cx", "camera");
    cam.cy = require_number(j, "cy", "camera");
    if (!j.contains("extrinsics") || !j["extrinsics"].is_array()) {
        throw ParseError("camera: missing or non-array field 'extrinsics'");
    }
    for (const auto& e : j["extrinsics"]) {
        if (!e.contains("R") || !e["R"].is_array() || e["R"].size() != 9) {
            throw ParseError("camera: extrinsics entry field 'R' must be 9 numbers (row-major)");
        }
        if (!e.contains("t") || !e["t"].is_array() || e["t"].size() != 3) {
            throw ParseError("camera: extrinsics entry field 't' must be 3 numbers");
        }
        RigidTransform x;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) x.R(r, c) = e["R"][3 * r + c].get<double>();
            x.t[r] = e["t"][r].get<double>();
        }
        cam.extrinsics.push_back(x);
    }
    try {
        cam.validate();
    } catch (const std::invalid_argument& err) {
        throw ParseError(std::string("camera: ") + err.what());
    }
    return cam;
}

void save_camera(const Camera& cam, const std::string& path) {
    json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["extrinsics"] = json::array();
    for (const auto& x : cam.extrinsics) {
        json e;
        e["R"] = json::array();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) e["R"].push_back(x.R(r, c));
        e["t"] = {x.t[0], x.t[1], x.t[2]};
        j["extrinsics"].push_back(e);
    }
    dump_json_file(j, path, "camera");
}

} // namespace motref
