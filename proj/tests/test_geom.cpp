#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "motref/errors.hpp"
#include "motref/geom.hpp"
#include "oracles.hpp"

using namespace motref;

TEST_SUITE("geom") {

TEST_CASE("rodrigues matches the general-purpose rotation type") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const AxisAngle v = 3.0 * Vec3(u(rng), u(rng), u(rng));
        const Mat3 rot = axis_angle_to_matrix(v);
        CHECK(is_rotation(rot));
        CHECK((rot - oracle::aa_matrix(v)).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("rodrigues small-angle branch") {
    CHECK(axis_angle_to_matrix(Vec3::Zero()) == Mat3::Identity());
    for (double angle : {1e-12, 1e-9, 1e-8, 9e-8, 2e-7, 1e-5}) {
        const AxisAngle v = angle * Vec3(1.0, 2.0, -2.0).normalized();
        const Mat3 rot = axis_angle_to_matrix(v);
        CHECK(is_rotation(rot, 1e-12));
        CHECK((rot - oracle::aa_matrix(v)).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("log map inverts the exponential over the full angle range") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> ang(1e-6, M_PI - 1e-6);
    for (int i = 0; i < 200; ++i) {
        const Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
        const AxisAngle v = ang(rng) * axis;
        const AxisAngle back = matrix_to_axis_angle(axis_angle_to_matrix(v));
        CHECK((back - v).norm() < 1e-9 * std::max(1.0, v.norm()));
    }
}

TEST_CASE("log map near and at pi") {
    const Vec3 axis = Vec3(0.3, -0.5, 0.81).normalized();
    for (double angle : {M_PI - 1e-3, M_PI - 1e-6, M_PI - 1e-9}) {
        const AxisAngle v = angle * axis;
        const AxisAngle back = matrix_to_axis_angle(axis_angle_to_matrix(v));
        // The rotation must round-trip even if the axis flips sign.
        const Mat3 recon = axis_angle_to_matrix(back);
        CHECK((recon - axis_angle_to_matrix(v)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(back.norm() == doctest::Approx(angle).epsilon(1e-9));
    }

    // Exactly pi: angle is pi and the axis sign is canonical, first nonzero
    // component positive.
    const AxisAngle at_pi = matrix_to_axis_angle(axis_angle_to_matrix(M_PI * axis));
    CHECK(at_pi.norm() == doctest::Approx(M_PI).epsilon(1e-12));
    CHECK(at_pi.x() > 0.0); // canonical sign (the reference axis has x > 0)
    CHECK((axis_angle_to_matrix(at_pi) - axis_angle_to_matrix(M_PI * axis)).cwiseAbs().maxCoeff() <
          1e-9);

    // A pi rotation about -z must come back with positive z.
    const AxisAngle neg_z = matrix_to_axis_angle(axis_angle_to_matrix(Vec3(0, 0, -M_PI)));
    CHECK(neg_z.z() == doctest::Approx(M_PI).epsilon(1e-12));
}

TEST_CASE("log map rejects non-rotations") {
    CHECK_THROWS_AS(matrix_to_axis_angle(2.0 * Mat3::Identity()), std::invalid_argument);
    Mat3 reflection = Mat3::Identity();
    reflection(2, 2) = -1.0;
    CHECK_THROWS_AS(matrix_to_axis_angle(reflection), std::invalid_argument);
}

TEST_CASE("rotation jacobian matches finite differences") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto check_at = [](const AxisAngle& v) {
        Mat3 rot;
        std::array<Mat3, 3> d_rot;
        axis_angle_to_matrix_jacobian(v, rot, d_rot);
        CHECK((rot - axis_angle_to_matrix(v)).cwiseAbs().maxCoeff() < 1e-14);
        const double h = 1e-7;
        for (int c = 0; c < 3; ++c) {
            AxisAngle vp = v, vm = v;
            vp[c] += h;
            vm[c] -= h;
            const Mat3 fd = (axis_angle_to_matrix(vp) - axis_angle_to_matrix(vm)) / (2.0 * h);
            CHECK((d_rot[c] - fd).cwiseAbs().maxCoeff() < 1e-6);
        }
    };
    for (int i = 0; i < 50; ++i) check_at(2.5 * Vec3(u(rng), u(rng), u(rng)));
    // The series region and the zero point, where dR/dv_c = [e_c]_x.
    check_at(Vec3(1e-3, -2e-3, 5e-4));
    check_at(Vec3(1e-5, 0, 0));
    check_at(Vec3::Zero());
}

TEST_CASE("rigid transforms compose and invert") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const RigidTransform a{axis_angle_to_matrix(Vec3(u(rng), u(rng), u(rng))),
                               Vec3(u(rng), u(rng), u(rng))};
        const RigidTransform b{axis_angle_to_matrix(Vec3(u(rng), u(rng), u(rng))),
                               Vec3(u(rng), u(rng), u(rng))};
        const Vec3 p(u(rng), u(rng), u(rng));
        CHECK(((a * b).apply(p) - a.apply(b.apply(p))).norm() < 1e-14);
        CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-14);

        // Against plain 4x4 homogeneous arithmetic.
        Eigen::Matrix4d ha = Eigen::Matrix4d::Identity(), hb = Eigen::Matrix4d::Identity();
        ha.topLeftCorner<3, 3>() = a.R;
        ha.topRightCorner<3, 1>() = a.t;
        hb.topLeftCorner<3, 3>() = b.R;
        hb.topRightCorner<3, 1>() = b.t;
        const Eigen::Vector4d hp = (ha * hb) * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
        CHECK(((a * b).apply(p) - hp.head<3>()).norm() < 1e-13);
    }
}

TEST_CASE("pinhole projection") {
    Camera cam;
    cam.fx = 1000.0;
    cam.fy = 1100.0;
    cam.cx = 500.0;
    cam.cy = 400.0;
    cam.extrinsics.resize(2); // identity world-to-camera
    cam.validate();

    const Vec2 px = project(cam, 0, Vec3(0.1, -0.2, 2.0));
    CHECK(px.x() == doctest::Approx(0.1 / 2.0 * 1000.0 + 500.0));
    CHECK(px.y() == doctest::Approx(-0.2 / 2.0 * 1100.0 + 400.0));

    // A translated extrinsic moves the optical center.
    cam.extrinsics[1].t = Vec3(0.0, 0.0, 3.0);
    const Vec2 px2 = project(cam, 1, Vec3(0.0, 0.0, -1.0));
    CHECK(px2.x() == doctest::Approx(500.0));
    CHECK(px2.y() == doctest::Approx(400.0));

    CHECK_THROWS_AS(project(cam, 0, Vec3(0.0, 0.0, -1.0), 4), BehindCameraError);
    try {
        project(cam, 0, Vec3(0.0, 0.0, 0.0), 4);
        FAIL("expected BehindCameraError");
    } catch (const BehindCameraError& e) {
        CHECK(e.frame() == 0);
        CHECK(e.joint() == 4);
        CHECK(e.depth() == doctest::Approx(0.0));
        CHECK(std::string(e.what()).find("frame 0") != std::string::npos);
    }
    CHECK_THROWS_AS(project(cam, 5, Vec3(0, 0, 1)), std::invalid_argument); // no such frame
}

TEST_CASE("camera validate") {
    Camera cam;
    cam.extrinsics.resize(1);
    CHECK_THROWS_AS(cam.validate(), std::invalid_argument); // fx == 0
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 50.0;
    CHECK_NOTHROW(cam.validate());
    cam.extrinsics[0].R(0, 0) = 3.0;
    CHECK_THROWS_AS(cam.validate(), std::invalid_argument); // not a rotation
}

TEST_CASE("camera file round trip") {
    oracle::TempDir dir;
    Camera cam;
    cam.fx = 1234.5;
    cam.fy = 1200.25;
    cam.cx = 640.0;
    cam.cy = 360.125;
    cam.extrinsics.resize(3);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& e : cam.extrinsics) {
        e.R = axis_angle_to_matrix(Vec3(u(rng), u(rng), u(rng)));
        e.t = Vec3(u(rng), u(rng), u(rng));
    }
    const std::string path = dir.file("cam.json");
    save_camera(cam, path);
    const Camera back = load_camera(path);
    REQUIRE(back.frames() == 3);
    CHECK(back.fx == cam.fx);
    CHECK(back.fy == cam.fy);
    CHECK(back.cx == cam.cx);
    CHECK(back.cy == cam.cy);
    for (int t = 0; t < 3; ++t) {
        CHECK((back.extrinsics[t].R - cam.extrinsics[t].R).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.extrinsics[t].t - cam.extrinsics[t].t).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("camera load failures name the problem") {
    oracle::TempDir dir;
    CHECK_THROWS_AS(load_camera(dir.file("missing.json")), ParseError);
    {
        std::ofstream out(dir.file("broken.json"));
        out << "{\"fx\": 100.0}";
    }
    try {
        load_camera(dir.file("broken.json"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("fy") != std::string::npos);
    }
    {
        std::ofstream out(dir.file("garbage.json"));
        out << "not json at all";
    }
    CHECK_THROWS_AS(load_camera(dir.file("garbage.json")), ParseError);
}

} // TEST_SUITE
