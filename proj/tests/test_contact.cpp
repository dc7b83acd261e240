#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "motref/contact.hpp"
#include "motref/errors.hpp"
#include "oracles.hpp"

using namespace motref;

namespace {

// Predictions shaped for the toy skeleton with hand-picked velocity norms;
// only joint_map and vel3d matter to the contact pass.
DynamicsPredictions toy_preds(int frames, const std::vector<int>& joint_map) {
    DynamicsPredictions p;
    p.joint_map = joint_map;
    const int k = static_cast<int>(joint_map.size());
    p.keypoints2d.assign(frames, std::vector<Vec2>(k, Vec2::Zero()));
    p.confidence.assign(frames, std::vector<double>(k, 1.0));
    p.vel3d.assign(frames - 1, std::vector<Vec3>(k, Vec3::Zero()));
    p.acc3d.assign(frames - 2, std::vector<Vec3>(k, Vec3::Zero()));
    return p;
}

double bone_length(const std::vector<Vec3>& pos, const Skeleton& skel, int joint) {
    return (pos[joint] - pos[skel.parent[joint]]).norm();
}

} // namespace

TEST_SUITE("contact") {

TEST_CASE("stationary probability ramp") {
    CHECK(stationary_probability(0.0, 0.1) == 1.0);
    CHECK(stationary_probability(0.05, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(stationary_probability(0.1, 0.1) == 0.0);
    CHECK(stationary_probability(3.0, 0.1) == 0.0);
    CHECK(stationary_probability(0.02, 0.2) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK_THROWS_AS(stationary_probability(-0.01, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(stationary_probability(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("contact targets blend toward the next frame by stationarity") {
    const Skeleton skel = make_toy6_skeleton();
    MotionSequence seq = oracle::random_motion(skel, 4, 19);
    const JointPositions world = joints_world(seq, skel);

    // Head (joint 3) rides prediction of the root; foot (joint 5) rides the
    // hip (joint 4). Speeds: 0.05 m/s on the first step, 0 on the second,
    // 0.2 m/s on the third.
    DynamicsPredictions preds = toy_preds(4, {0, 4});
    preds.vel3d[0][1] = Vec3(0.05, 0.0, 0.0);
    preds.vel3d[1][1] = Vec3::Zero();
    preds.vel3d[2][1] = Vec3(0.2, 0.0, 0.0);

    ContactConfig cfg; // xi_v = 0.1
    const ContactTargets targets = contact_targets(world, preds, skel, cfg);
    REQUIRE(targets.effectors == std::vector<int>{3, 5});
    REQUIRE(static_cast<int>(targets.target.size()) == 4);

    // Foot, frame 0: first frame borrows the first step's speed, p = 0.5.
    CHECK(targets.p_s[0][1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK((targets.target[0][1] - (0.5 * world.pos[0][5] + 0.5 * world.pos[1][5])).norm() < 1e-15);
    // Frame 1 uses the step (0,1) as well.
    CHECK(targets.p_s[1][1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK((targets.target[1][1] - (0.5 * world.pos[1][5] + 0.5 * world.pos[2][5])).norm() < 1e-15);
    // Frame 2 uses step (1,2): fully stationary, target is its own position.
    CHECK(targets.p_s[2][1] == 1.0);
    CHECK((targets.target[2][1] - world.pos[2][5]).norm() == 0.0);
    // Last frame has no successor: pinned to itself.
    CHECK(targets.p_s[3][1] == 1.0);
    CHECK((targets.target[3][1] - world.pos[3][5]).norm() == 0.0);

    // The head's driving prediction is all zeros: stationary everywhere.
    for (int t = 0; t < 4; ++t) CHECK(targets.p_s[t][0] == 1.0);

    // A moving foot (p = 0) targets the next frame outright.
    preds.vel3d[0][1] = Vec3(0.0, 0.5, 0.0);
    const ContactTargets moving = contact_targets(world, preds, skel, cfg);
    CHECK(moving.p_s[0][1] == 0.0);
    CHECK((moving.target[0][1] - world.pos[1][5]).norm() == 0.0);
}

TEST_CASE("contact targets require a covering prediction") {
    const Skeleton skel = make_toy6_skeleton();
    const MotionSequence seq = oracle::random_motion(skel, 4, 23);
    const JointPositions world = joints_world(seq, skel);
    // Neck (2) covers the head (3), but nothing covers the foot's chain.
    const DynamicsPredictions preds = toy_preds(4, {2});
    CHECK_THROWS_AS(contact_targets(world, preds, skel, {}), std::invalid_argument);

    // Restricting the effector list to the head makes it fine.
    ContactConfig cfg;
    cfg.end_effectors = {3};
    CHECK_NOTHROW(contact_targets(world, preds, skel, cfg));
}

TEST_CASE("config validation") {
    ContactConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.xi_v = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.ik_iterations = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.ik_damping = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("ik moves effectors toward reachable targets without side effects") {
    const Skeleton skel = make_toy6_skeleton();
    MotionSequence seq = oracle::random_motion(skel, 5, 29);
    const JointPositions before = joints_world(seq, skel);

    // Targets come from a mildly perturbed copy of the pose, so a chain
    // configuration reaching both of them exactly is known to exist. Frame 2
    // keeps its exact positions and must pass through untouched.
    MotionSequence perturbed = seq;
    for (int t = 0; t < 5; ++t) {
        if (t == 2) continue;
        perturbed.theta[t][1] += Vec3(0.04, -0.03, 0.02);
        perturbed.theta[t][2] += Vec3(-0.02, 0.05, 0.01);
        perturbed.theta[t][4] += Vec3(0.03, 0.02, -0.04);
    }
    const JointPositions goal = joints_world(perturbed, skel);

    ContactTargets targets;
    targets.effectors = {3, 5};
    targets.target.resize(5);
    targets.p_s.assign(5, {1.0, 1.0});
    for (int t = 0; t < 5; ++t) {
        targets.target[t] = {goal.pos[t][3], goal.pos[t][5]};
    }

    ContactConfig cfg;
    const IkResult res = ik_refine(seq, skel, targets, cfg);
    REQUIRE(res.report.size() == 10); // 5 frames x 2 effectors

    const JointPositions after = joints_world(res.seq, skel);
    for (const auto& row : res.report) {
        CHECK(row.post_error <= row.pre_error + 1e-12);
        if (row.frame != 2) {
            CHECK(row.pre_error > cfg.ik_step_tolerance);
            CHECK(row.post_error < row.pre_error); // real progress on nudged frames
            CHECK(row.post_error < 5e-3);
        }
    }

    for (int t = 0; t < 5; ++t) {
        // Root parameters never move.
        CHECK((res.seq.root_orient[t] - seq.root_orient[t]).norm() == 0.0);
        CHECK((res.seq.root_trans[t] - seq.root_trans[t]).norm() == 0.0);
        // Bone lengths are exactly preserved (pure rotations).
        for (int j = 1; j < skel.joint_count(); ++j) {
            CHECK(bone_length(after.pos[t], skel, j) ==
                  doctest::Approx(bone_length(before.pos[t], skel, j)).epsilon(1e-12));
        }
    }

    // Frame 2 was within tolerance from the start: bitwise untouched.
    for (int j = 0; j < skel.joint_count(); ++j) {
        CHECK((res.seq.theta[2][j] - seq.theta[2][j]).norm() == 0.0);
    }
    // Effector rotations themselves cannot help and are never altered.
    for (int t = 0; t < 5; ++t) {
        CHECK((res.seq.theta[t][3] - seq.theta[t][3]).norm() == 0.0);
        CHECK((res.seq.theta[t][5] - seq.theta[t][5]).norm() == 0.0);
    }
}

TEST_CASE("ik never worsens an effector even with conflicting targets") {
    const Skeleton skel = make_toy6_skeleton();
    MotionSequence seq = oracle::random_motion(skel, 4, 31);

    const JointPositions world = joints_world(seq, skel);
    ContactTargets targets;
    targets.effectors = {3, 5};
    targets.target.resize(4);
    targets.p_s.assign(4, {0.5, 0.5});
    for (int t = 0; t < 4; ++t) {
        // Pull the head far in one direction and the foot the opposite way;
        // the shared root-side joints cannot satisfy both.
        targets.target[t] = {world.pos[t][3] + Vec3(0.5, 0.5, 0.0),
                             world.pos[t][5] + Vec3(-0.5, -0.5, 0.0)};
    }
    const IkResult res = ik_refine(seq, skel, targets, {});
    for (const auto& row : res.report) {
        CHECK(row.post_error <= row.pre_error + 1e-12);
    }
}

TEST_CASE("contact report csv") {
    oracle::TempDir dir;
    std::vector<IkFrameReport> report;
    report.push_back({0, 10, 0.75, 0.031, 0.0021});
    report.push_back({1, 11, 1.0, 1.0 / 3.0, 0.0});
    const std::string path = dir.file("contact.csv");
    save_contact_report_csv(report, path);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "frame,effector,p_s,pre_error,post_error");
    REQUIRE(std::getline(in, line));
    CHECK(line.substr(0, 5) == "0,10,");
    REQUIRE(std::getline(in, line));
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ','); // frame
    std::getline(ss, cell, ','); // effector
    std::getline(ss, cell, ','); // p_s
    std::getline(ss, cell, ','); // pre_error round trips at full precision
    CHECK(std::stod(cell) == 1.0 / 3.0);
}

} // TEST_SUITE
