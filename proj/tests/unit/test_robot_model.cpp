#include <array>
#include <cmath>
#include <memory>

#include "doctest.h"
#include "oracles.hpp"
#include "saferl/config.hpp"
#include "saferl/errors.hpp"
#include "saferl/robot_model.hpp"
#include "trajectory_checks.hpp"

using namespace saferl;
using Eigen::VectorXd;

namespace {

const auto kDir = config::data_dir() / "robots";

// Homogeneous transforms as plain row-major 4x4 arrays, built from the raw
// config numbers without going through the library's pose parsing.
using Mat4 = std::array<double, 16>;

Mat4 identity() {
    Mat4 m{};
    m[0] = m[5] = m[10] = m[15] = 1.0;
    return m;
}

Mat4 mul(const Mat4& a, const Mat4& b) {
    Mat4 r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) r[i * 4 + j] += a[i * 4 + k] * b[k * 4 + j];
    return r;
}

Mat4 rot_axis(double x, double y, double z, double angle) {
    const double n = std::sqrt(x * x + y * y + z * z);
    x /= n;
    y /= n;
    z /= n;
    const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
    Mat4 m = identity();
    m[0] = t * x * x + c;
    m[1] = t * x * y - s * z;
    m[2] = t * x * z + s * y;
    m[4] = t * x * y + s * z;
    m[5] = t * y * y + c;
    m[6] = t * y * z - s * x;
    m[8] = t * x * z - s * y;
    m[9] = t * y * z + s * x;
    m[10] = t * z * z + c;
    return m;
}

Mat4 pose(const nlohmann::json& j) {
    Mat4 m = identity();
    if (j.contains("rpy")) {
        const auto& r = j["rpy"];
        m = mul(rot_axis(0, 0, 1, r[2]), mul(rot_axis(0, 1, 0, r[1]), rot_axis(1, 0, 0, r[0])));
    }
    if (j.contains("xyz")) {
        m[3] = j["xyz"][0];
        m[7] = j["xyz"][1];
        m[11] = j["xyz"][2];
    }
    return m;
}

Vec3 transform_point(const Mat4& m, const Vec3& p) {
    return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
            m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
            m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11]};
}

std::vector<Mat4> oracle_frames(const nlohmann::json& robot, const VectorXd& q) {
    std::vector<Mat4> frames;
    Mat4 f = robot.contains("mount") ? pose(robot["mount"]) : identity();
    for (std::size_t i = 0; i < robot["joints"].size(); ++i) {
        const auto& j = robot["joints"][i];
        f = mul(f, mul(pose(j["origin"]), rot_axis(j["axis"][0], j["axis"][1], j["axis"][2],
                                                   q[static_cast<Eigen::Index>(i)])));
        frames.push_back(f);
    }
    return frames;
}

VectorXd random_q(Rng& rng, const KinematicChain& c) {
    VectorXd q(c.dof());
    for (int i = 0; i < c.dof(); ++i) q[i] = rng.uniform(c.lower_limits()[i], c.upper_limits()[i]);
    return q;
}

}  // namespace

TEST_CASE("home pose composes the fixed origins") {
    const KinematicChain chain = KinematicChain::load(kDir / "reference_6dof.json");
    const FkResult fk = forward_kinematics(chain, VectorXd::Zero(6));
    // Straight up: mount 0.8 plus origins 0.1 + 0.2 + 0.35 + 0.3 + 0.08 + 0.08, tool 0.1.
    CHECK(fk.end_effector.x() == doctest::Approx(0.0));
    CHECK(fk.end_effector.z() == doctest::Approx(0.8 + 1.11 + 0.1));
    for (const auto& pose : fk.link_poses) CHECK(pose.linear().isIdentity(1e-15));
}

TEST_CASE("single revolute quarter turn") {
    const KinematicChain chain = KinematicChain::load(kDir / "test_1dof.json");
    const auto caps = link_capsules(chain, VectorXd::Constant(1, M_PI / 2));
    CHECK((caps[0].seg.p2 - Vec3(0, 1, 0)).norm() < 1e-15);
    CHECK(caps[0].radius == 0.05);
}

TEST_CASE("forward kinematics matches a homogeneous-matrix oracle") {
    const auto raw = config::read_file(kDir / "reference_6dof.json");
    const KinematicChain chain = KinematicChain::from_json(raw);
    Rng rng(31);
    for (int k = 0; k < 500; ++k) {
        const VectorXd q = random_q(rng, chain);
        const FkResult fk = forward_kinematics(chain, q);
        const auto frames = oracle_frames(raw, q);
        const auto caps = link_capsules(chain, q);
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const Vec3 p1 = transform_point(frames[i], config::vec3(raw["links"][i]["capsule"]["p1"], "p1"));
            const Vec3 p2 = transform_point(frames[i], config::vec3(raw["links"][i]["capsule"]["p2"], "p2"));
            CHECK((caps[i].seg.p1 - p1).norm() < 1e-10);
            CHECK((caps[i].seg.p2 - p2).norm() < 1e-10);
            CHECK((fk.link_poses[i].translation() - transform_point(frames[i], Vec3::Zero())).norm() < 1e-10);
        }
        const Vec3 ee = transform_point(frames.back(), Vec3(0, 0, 0.1));
        CHECK((fk.end_effector - ee).norm() < 1e-10);
    }
}

TEST_CASE("rotating the mount rotates every capsule") {
    const KinematicChain chain = KinematicChain::load(kDir / "reference_6dof.json");
    Eigen::Isometry3d extra = Eigen::Isometry3d::Identity();
    extra.linear() = config::rpy_matrix(0.3, -0.2, 1.1);
    extra.translation() = Vec3(0.5, -0.25, 0.1);
    const KinematicChain moved = chain.with_mount(extra * chain.mount());
    Rng rng(32);
    for (int k = 0; k < 50; ++k) {
        const VectorXd q = random_q(rng, chain);
        const auto a = link_capsules(chain, q);
        const auto b = link_capsules(moved, q);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(((extra * a[i].seg.p1) - b[i].seg.p1).norm() < 1e-12);
            CHECK(((extra * a[i].seg.p2) - b[i].seg.p2).norm() < 1e-12);
            CHECK(a[i].radius == b[i].radius);
        }
    }
}

TEST_CASE("config validation") {
    auto raw = config::read_file(kDir / "test_2dof.json");
    auto bad = raw;
    bad["links"].erase(1);
    CHECK_THROWS_AS(KinematicChain::from_json(bad), ConfigError);
    bad = raw;
    bad["joints"][0]["limit"]["min"] = 4.0;
    CHECK_THROWS_AS(KinematicChain::from_json(bad), ConfigError);
    bad = raw;
    bad["joints"] = nlohmann::json::array();
    bad["links"] = nlohmann::json::array();
    CHECK_THROWS_AS(KinematicChain::from_json(bad), ConfigError);
}

TEST_CASE("stationary sweep equals padded instantaneous capsules") {
    const KinematicChain chain = KinematicChain::load(kDir / "reference_6dof.json");
    const VectorXd q = VectorXd::LinSpaced(6, -0.5, 0.5);
    const Trajectory still = Trajectory::stationary(0.0, q);
    const OccupancySet occ = swept_occupancy(chain, still, 1.0, 1.004, 0.004);
    const auto caps = link_capsules(chain, q);
    REQUIRE(occ.capsules.size() == caps.size());
    for (std::size_t i = 0; i < caps.size(); ++i) {
        CHECK(occ.capsules[i].seg.p1 == caps[i].seg.p1);
        CHECK(occ.capsules[i].seg.p2 == caps[i].seg.p2);
        CHECK(occ.capsules[i].radius ==
              doctest::Approx(caps[i].radius + sweep_padding(chain, static_cast<int>(i), 0.004)));
    }
}

TEST_CASE("swept occupancy contains the links at intermediate times") {
    const KinematicChain chain = KinematicChain::load(kDir / "reference_6dof.json");
    Rng rng(33);
    for (int k = 0; k < 100; ++k) {
        const JointState start = check::random_start(rng, 6, kTrajLimits);
        VectorXd goal = start.q;
        for (int i = 0; i < 6; ++i) goal[i] += rng.uniform(-2.0, 2.0);
        auto intended = std::make_shared<const Trajectory>(plan_intended(start, goal, kTrajLimits));
        const double tb = rng.uniform(0.0, intended->duration());
        const Trajectory fs = plan_failsafe(intended, intended->path_state_at(tb), kFailsafeLimits);
        const Trajectory& traj = (k % 2 == 0) ? *intended : fs;
        const double t0 = traj.start_time();
        const double t1 = std::min(traj.end_time(), t0 + 0.3);
        const OccupancySet occ = swept_occupancy(chain, traj, t0, t1, 0.004);
        const int intervals = static_cast<int>(occ.capsules.size()) / 6;
        for (int m = 0; m < 50; ++m) {
            const double t = rng.uniform(t0, t1);
            const auto caps = link_capsules(chain, traj.sample(t).q);
            const int slot = std::min(intervals - 1, static_cast<int>((t - t0) / 0.004));
            for (int l = 0; l < 6; ++l) {
                const Capsule& outer = occ.capsules[static_cast<std::size_t>(l * intervals + slot)];
                const Capsule& inner = caps[static_cast<std::size_t>(l)];
                // Capsules are convex: containing both end balls contains the capsule.
                CHECK(point_segment_distance(inner.seg.p1, outer.seg) + inner.radius <= outer.radius);
                CHECK(point_segment_distance(inner.seg.p2, outer.seg) + inner.radius <= outer.radius);
                const Vec3 p = oracle::sample_capsule_point(rng, inner, true);
                bool inside = false;
                for (const Capsule& c : occ.capsules) inside = inside || point_in_capsule(p, c);
                CHECK(inside);
            }
        }
    }
}

TEST_CASE("sweeps over a longer window include the shorter one") {
    const KinematicChain chain = KinematicChain::load(kDir / "reference_6dof.json");
    Rng rng(34);
    const JointState start = check::random_start(rng, 6, kTrajLimits);
    const Trajectory traj = plan_intended(start, start.q + VectorXd::Constant(6, 1.0), kTrajLimits);
    const double t0 = 0.01;
    const double t1 = t0 + 25 * 0.004;
    const double t2 = t0 + 60 * 0.004;
    const OccupancySet shorter = swept_occupancy(chain, traj, t0, t1, 0.004);
    const OccupancySet longer = swept_occupancy(chain, traj, t0, t2, 0.004);
    for (int l = 0; l < 6; ++l) {
        for (int k = 0; k < 25; ++k) {
            const Capsule& a = shorter.capsules[static_cast<std::size_t>(l * 25 + k)];
            const Capsule& b = longer.capsules[static_cast<std::size_t>(l * 60 + k)];
            CHECK(a.seg.p1 == b.seg.p1);
            CHECK(a.seg.p2 == b.seg.p2);
            CHECK(a.radius == b.radius);
        }
    }
}
