#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "saferl/config.hpp"
#include "saferl/errors.hpp"
#include "saferl/human_reach.hpp"

using namespace saferl;

namespace {

std::map<std::string, Vec3> random_pose(Rng& rng, const HumanModel& model) {
    std::map<std::string, Vec3> kps;
    for (const std::string& name : model.keypoints()) kps[name] = oracle::random_vec(rng, -1.0, 1.0);
    return kps;
}

// A keypoint that changes direction and speed at random instants, never
// exceeding `vmax`. Integrated exactly (piecewise constant velocity).
struct Walker {
    Vec3 pos;
    Vec3 vel;
    double next_switch{0.0};
};

void advance(Rng& rng, Walker& w, double t, double h, double vmax) {
    if (t >= w.next_switch) {
        w.vel = oracle::random_unit(rng) * rng.uniform(0.0, vmax);
        w.next_switch = t + rng.uniform(0.0, 0.1);
    }
    w.pos += w.vel * h;
}

}  // namespace

TEST_CASE("radius grows by measurement error and reachable distance") {
    const HumanModel model({{"hand", "w", "w", 0.1}});
    HumanMeasurement m;
    m.keypoints["w"] = Vec3(1, 2, 3);
    m.eps_meas = 0.01;
    const OccupancySet occ = reachable_occupancy(model, m, 0.225);
    REQUIRE(occ.capsules.size() == 1);
    CHECK(occ.capsules[0].radius == doctest::Approx(0.56).epsilon(1e-14));
    CHECK(occ.capsules[0].seg.p1 == Vec3(1, 2, 3));
}

TEST_CASE("zero horizon and zero error reproduce the body capsules") {
    const HumanModel model = HumanModel::default_model();
    Rng rng(41);
    HumanMeasurement m;
    m.keypoints = random_pose(rng, model);
    m.eps_meas = 0.0;
    const OccupancySet occ = reachable_occupancy(model, m, 0.0);
    const auto bodies = body_capsules(model, m.keypoints);
    REQUIRE(occ.capsules.size() == 10);
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        CHECK(occ.capsules[i].seg.p1 == bodies[i].seg.p1);
        CHECK(occ.capsules[i].seg.p2 == bodies[i].seg.p2);
        CHECK(occ.capsules[i].radius == bodies[i].radius);
    }
}

TEST_CASE("missing keypoint and invalid models") {
    const HumanModel model = HumanModel::default_model();
    HumanMeasurement m;
    m.keypoints["head"] = Vec3::Zero();
    CHECK_THROWS_AS(reachable_occupancy(model, m, 0.1), MissingKeypoint);
    CHECK_THROWS_AS(HumanModel({{"x", "a", "b", 0.0}}), ConfigError);
    CHECK_THROWS_AS(HumanModel(std::vector<HumanBody>{}), ConfigError);
}

TEST_CASE("bundled model file matches the built-in default") {
    const HumanModel file = HumanModel::load(config::data_dir() / "humans" / "default.json");
    const HumanModel def = HumanModel::default_model();
    REQUIRE(file.bodies().size() == def.bodies().size());
    for (std::size_t i = 0; i < def.bodies().size(); ++i) {
        CHECK(file.bodies()[i].kp1 == def.bodies()[i].kp1);
        CHECK(file.bodies()[i].kp2 == def.bodies()[i].kp2);
        CHECK(file.bodies()[i].radius == def.bodies()[i].radius);
    }
}

TEST_CASE("longer horizons contain shorter ones") {
    const HumanModel model = HumanModel::default_model();
    Rng rng(42);
    HumanMeasurement m;
    m.keypoints = random_pose(rng, model);
    const OccupancySet a = reachable_occupancy(model, m, 0.1);
    const OccupancySet b = reachable_occupancy(model, m, 0.3);
    for (std::size_t i = 0; i < a.capsules.size(); ++i) {
        for (int k = 0; k < 100; ++k) {
            CHECK(point_in_capsule(oracle::sample_capsule_point(rng, a.capsules[i], k % 2 == 0),
                                   b.capsules[i], 1e-12));
        }
    }
}

TEST_CASE("bounded-velocity motions stay inside the reachable set") {
    const HumanModel model = HumanModel::default_model();
    const ReachParams params;
    Rng rng(43);
    for (int trial = 0; trial < 1000; ++trial) {
        HumanMeasurement m;
        m.keypoints = random_pose(rng, model);
        m.eps_meas = rng.uniform(0.0, 0.02);
        const double horizon = rng.uniform(0.0, 0.4);
        const OccupancySet occ = reachable_occupancy(model, m, horizon, params);

        // True start lies within eps_meas of the measurement.
        std::map<std::string, Walker> walkers;
        for (const auto& [name, p] : m.keypoints) {
            walkers[name].pos = p + oracle::random_unit(rng) * rng.uniform(0.0, m.eps_meas);
        }
        const int steps = 40;
        const double h = horizon / steps;
        for (int s = 0; s <= steps; ++s) {
            std::map<std::string, Vec3> now;
            for (const auto& [name, w] : walkers) now[name] = w.pos;
            const auto bodies = body_capsules(model, now);
            for (std::size_t i = 0; i < bodies.size(); ++i) {
                for (int k = 0; k < 4; ++k) {
                    const Vec3 p = oracle::sample_capsule_point(rng, bodies[i], k % 2 == 0);
                    CHECK(point_in_capsule(p, occ.capsules[i], 1e-9));
                }
            }
            for (auto& [name, w] : walkers) advance(rng, w, s * h, h, params.v_h_max);
        }
    }
}
