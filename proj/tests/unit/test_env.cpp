#include <cmath>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "saferl/config.hpp"
#include "saferl/env.hpp"
#include "saferl/errors.hpp"

using namespace saferl;
using Eigen::VectorXd;

namespace {

Scenario scenario(const char* name) { return Scenario::find(name); }

VectorXd random_action(Rng& rng, int n) {
    VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = rng.uniform(-1.0, 1.0);
    return a;
}

// Sampled static-collision oracle: any sampled capsule point near the box or floor.
bool sampled_static_collision(const Scenario& s, const VectorXd& q, Rng& rng) {
    for (const Capsule& c : link_capsules(*s.robot, q)) {
        for (int k = 0; k < 400; ++k) {
            const Vec3 p = oracle::sample_capsule_point(rng, c, k % 2 == 0);
            if (p.z() <= s.floor_z + s.clearance) return true;
            if (s.table && oracle::point_box_distance(p, *s.table) <= s.clearance) return true;
        }
    }
    return false;
}

std::filesystem::path write_tmp(const std::string& name, const std::string& text) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("compute_reward: strict tolerance") {
    VectorXd g = VectorXd::Constant(3, 0.5);
    CHECK(compute_reward(g, g, 0.05) == 0.0);
    VectorXd off = g;
    off[1] += 0.1;
    CHECK(compute_reward(off, g, 0.05) == -1.0);
    VectorXd edge = VectorXd::Constant(1, 0.25);
    CHECK(compute_reward(edge, VectorXd::Constant(1, 0.0), 0.25) == -1.0);
}

TEST_CASE("action_to_goal: affine map, zero action, clamping") {
    Environment env(scenario("reach_1dof"));
    env.reset(1);
    CHECK(env.action_to_goal(VectorXd::Constant(1, 0.3), VectorXd::Constant(1, -0.5))[0] ==
          doctest::Approx(0.1).epsilon(1e-15));
    CHECK(env.action_to_goal(VectorXd::Constant(1, 0.3), VectorXd::Zero(1))[0] == 0.3);
    const double hi = env.scenario().robot->upper_limits()[0];
    CHECK(env.action_to_goal(VectorXd::Constant(1, hi - 0.1), VectorXd::Constant(1, 1.0))[0] == hi);
}

TEST_CASE("action_to_goal resamples goals inside the table") {
    Environment env(scenario("randomized_goal"));
    env.reset(2);
    // A free pose from which pitching shoulder and elbow forward dips into the table.
    VectorXd a(6);
    a << 0.0, 1.0, 1.0, 0.0, 0.0, 0.0;
    Rng rng(3);
    int found = 0;
    for (int k = 0; k < 20000 && found < 20; ++k) {
        VectorXd q(6);
        q << rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.8), rng.uniform(0.4, 1.6), 0.0, rng.uniform(-1, 1), 0.0;
        const VectorXd naive = env.scenario().robot->clamp_to_limits(q + a * env.scenario().dq_max);
        if (env.static_collision(q) || !env.static_collision(naive)) continue;
        ++found;
        const VectorXd g = env.action_to_goal(q, a);
        CHECK(g != naive);
        CHECK_FALSE(env.static_collision(g));
        CHECK(((g - q).cwiseAbs().array() <= env.scenario().dq_max + 1e-12).all());
        CHECK_FALSE(sampled_static_collision(env.scenario(), g, rng));
    }
    CHECK(found == 20);
    CHECK(env.stats().resampled_actions >= 20);
}

TEST_CASE("static_collision agrees with a sampling oracle") {
    Environment env(scenario("randomized_goal"));
    const Scenario& s = env.scenario();
    CHECK_FALSE(env.static_collision(s.start_q));
    Rng rng(4);
    int positives = 0;
    for (int k = 0; k < 500; ++k) {
        VectorXd q(6);
        for (int i = 0; i < 6; ++i) q[i] = rng.uniform(s.robot->lower_limits()[i], s.robot->upper_limits()[i]);
        const bool exact = env.static_collision(q);
        const bool sampled = sampled_static_collision(s, q, rng);
        // Sampling can only miss contacts, never invent them.
        if (sampled) CHECK(exact);
        positives += exact ? 1 : 0;
    }
    CHECK(positives > 20);
}

TEST_CASE("reset is deterministic and goals avoid the static scene") {
    Environment a(scenario("randomized_goal"));
    Environment b(scenario("randomized_goal"));
    const Observation oa = a.reset(77);
    const Observation ob = b.reset(77);
    CHECK(oa.values == ob.values);
    CHECK(a.goal() == b.goal());
    CHECK(a.human_keypoints() == b.human_keypoints());

    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        a.reset(seed);
        CHECK_FALSE(a.static_collision(a.goal()));
        if (seed % 10 == 0) CHECK_FALSE(sampled_static_collision(a.scenario(), a.goal(), rng));
    }
}

TEST_CASE("fixed goal without jitter is returned verbatim") {
    Scenario s = scenario("human_evasion");
    s.goal_jitter = 0.0;
    Environment env(s);
    env.reset(9);
    CHECK(env.goal() == s.goal_value);
}

TEST_CASE("observation layout and end-effector cross-check") {
    Environment env(scenario("randomized_goal"));
    const Observation o = env.reset(11);
    CHECK(o.values.size() == 30);
    CHECK(o.q() == env.robot_state().q);
    CHECK(o.goal() == env.goal());
    const Vec3 ee = forward_kinematics(*env.scenario().robot, env.robot_state().q).end_effector;
    CHECK(o.end_effector() == ee);
    CHECK(o.relative(0) == env.human_keypoints().at("wrist_l") - ee);
    CHECK(o.relative(1) == env.human_keypoints().at("wrist_r") - ee);
    CHECK(o.relative(2) == env.human_keypoints().at("head") - ee);
    const Observation g = o.with_goal(VectorXd::Constant(6, 0.5));
    CHECK(g.goal() == VectorXd::Constant(6, 0.5));
    CHECK(g.q() == o.q());
}

TEST_CASE("greedy actions reach the goal; stepping afterwards throws") {
    Environment env(scenario("reach_1dof"));
    env.reset(12);
    StepResult r;
    int steps = 0;
    do {
        const VectorXd diff = env.goal() - env.robot_state().q;
        r = env.step((diff / env.scenario().dq_max).cwiseMax(-1.0).cwiseMin(1.0));
        ++steps;
    } while (!r.done);
    CHECK(r.reason == DoneReason::GoalReached);
    CHECK(r.reward == 0.0);
    CHECK(steps < 50);
    CHECK_THROWS_AS(env.step(VectorXd::Zero(1)), EpisodeAlreadyDone);
}

TEST_CASE("timeouts end the episode with reward -1") {
    Scenario s = scenario("reach_1dof");
    s.t_max_episode = 3;
    Environment env(s);
    env.reset(13);
    StepResult r;
    for (int k = 0; k < 3; ++k) {
        CHECK_FALSE(env.done());
        r = env.step(VectorXd::Zero(1));
    }
    if (r.reason != DoneReason::GoalReached) {
        CHECK(r.reason == DoneReason::Timeout);
        CHECK(r.reward == -1.0);
    }
    CHECK(r.done);
}

TEST_CASE("a person walking into the idle robot is a safe collision") {
    Scenario s = scenario("chaser");
    s.t_max_episode = 400;
    Environment env(s);
    int safe = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        env.reset(seed);
        StepResult r;
        do {
            r = env.step(VectorXd::Zero(6));
        } while (!r.done);
        CHECK(r.reason != DoneReason::UnsafeCollision);
        if (r.reason == DoneReason::SafeCollision) {
            ++safe;
            CHECK(r.reward == -1.0);
            CHECK(env.robot_state().qd.isZero(0.0));
        }
    }
    CHECK(safe >= 3);
}

TEST_CASE("shielded random episodes never touch a person while moving") {
    Rng rng(14);
    for (const char* name : {"human_evasion", "chaser", "randomized_goal"}) {
        Environment env(scenario(name));
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            env.reset(seed);
            StepResult r;
            do {
                r = env.step(random_action(rng, 6));
            } while (!r.done);
            CHECK(env.stats().moving_contact_ticks == 0);
            CHECK(r.reason != DoneReason::UnsafeCollision);
            CHECK(env.stats().min_moving_distance > 0.0);
        }
    }
}

TEST_CASE("the unshielded baseline does hit people") {
    Scenario s = scenario("chaser");
    s.shield = false;
    Environment env(s);
    Rng rng(15);
    int unsafe = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        env.reset(seed);
        StepResult r;
        do {
            r = env.step(random_action(rng, 6));
        } while (!r.done);
        unsafe += r.reason == DoneReason::UnsafeCollision ? 1 : 0;
    }
    CHECK(unsafe > 0);
}

TEST_CASE("identical seeds and actions give identical traces") {
    auto run = [](std::uint64_t seed) {
        Environment env(scenario("human_evasion"));
        Rng rng(seed);
        std::vector<double> trace;
        Observation o = env.reset(seed);
        trace.insert(trace.end(), o.values.data(), o.values.data() + o.values.size());
        for (int k = 0; k < 30 && !env.done(); ++k) {
            const StepResult r = env.step(random_action(rng, 6));
            trace.insert(trace.end(), r.obs.values.data(), r.obs.values.data() + r.obs.values.size());
            trace.push_back(r.reward);
        }
        return trace;
    };
    CHECK(run(21) == run(21));
    CHECK(run(21) != run(22));
}

TEST_CASE("motion files: interpolation, clamping, validation") {
    const auto ok = write_tmp("saferl_ok.csv",
                              "time,a_x,a_y,a_z\n0.0,0,0,0\n1.0,1,0,0\n2.0,1,1,0\n");
    const HumanMotion m = HumanMotion::load_csv(ok);
    Keypoints k;
    m.sample_into(0.5, Vec3(0, 0, 1), k);
    CHECK((k.at("a") - Vec3(0.5, 0, 1)).norm() < 1e-15);
    m.sample_into(-3.0, Vec3::Zero(), k);
    CHECK(k.at("a") == Vec3(0, 0, 0));
    m.sample_into(9.0, Vec3::Zero(), k);
    CHECK(k.at("a") == Vec3(1, 1, 0));
    CHECK(m.max_speed() == doctest::Approx(1.0));
    CHECK_NOTHROW(m.validate(2.0, {"a"}));
    CHECK_THROWS_AS(m.validate(2.0, {"b"}), ConfigError);
    CHECK_THROWS_AS(m.validate(0.5, {"a"}), ConfigError);

    CHECK_THROWS_AS(HumanMotion::load_csv(write_tmp("saferl_t.csv", "time,a_x,a_y,a_z\n1,0,0,0\n1,0,0,0\n")),
                    ConfigError);
    CHECK_THROWS_AS(HumanMotion::load_csv(write_tmp("saferl_h.csv", "time,a_x,a_z,a_y\n0,0,0,0\n")),
                    ConfigError);
    CHECK_THROWS_AS(HumanMotion::load_csv(write_tmp("saferl_n.csv", "time,a_x,a_y,a_z\n0,0,zz,0\n")),
                    ConfigError);
}

TEST_CASE("bundled trace respects the human speed bound") {
    const HumanMotion m =
        HumanMotion::load_csv(config::data_dir() / "motions" / "walk_to_table.csv");
    CHECK(m.max_speed() <= 2.0);
    CHECK(m.duration() > 10.0);
}
