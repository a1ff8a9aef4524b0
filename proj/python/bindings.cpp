#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "run.hpp"
#include "saferl/config.hpp"
#include "saferl/env.hpp"
#include "saferl/errors.hpp"
#include "saferl/geometry.hpp"
#include "saferl/human_reach.hpp"
#include "saferl/rl.hpp"
#include "saferl/robot_model.hpp"
#include "saferl/shield.hpp"
#include "saferl/trajectory.hpp"

namespace py = pybind11;
using namespace saferl;
using Eigen::VectorXd;

namespace {

py::dict metrics_dict(const EpochMetrics& m) {
    py::dict d;
    d["epoch"] = m.epoch;
    d["success_rate"] = m.success_rate;
    d["unsafe_collision_rate"] = m.unsafe_collision_rate;
    d["safe_collision_rate"] = m.safe_collision_rate;
    d["timeout_rate"] = m.timeout_rate;
    d["mean_episode_steps"] = m.mean_episode_steps;
    d["mean_tick_us"] = m.mean_tick_us;
    d["median_tick_us"] = m.median_tick_us;
    d["p99_tick_us"] = m.p99_tick_us;
    return d;
}

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

std::unique_ptr<Policy> builtin_policy(const std::string& agent, const Scenario& s, std::uint64_t seed) {
    if (agent == "random") return std::make_unique<RandomPolicy>(s.robot->dof(), seed);
    if (agent == "scripted") return std::make_unique<ScriptedPolicy>(s.robot, s.dq_max);
    throw ConfigError("agent must be 'random' or 'scripted'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Shielded reinforcement learning for human-robot coexistence";

    static py::exception<Error> base(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InfeasibleStart>(m, "InfeasibleStart", base.ptr());
    py::register_exception<MissingKeypoint>(m, "MissingKeypoint", base.ptr());
    py::register_exception<OutOfJointLimits>(m, "OutOfJointLimits", base.ptr());
    py::register_exception<ClockSkew>(m, "ClockSkew", base.ptr());
    py::register_exception<GoalSamplingExhausted>(m, "GoalSamplingExhausted", base.ptr());
    py::register_exception<ResampleBudgetExhausted>(m, "ResampleBudgetExhausted", base.ptr());
    py::register_exception<EpisodeAlreadyDone>(m, "EpisodeAlreadyDone", base.ptr());
    py::register_exception<EmptyBuffer>(m, "EmptyBuffer", base.ptr());
    py::register_exception<ProtocolViolation>(m, "ProtocolViolation", base.ptr());
    py::register_exception<ProtocolTimeout>(m, "ProtocolTimeout", base.ptr());

    m.def("data_dir", &config::data_dir);

    // geometry
    py::class_<Capsule>(m, "Capsule")
        .def(py::init([](const Vec3& p1, const Vec3& p2, double r) { return Capsule{{p1, p2}, r}; }),
             py::arg("p1"), py::arg("p2"), py::arg("radius"))
        .def_property("p1", [](const Capsule& c) { return c.seg.p1; }, [](Capsule& c, const Vec3& p) { c.seg.p1 = p; })
        .def_property("p2", [](const Capsule& c) { return c.seg.p2; }, [](Capsule& c, const Vec3& p) { c.seg.p2 = p; })
        .def_readwrite("radius", &Capsule::radius)
        .def("__repr__", [](const Capsule& c) {
            std::ostringstream os;
            os << "Capsule(p1=[" << c.seg.p1.transpose() << "], p2=[" << c.seg.p2.transpose()
               << "], radius=" << c.radius << ")";
            return os.str();
        });
    py::class_<Box>(m, "Box")
        .def(py::init([](const Vec3& lo, const Vec3& hi) { return Box{lo, hi}; }), py::arg("lo"), py::arg("hi"))
        .def_readwrite("lo", &Box::lo)
        .def_readwrite("hi", &Box::hi);
    m.def("capsules_intersect", &capsules_intersect);
    m.def("capsule_clearance", &capsule_clearance);
    m.def("enclosing_capsule", &enclosing_capsule);
    m.def("point_in_capsule", &point_in_capsule, py::arg("p"), py::arg("capsule"), py::arg("tol") = 0.0);
    m.def("capsule_box_intersect", &capsule_box_intersect);
    m.def("segment_distance", [](const Vec3& a1, const Vec3& a2, const Vec3& b1, const Vec3& b2) {
        return segment_segment_distance({a1, a2}, {b1, b2});
    });

    // trajectory
    py::class_<LimitSet>(m, "LimitSet")
        .def(py::init([](double v, double a, double j) { return LimitSet{v, a, j}; }), py::arg("v_max"),
             py::arg("a_max"), py::arg("j_max"))
        .def_readwrite("v_max", &LimitSet::v_max)
        .def_readwrite("a_max", &LimitSet::a_max)
        .def_readwrite("j_max", &LimitSet::j_max);
    m.attr("TRAJ_LIMITS") = kTrajLimits;
    m.attr("FAILSAFE_LIMITS") = kFailsafeLimits;
    py::class_<JointState>(m, "JointState")
        .def(py::init([](const VectorXd& q, std::optional<VectorXd> qd, std::optional<VectorXd> qdd) {
                 JointState s = JointState::at_rest(q);
                 if (qd) s.qd = *qd;
                 if (qdd) s.qdd = *qdd;
                 return s;
             }),
             py::arg("q"), py::arg("qd") = py::none(), py::arg("qdd") = py::none())
        .def_readwrite("q", &JointState::q)
        .def_readwrite("qd", &JointState::qd)
        .def_readwrite("qdd", &JointState::qdd)
        .def("is_at_rest", &JointState::is_at_rest);
    py::class_<Trajectory, std::shared_ptr<Trajectory>>(m, "Trajectory")
        .def_property_readonly("start_time", &Trajectory::start_time)
        .def_property_readonly("duration", &Trajectory::duration)
        .def_property_readonly("end_time", &Trajectory::end_time)
        .def_property_readonly("goal", &Trajectory::goal)
        .def("sample", &Trajectory::sample);
    m.def("plan_intended",
          [](const JointState& start, const VectorXd& goal, const LimitSet& limits, double t0) {
              return std::make_shared<Trajectory>(plan_intended(start, goal, limits, t0));
          },
          py::arg("start"), py::arg("goal"), py::arg("limits") = kTrajLimits, py::arg("start_time") = 0.0);
    m.def("plan_failsafe",
          [](const std::shared_ptr<Trajectory>& intended, double t, const LimitSet& limits) {
              return std::make_shared<Trajectory>(plan_failsafe(intended, intended->path_state_at(t), limits));
          },
          py::arg("intended"), py::arg("t"), py::arg("limits") = kFailsafeLimits,
          "Stop along the intended path starting from its state at time t.");
    m.def("stopping_horizon",
          [](const std::shared_ptr<Trajectory>& intended, double t, const LimitSet& limits, double dt) {
              return stopping_horizon(intended, intended->path_state_at(t), limits, dt);
          },
          py::arg("intended"), py::arg("t"), py::arg("limits") = kFailsafeLimits, py::arg("dt") = 0.004);

    // robot
    py::class_<KinematicChain, std::shared_ptr<KinematicChain>>(m, "KinematicChain")
        .def_static("load", [](const std::string& name_or_path) {
            return std::make_shared<KinematicChain>(KinematicChain::load(config::find_bundled("robots", name_or_path)));
        })
        .def_property_readonly("name", &KinematicChain::name)
        .def_property_readonly("dof", &KinematicChain::dof)
        .def_property_readonly("lower_limits", &KinematicChain::lower_limits)
        .def_property_readonly("upper_limits", &KinematicChain::upper_limits);
    m.def("end_effector", [](const KinematicChain& c, const VectorXd& q) { return forward_kinematics(c, q).end_effector; });
    m.def("link_capsules", &link_capsules);
    m.def("swept_occupancy",
          [](const KinematicChain& c, const Trajectory& t, double t0, double t1, double h) {
              return swept_occupancy(c, t, t0, t1, h).capsules;
          },
          py::arg("robot"), py::arg("trajectory"), py::arg("t0"), py::arg("t1"), py::arg("substep") = 0.004);

    // human
    py::class_<HumanModel, std::shared_ptr<HumanModel>>(m, "HumanModel")
        .def_static("default", [] { return std::make_shared<HumanModel>(HumanModel::default_model()); })
        .def_static("load", [](const std::string& p) { return std::make_shared<HumanModel>(HumanModel::load(p)); })
        .def_property_readonly("keypoints", &HumanModel::keypoints);
    m.def("reachable_occupancy",
          [](const HumanModel& model, const std::map<std::string, Vec3>& keypoints, double horizon,
             double eps_meas, double v_h_max) {
              HumanMeasurement meas{0.0, keypoints, eps_meas};
              return reachable_occupancy(model, meas, horizon, ReachParams{v_h_max}).capsules;
          },
          py::arg("model"), py::arg("keypoints"), py::arg("horizon"), py::arg("eps_meas") = 0.005,
          py::arg("v_h_max") = 2.0);

    // shield
    py::enum_<ShieldMode>(m, "ShieldMode")
        .value("FOLLOW_INTENDED", ShieldMode::FollowIntended)
        .value("FOLLOW_FAILSAFE", ShieldMode::FollowFailsafe)
        .value("STOPPED", ShieldMode::Stopped);
    py::class_<Shield>(m, "Shield")
        .def(py::init([](std::shared_ptr<KinematicChain> robot, std::shared_ptr<HumanModel> human,
                         const VectorXd& q, double dt) {
                 ShieldConfig cfg;
                 cfg.dt = dt;
                 return std::make_unique<Shield>(robot, human, cfg, q);
             }),
             py::arg("robot"), py::arg("human"), py::arg("q"), py::arg("dt") = 0.004)
        .def("set_intermediate_goal", &Shield::set_intermediate_goal)
        .def(
            "tick",
            [](Shield& s, double t_k, std::optional<std::map<std::string, Vec3>> keypoints, double stamp) {
                if (!keypoints) return s.tick(t_k, nullptr).desired;
                HumanMeasurement meas{stamp, *keypoints, 0.005};
                return s.tick(t_k, &meas).desired;
            },
            py::arg("t_k"), py::arg("keypoints") = py::none(), py::arg("timestamp") = 0.0,
            "Advance one tick; returns the commanded state at t_k + dt.")
        .def_property_readonly("mode", &Shield::mode)
        .def_property_readonly("state", &Shield::state)
        .def_property_readonly("verified", [](const Shield& s) { return s.diagnostics().verified; })
        .def_property_readonly("compute_us", [](const Shield& s) { return s.diagnostics().compute_us; });

    // env
    py::class_<Scenario>(m, "Scenario")
        .def_static("find", &Scenario::find)
        .def_readwrite("name", &Scenario::name)
        .def_readwrite("start_q", &Scenario::start_q)
        .def_readwrite("t_max_episode", &Scenario::t_max_episode)
        .def_readwrite("step_dt", &Scenario::step_dt)
        .def_readwrite("dt", &Scenario::dt)
        .def_readwrite("eps_g", &Scenario::eps_g)
        .def_readwrite("dq_max", &Scenario::dq_max)
        .def_readwrite("shield", &Scenario::shield)
        .def_property_readonly("dof", [](const Scenario& s) { return s.robot->dof(); })
        .def_property_readonly("has_human", [](const Scenario& s) { return s.human_mode != HumanMode::None; });
    m.def("compute_reward", &compute_reward, py::arg("achieved"), py::arg("goal"), py::arg("eps_g"));
    py::class_<StepResult>(m, "StepResult")
        .def_property_readonly("obs", [](const StepResult& r) { return r.obs.values; })
        .def_readonly("reward", &StepResult::reward)
        .def_readonly("done", &StepResult::done)
        .def_property_readonly("reason", [](const StepResult& r) { return std::string(to_string(r.reason)); })
        .def_readonly("ticks", &StepResult::ticks);
    py::class_<Environment>(m, "Environment")
        .def(py::init<Scenario>())
        .def("reset", [](Environment& e, std::uint64_t seed) { return e.reset(seed).values; }, py::arg("seed"))
        .def("step", &Environment::step, py::arg("action"))
        .def("observe", [](const Environment& e) { return e.observe().values; })
        .def("static_collision", &Environment::static_collision)
        .def_property_readonly("dof", &Environment::dof)
        .def_property_readonly("goal", &Environment::goal)
        .def_property_readonly("q", [](const Environment& e) { return e.robot_state().q; })
        .def_property_readonly("qd", [](const Environment& e) { return e.robot_state().qd; })
        .def_property_readonly("time", &Environment::time)
        .def_property_readonly("done", &Environment::done)
        .def_property_readonly("moving_contact_ticks", [](const Environment& e) { return e.stats().moving_contact_ticks; });

    // rl
    m.def(
        "evaluate",
        [](const Scenario& s, const std::string& agent, int epochs, int episodes, std::uint64_t seed) {
            Environment env(s);
            auto policy = builtin_policy(agent, s, mix_seed(seed, 0x5EED));
            CollectingSink sink;
            const RunSummary summary = evaluate(env, *policy, epochs, episodes, &sink, seed);
            py::list out;
            for (const auto& e : sink.epochs) out.append(metrics_dict(e));
            return py::make_tuple(out, json_to_py(summary.to_json()));
        },
        py::arg("scenario"), py::arg("agent") = "random", py::arg("epochs") = 1, py::arg("episodes") = 10,
        py::arg("seed") = 0, "Run episodes with a built-in agent; returns (per-epoch metrics, summary).");
    m.def(
        "train",
        [](const Scenario& s, const std::string& agent, py::dict overrides, std::uint64_t seed) {
            TrainConfig cfg;
            cfg.t_max_episode = s.t_max_episode;
            for (auto [k, v] : overrides) {
                const std::string key = py::str(k);
                if (key == "k_her") cfg.k_her = v.cast<int>();
                else if (key == "k_start_steps") cfg.k_start_steps = v.cast<std::int64_t>();
                else if (key == "t_update_after") cfg.t_update_after = v.cast<std::int64_t>();
                else if (key == "t_update_every") cfg.t_update_every = v.cast<std::int64_t>();
                else if (key == "n_epochs") cfg.n_epochs = v.cast<int>();
                else if (key == "n_episodes_per_epoch") cfg.n_episodes_per_epoch = v.cast<int>();
                else if (key == "batch_size") cfg.batch_size = v.cast<int>();
                else throw ConfigError("unknown training option " + key);
            }
            Environment env(s);
            auto policy = builtin_policy(agent, s, mix_seed(seed, 0x5EED));
            CollectingSink sink;
            Trainer trainer(cfg, env, *policy, &sink, seed);
            const RunSummary summary = trainer.run();
            py::list out;
            for (const auto& e : sink.epochs) out.append(metrics_dict(e));
            return py::make_tuple(out, json_to_py(summary.to_json()));
        },
        py::arg("scenario"), py::arg("agent") = "random", py::arg("config") = py::dict(), py::arg("seed") = 0);

    // cli
    m.def(
        "run",
        [](const std::string& scenario, const std::string& mode, const std::string& agent, std::uint64_t seed,
           const std::string& out, std::optional<int> epochs, std::optional<int> episodes,
           std::optional<bool> shield, std::optional<int> t_max, const std::string& endpoint) {
            cli::RunSpec spec;
            spec.scenario = scenario;
            spec.mode = cli::parse_mode(mode);
            spec.agent = cli::parse_agent(agent);
            spec.seed = seed;
            spec.out = out;
            spec.epochs = epochs;
            spec.episodes_per_epoch = episodes;
            spec.shield = shield;
            spec.t_max_episode = t_max;
            spec.endpoint = endpoint;
            std::ostringstream log;
            int status;
            {
                py::gil_scoped_release release;
                status = cli::run(spec, log);
            }
            return status;
        },
        py::arg("scenario"), py::arg("mode") = "evaluate", py::arg("agent") = "random", py::arg("seed") = 0,
        py::arg("out") = "runs/latest", py::arg("epochs") = py::none(), py::arg("episodes_per_epoch") = py::none(),
        py::arg("shield") = py::none(), py::arg("t_max_episode") = py::none(),
        py::arg("endpoint") = "tcp://127.0.0.1:5555",
        "Same as the saferl command line tool; returns its exit status.");
}
