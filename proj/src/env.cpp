#include "saferl/env.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "saferl/config.hpp"
#include "saferl/errors.hpp"

namespace saferl {

namespace {

Range range_or(const nlohmann::json& j, const char* key, Range fallback) {
    if (!j.contains(key)) return fallback;
    const auto& r = j.at(key);
    if (r.is_number()) return {r.get<double>(), r.get<double>()};
    if (!r.is_array() || r.size() != 2) throw ConfigError(std::string(key) + ": expected [lo, hi]");
    return {r[0].get<double>(), r[1].get<double>()};
}

Eigen::VectorXd vector_of(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

bool ordered(const Range& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; }

}  // namespace

// --- scenario -----------------------------------------------------------------

Scenario Scenario::from_json(const nlohmann::json& j, const std::filesystem::path& base_file) {
    Scenario s;
    try {
        s.name = config::get_or<std::string>(j, "name", "scenario");
        s.robot = std::make_shared<const KinematicChain>(KinematicChain::load(
            config::find_bundled("robots", config::get_or<std::string>(j, "robot", "reference_6dof"),
                                 ".json", base_file)));
        const int n = s.robot->dof();
        s.start_q = j.contains("start_q") ? vector_of(j.at("start_q"), "start_q")
                                          : Eigen::VectorXd::Zero(n);

        s.goal_lo = s.robot->lower_limits();
        s.goal_hi = s.robot->upper_limits();
        if (j.contains("goal")) {
            const auto& g = j.at("goal");
            const std::string mode = config::get_or<std::string>(g, "mode", "uniform");
            if (mode == "uniform") {
                s.goal_mode = GoalMode::Uniform;
                if (g.contains("lo")) s.goal_lo = vector_of(g.at("lo"), "goal.lo");
                if (g.contains("hi")) s.goal_hi = vector_of(g.at("hi"), "goal.hi");
            } else if (mode == "fixed") {
                s.goal_mode = GoalMode::Fixed;
                s.goal_value = vector_of(g.at("value"), "goal.value");
                s.goal_jitter = config::get_or<double>(g, "jitter", 0.0);
            } else {
                throw ConfigError("goal.mode must be uniform or fixed");
            }
            s.goal_budget = config::get_or<int>(g, "budget", s.goal_budget);
        }

        if (j.contains("human") && !j.at("human").is_null()) {
            const auto& h = j.at("human");
            s.human_model = std::make_shared<const HumanModel>(HumanModel::load(config::find_bundled(
                "humans", config::get_or<std::string>(h, "model", "default"), ".json", base_file)));
            const std::string mode = config::get_or<std::string>(h, "mode", "playback");
            if (mode == "playback") {
                s.human_mode = HumanMode::Playback;
                s.motion = std::make_shared<const HumanMotion>(HumanMotion::load_csv(config::find_bundled(
                    "motions", h.at("motion").get<std::string>(), ".csv", base_file)));
                s.offset_x = range_or(h, "offset_x", s.offset_x);
                s.offset_y = range_or(h, "offset_y", s.offset_y);
                s.start_delay = range_or(h, "start_delay", s.start_delay);
            } else if (mode == "chaser") {
                s.human_mode = HumanMode::Chaser;
                s.chase_speed = range_or(h, "speed", s.chase_speed);
                s.chase_distance = range_or(h, "distance", s.chase_distance);
                s.chase_reach = range_or(h, "reach", s.chase_reach);
            } else {
                throw ConfigError("human.mode must be playback or chaser");
            }
            s.eps_meas = config::get_or<double>(h, "eps_meas", s.eps_meas);
            s.v_h_max = config::get_or<double>(h, "v_h_max", s.v_h_max);
        }

        s.t_max_episode = config::get_or<int>(j, "T_max_episode", s.t_max_episode);
        s.step_dt = config::get_or<double>(j, "step_dt", s.step_dt);
        s.dt = config::get_or<double>(j, "dt", s.dt);
        s.eps_g = config::get_or<double>(j, "eps_g", s.eps_g);
        s.eps_inner = config::get_or<double>(j, "eps_inner", s.eps_inner);
        s.dq_max = config::get_or<double>(j, "dq_max", s.dq_max);
        s.resample_budget = config::get_or<int>(j, "resample_budget", s.resample_budget);
        s.shield = config::get_or<bool>(j, "shield", s.shield);
        if (j.contains("table") && !j.at("table").is_null()) {
            s.table = Box{config::vec3(j.at("table").at("lo"), "table.lo"),
                          config::vec3(j.at("table").at("hi"), "table.hi")};
        }
        s.clearance = config::get_or<double>(j, "clearance", s.clearance);
        s.floor_z = config::get_or<double>(j, "floor_z", s.floor_z);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
    return from_json(config::read_file(path), path);
}

Scenario Scenario::find(const std::string& name_or_path) {
    return load(config::find_bundled("scenarios", name_or_path));
}

void Scenario::validate() const {
    if (!robot) throw ConfigError("scenario: robot missing");
    const Eigen::Index n = robot->dof();
    if (start_q.size() != n || !robot->within_limits(start_q)) {
        throw ConfigError("scenario: start_q must have one entry per joint within limits");
    }
    if (goal_mode == GoalMode::Uniform) {
        if (goal_lo.size() != n || goal_hi.size() != n || (goal_lo.array() > goal_hi.array()).any()) {
            throw ConfigError("scenario: goal bounds malformed");
        }
    } else if (goal_value.size() != n || !robot->within_limits(goal_value) || !(goal_jitter >= 0.0)) {
        throw ConfigError("scenario: fixed goal must be within joint limits with jitter >= 0");
    }
    if (goal_budget < 1 || resample_budget < 1) throw ConfigError("scenario: budgets must be >= 1");
    if (t_max_episode < 1) throw ConfigError("scenario: T_max_episode must be >= 1");
    if (!(dt > 0.0) || !(step_dt >= dt)) throw ConfigError("scenario: need 0 < dt <= step_dt");
    if (!(eps_g > 0.0) || !(eps_inner > 0.0) || !(dq_max > 0.0)) {
        throw ConfigError("scenario: eps_g, eps_inner and dq_max must be > 0");
    }
    if (!(eps_meas >= 0.0) || !(v_h_max > 0.0)) throw ConfigError("scenario: bad human bounds");
    for (const Range* r : {&offset_x, &offset_y, &start_delay, &chase_speed, &chase_distance, &chase_reach}) {
        if (!ordered(*r)) throw ConfigError("scenario: range with lo > hi");
    }
    if (start_delay.lo < 0.0) throw ConfigError("scenario: start_delay must be >= 0");
    if (table && (table->lo.array() > table->hi.array()).any()) {
        throw ConfigError("scenario: table lo must be <= hi");
    }
    if (human_mode != HumanMode::None && !human_model) throw ConfigError("scenario: human model missing");
    if (human_mode == HumanMode::Playback) {
        if (!motion) throw ConfigError("scenario: motion missing");
        std::vector<std::string> needed = human_model->keypoints();
        for (const char* k : {"wrist_l", "wrist_r", "head"}) needed.emplace_back(k);
        motion->validate(v_h_max, needed);
    }
    if (human_mode == HumanMode::Chaser && (chase_speed.lo < 0.0 || chase_speed.hi > v_h_max)) {
        throw ConfigError("scenario: chaser speed must lie in [0, v_h_max]");
    }
    if (dq_max < kTrajLimits.v_max * step_dt - 1e-12) {
        std::cerr << "warning: scenario " << name
                  << ": dq_max < v_max * step_dt; actions cannot use the full speed\n";
    }
}

// --- helpers ----------------------------------------------------------------------

const char* to_string(DoneReason r) {
    switch (r) {
        case DoneReason::Running: return "running";
        case DoneReason::GoalReached: return "goal_reached";
        case DoneReason::UnsafeCollision: return "unsafe_collision";
        case DoneReason::SafeCollision: return "safe_collision";
        case DoneReason::Timeout: return "timeout";
    }
    return "?";
}

Observation Observation::with_goal(const Eigen::VectorXd& g) const {
    Observation o = *this;
    o.values.segment(2 * dof, dof) = g;
    return o;
}

double compute_reward(const Eigen::VectorXd& achieved, const Eigen::VectorXd& goal, double eps_g) {
    if (achieved.size() != goal.size()) throw std::invalid_argument("compute_reward: size mismatch");
    return ((achieved - goal).cwiseAbs().array() < eps_g).all() ? 0.0 : -1.0;
}

// --- environment ------------------------------------------------------------------

Environment::Environment(Scenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
    if (static_collision(scenario_.start_q)) {
        throw ConfigError("scenario: start configuration collides with the static scene");
    }
}

bool Environment::static_collision(const Eigen::VectorXd& q) const {
    const auto caps = link_capsules(*scenario_.robot, q);
    for (const Capsule& c : caps) {
        const double low = std::min(c.seg.p1.z(), c.seg.p2.z()) - c.radius;
        if (low <= scenario_.floor_z + scenario_.clearance) return true;
        if (scenario_.table) {
            Capsule grown = c;
            grown.radius += scenario_.clearance;
            if (capsule_box_intersect(grown, *scenario_.table)) return true;
        }
    }
    return false;
}

Eigen::VectorXd Environment::sample_goal() {
    const KinematicChain& robot = *scenario_.robot;
    const int n = robot.dof();
    for (int attempt = 0; attempt < scenario_.goal_budget; ++attempt) {
        Eigen::VectorXd g(n);
        if (scenario_.goal_mode == GoalMode::Uniform) {
            for (int i = 0; i < n; ++i) g[i] = rng_.uniform(scenario_.goal_lo[i], scenario_.goal_hi[i]);
        } else {
            g = scenario_.goal_value;
            if (scenario_.goal_jitter > 0.0) {
                for (int i = 0; i < n; ++i) g[i] += rng_.uniform(-scenario_.goal_jitter, scenario_.goal_jitter);
            }
            g = robot.clamp_to_limits(g);
        }
        if (!static_collision(g)) return g;
    }
    throw GoalSamplingExhausted("no collision-free episode goal within the sampling budget");
}

Eigen::VectorXd Environment::action_to_goal(const Eigen::VectorXd& q, const Eigen::VectorXd& action) {
    const KinematicChain& robot = *scenario_.robot;
    Eigen::VectorXd goal = robot.clamp_to_limits(q + action * scenario_.dq_max);
    if (!static_collision(goal)) return goal;
    Eigen::VectorXd a(robot.dof());
    for (int attempt = 0; attempt < scenario_.resample_budget; ++attempt) {
        ++stats_.resampled_actions;
        for (int i = 0; i < robot.dof(); ++i) a[i] = rng_.uniform(-1.0, 1.0);
        goal = robot.clamp_to_limits(q + a * scenario_.dq_max);
        if (!static_collision(goal)) return goal;
    }
    throw ResampleBudgetExhausted("no collision-free intermediate goal within the resampling budget");
}

void Environment::update_human(double t) {
    switch (scenario_.human_mode) {
        case HumanMode::None:
            break;
        case HumanMode::Playback:
            scenario_.motion->sample_into(t - human_delay_, human_offset_, human_now_);
            break;
        case HumanMode::Chaser: {
            if (t > 0.0) {
                // Rigid translation toward the end effector, never faster than chase_speed_.
                const Vec3 ee = forward_kinematics(*scenario_.robot, state_.q).end_effector;
                Vec3 d = ee - chase_center_;
                d.z() = 0.0;
                const double dist = d.norm();
                if (dist > 0.05) chase_center_ += d / dist * std::min(chase_speed_ * scenario_.dt, dist - 0.05);
            }
            human_now_ = standing_pose(chase_center_.x(), chase_center_.y(), chase_heading_, chase_reach_);
            break;
        }
    }
}

Observation Environment::reset(std::uint64_t seed) {
    rng_.seed(seed);
    state_ = JointState::at_rest(scenario_.start_q);
    tick_ = 0;
    done_ = false;
    contact_reason_ = DoneReason::Running;
    stats_ = EpisodeStats{};
    human_now_.clear();

    if (scenario_.human_mode == HumanMode::Playback) {
        human_offset_ = Vec3(scenario_.offset_x.draw(rng_), scenario_.offset_y.draw(rng_), 0.0);
        human_delay_ = scenario_.start_delay.draw(rng_);
    } else if (scenario_.human_mode == HumanMode::Chaser) {
        const double heading = rng_.uniform(-M_PI, M_PI);
        const double dist = scenario_.chase_distance.draw(rng_);
        chase_center_ = Vec3(dist * std::cos(heading), dist * std::sin(heading), 0.0);
        chase_heading_ = heading + M_PI;
        chase_speed_ = scenario_.chase_speed.draw(rng_);
        chase_reach_ = scenario_.chase_reach.draw(rng_);
    }
    goal_ = sample_goal();
    inter_goal_ = scenario_.start_q;

    ShieldConfig cfg;
    cfg.dt = scenario_.dt;
    cfg.reach.v_h_max = scenario_.v_h_max;
    shield_ = scenario_.shield
                  ? std::make_unique<Shield>(scenario_.robot, scenario_.human_model, cfg, scenario_.start_q, 0.0)
                  : nullptr;
    baseline_ = std::make_shared<const Trajectory>(Trajectory::stationary(0.0, scenario_.start_q));
    update_human(0.0);
    return observe();
}

Observation Environment::observe() const {
    const int n = dof();
    Observation o;
    o.dof = n;
    o.values = Eigen::VectorXd::Zero(Observation::size_for(n));
    o.values.head(n) = state_.q;
    o.values.segment(n, n) = state_.qd;
    if (goal_.size() == n) o.values.segment(2 * n, n) = goal_;
    const Vec3 ee = forward_kinematics(*scenario_.robot, state_.q).end_effector;
    o.values.segment<3>(3 * n) = ee;
    if (human_present() && !human_now_.empty()) {
        int k = 0;
        for (const char* name : {"wrist_l", "wrist_r", "head"}) {
            o.values.segment<3>(3 * n + 3 + 3 * k) = human_now_.at(name) - ee;
            ++k;
        }
    }
    return o;
}

bool Environment::tick_once() {
    const double t = time();
    const double dt = scenario_.dt;
    if (shield_) {
        meas_.timestamp = t;
        meas_.eps_meas = scenario_.eps_meas;
        meas_.keypoints = human_now_;
        const MotionCommand cmd = shield_->tick(t, human_present() ? &meas_ : nullptr);
        state_ = cmd.desired;
        stats_.tick_us.push_back(shield_->diagnostics().compute_us);
    } else {
        baseline_->sample_into(t + dt, state_);
    }
    ++tick_;
    ++stats_.ticks;
    update_human(time());
    if (!human_present()) return false;

    link_capsules_into(*scenario_.robot, state_.q, links_);
    bodies_ = body_capsules(*scenario_.human_model, human_now_);
    const bool moving = (state_.qd.array() != 0.0).any();
    bool contact = false;
    for (const Capsule& a : links_) {
        for (const Capsule& b : bodies_) {
            if (capsules_intersect(a, b)) {
                contact = true;
                break;
            }
        }
        if (contact) break;
    }
    if (moving) stats_.min_moving_distance = std::min(stats_.min_moving_distance, min_clearance(links_, bodies_));
    if (contact) {
        if (moving) {
            ++stats_.moving_contact_ticks;
            contact_reason_ = DoneReason::UnsafeCollision;
        } else {
            contact_reason_ = DoneReason::SafeCollision;
        }
    }
    return contact;
}

StepResult Environment::step(const Eigen::VectorXd& action) {
    if (done_) throw EpisodeAlreadyDone("step called on a finished episode; call reset");
    const int n = dof();
    if (action.size() != n) throw std::invalid_argument("step: action has wrong length");
    Eigen::VectorXd a = action;
    bool clamped = false;
    for (int i = 0; i < n; ++i) {
        const double v = std::isfinite(a[i]) ? std::clamp(a[i], -1.0, 1.0) : 0.0;
        clamped = clamped || v != a[i];
        a[i] = v;
    }
    if (clamped) ++stats_.clamped_actions;

    inter_goal_ = action_to_goal(state_.q, a);
    if (shield_) {
        shield_->set_intermediate_goal(inter_goal_);
    } else {
        try {
            baseline_ = std::make_shared<const Trajectory>(
                plan_intended(state_, inter_goal_, kTrajLimits, time()));
        } catch (const InfeasibleStart&) {
            // Keep following the previous plan.
        }
    }

    const int max_ticks = std::max(1, static_cast<int>(std::ceil(scenario_.step_dt / scenario_.dt - 1e-9)));
    StepResult r;
    bool contact = false;
    for (int k = 0; k < max_ticks; ++k) {
        contact = tick_once();
        ++r.ticks;
        if (contact) break;
        if (((state_.q - inter_goal_).cwiseAbs().array() < scenario_.eps_inner).all()) break;
    }
    ++stats_.steps;

    const double reward = compute_reward(state_.q, goal_, scenario_.eps_g);
    if (contact && contact_reason_ == DoneReason::UnsafeCollision) {
        r.reason = DoneReason::UnsafeCollision;
    } else if (reward == 0.0) {
        r.reason = DoneReason::GoalReached;
    } else if (contact) {
        r.reason = DoneReason::SafeCollision;
    } else if (stats_.steps >= scenario_.t_max_episode) {
        r.reason = DoneReason::Timeout;
    }
    r.reward = r.reason == DoneReason::GoalReached ? 0.0 : -1.0;
    r.done = r.reason != DoneReason::Running;
    done_ = r.done;
    r.obs = observe();
    return r;
}

}  // namespace saferl
