#include "saferl/shield.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "saferl/errors.hpp"

namespace saferl {

namespace {

constexpr double kTimeTol = 1e-9;

struct Aabb {
    Vec3 lo;
    Vec3 hi;
};

Aabb bounds(const Capsule& c) {
    const Vec3 r = Vec3::Constant(c.radius);
    return {c.seg.p1.cwiseMin(c.seg.p2) - r, c.seg.p1.cwiseMax(c.seg.p2) + r};
}

bool overlap(const Aabb& a, const Aabb& b) {
    return (a.lo.array() <= b.hi.array()).all() && (b.lo.array() <= a.hi.array()).all();
}

}  // namespace

void ShieldConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("shield: dt must be > 0");
    traj_limits.validate();
    fs_limits.validate();
    reach.validate();
}

const char* to_string(ShieldMode m) {
    switch (m) {
        case ShieldMode::FollowIntended: return "FOLLOW_INTENDED";
        case ShieldMode::FollowFailsafe: return "FOLLOW_FAILSAFE";
        case ShieldMode::Stopped: return "STOPPED";
    }
    return "?";
}

const char* to_string(Branch b) {
    switch (b) {
        case Branch::Intended: return "intended";
        case Branch::Failsafe: return "failsafe";
        case Branch::Hold: return "hold";
    }
    return "?";
}

bool verify(const OccupancySet& robot_occ, const OccupancySet& human_occ) {
    if (human_occ.capsules.empty() || robot_occ.capsules.empty()) return true;
    // Broad phase: one box around all human capsules, then per pair.
    constexpr std::size_t kMaxHuman = 64;
    Aabb human_boxes[kMaxHuman];
    const std::size_t nh = human_occ.capsules.size();
    const bool cache = nh <= kMaxHuman;
    Aabb all = bounds(human_occ.capsules[0]);
    for (std::size_t j = 0; j < nh; ++j) {
        const Aabb b = bounds(human_occ.capsules[j]);
        if (cache) human_boxes[j] = b;
        all.lo = all.lo.cwiseMin(b.lo);
        all.hi = all.hi.cwiseMax(b.hi);
    }
    for (const Capsule& r : robot_occ.capsules) {
        const Aabb rb = bounds(r);
        if (!overlap(rb, all)) continue;
        for (std::size_t j = 0; j < nh; ++j) {
            if (cache && !overlap(rb, human_boxes[j])) continue;
            if (capsules_intersect(r, human_occ.capsules[j])) return false;
        }
    }
    return true;
}

double min_clearance(const std::vector<Capsule>& a, const std::vector<Capsule>& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const Capsule& x : a) {
        for (const Capsule& y : b) best = std::min(best, capsule_clearance(x, y));
    }
    return best;
}

Shield::Shield(std::shared_ptr<const KinematicChain> robot, std::shared_ptr<const HumanModel> human,
               ShieldConfig config, const Eigen::VectorXd& q, double t0)
    : robot_(std::move(robot)), human_(std::move(human)), config_(config), time_(t0) {
    if (!robot_) throw std::invalid_argument("Shield: robot model required");
    config_.validate();
    if (config_.sweep_substep <= 0.0) config_.sweep_substep = config_.dt;
    if (q.size() != robot_->dof() || !robot_->within_limits(q)) {
        throw OutOfJointLimits("Shield: start configuration outside joint limits");
    }
    state_ = JointState::at_rest(q);
    failsafe_ = std::make_shared<const Trajectory>(Trajectory::stationary(t0, q));
    diag_.min_distance = std::numeric_limits<double>::infinity();
}

void Shield::set_intermediate_goal(const Eigen::VectorXd& goal) {
    if (goal.size() != robot_->dof() || !goal.allFinite() || !robot_->within_limits(goal)) {
        throw OutOfJointLimits("intermediate goal outside joint limits");
    }
    pending_ = goal;
}

bool Shield::check_candidate(const std::shared_ptr<const Trajectory>& intended, double t_k,
                             const HumanMeasurement* meas,
                             std::shared_ptr<const Trajectory>& fs_out) {
    const double t_next = t_k + config_.dt;
    fs_out = std::make_shared<const Trajectory>(
        plan_failsafe(intended, intended->path_state_at(t_next), config_.fs_limits));
    const double t_stop = std::max(t_next, fs_out->end_time());
    diag_.stopping_ticks =
        fs_out->duration() > 0.0
            ? static_cast<int>(std::ceil(fs_out->duration() / config_.dt - 1e-9))
            : 0;

    robot_occ_.capsules.clear();
    swept_occupancy_append(*robot_, *intended, t_k, t_next, config_.sweep_substep, robot_occ_,
                           scratch_);
    if (t_stop > t_next) {
        swept_occupancy_append(*robot_, *fs_out, t_next, t_stop, config_.sweep_substep,
                               robot_occ_, scratch_);
    }
    if (!human_ || !meas) {
        human_occ_.capsules.clear();
        return true;
    }
    reachable_occupancy_into(*human_, *meas, t_stop - meas->timestamp, config_.reach, human_occ_);
    return verify(robot_occ_, human_occ_);
}

void Shield::execute_failsafe(double t_next, MotionCommand& cmd) {
    if (t_next >= failsafe_->end_time() - kTimeTol) {
        cmd.desired = JointState::at_rest(failsafe_->goal());
        cmd.executed_branch = state_.is_at_rest() ? Branch::Hold : Branch::Failsafe;
        mode_ = ShieldMode::Stopped;
    } else {
        failsafe_->sample_into(t_next, cmd.desired);
        cmd.executed_branch = Branch::Failsafe;
        mode_ = ShieldMode::FollowFailsafe;
    }
}

MotionCommand Shield::tick(double t_k, const HumanMeasurement* meas) {
    const auto clock_start = std::chrono::steady_clock::now();
    if (t_k < time_ - kTimeTol) throw ClockSkew("shield tick time regressed");
    if (t_k > time_ + kTimeTol) {
        // Gaps are harmless only while the robot is at rest.
        if (mode_ != ShieldMode::Stopped) throw ClockSkew("shield ticks must be spaced by dt");
        failsafe_ = std::make_shared<const Trajectory>(Trajectory::stationary(t_k, state_.q));
    }
    if (meas && meas->timestamp > t_k + kTimeTol) throw ClockSkew("measurement from the future");

    const double t_next = t_k + config_.dt;
    diag_.attempted = false;
    diag_.verified = false;
    diag_.stopping_ticks = 0;

    std::shared_ptr<const Trajectory> candidate;
    if (pending_) {
        try {
            candidate = std::make_shared<const Trajectory>(
                plan_intended(state_, *pending_, config_.traj_limits, t_k));
        } catch (const InfeasibleStart&) {
            // Still braking harder than the intended limits allow; retry later.
        }
    } else if (mode_ == ShieldMode::FollowIntended) {
        candidate = intended_;
    }

    MotionCommand cmd;
    if (candidate) {
        diag_.attempted = true;
        std::shared_ptr<const Trajectory> fs;
        if (check_candidate(candidate, t_k, meas, fs)) {
            if (!failsafe_) throw std::logic_error("shield: no verified failsafe before intended step");
            diag_.verified = true;
            intended_ = std::move(candidate);
            failsafe_ = std::move(fs);
            pending_.reset();
            mode_ = ShieldMode::FollowIntended;
            intended_->sample_into(t_next, cmd.desired);
            cmd.executed_branch = Branch::Intended;
        } else {
            if (!pending_) pending_ = intended_->goal();
            execute_failsafe(t_next, cmd);
        }
    } else {
        execute_failsafe(t_next, cmd);
    }

    state_ = cmd.desired;
    time_ = t_next;

    link_capsules_into(*robot_, state_.q, links_now_);
    if (human_ && meas) {
        bodies_now_ = body_capsules(*human_, meas->keypoints);
        diag_.min_distance = min_clearance(links_now_, bodies_now_);
    } else {
        diag_.min_distance = std::numeric_limits<double>::infinity();
    }
    diag_.mode = mode_;
    diag_.compute_us = std::chrono::duration<double, std::micro>(
                           std::chrono::steady_clock::now() - clock_start)
                           .count();
    return cmd;
}

}  // namespace saferl
