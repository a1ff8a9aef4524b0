#include "saferl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "saferl/errors.hpp"

namespace saferl {

namespace {

constexpr double kStartTol = 1e-6;

ScalarState advance(ScalarState s, double t, double jerk) {
    const double t2 = t * t;
    return {s.p + s.v * t + 0.5 * s.a * t2 + jerk * t2 * t / 6.0, s.v + s.a * t + 0.5 * jerk * t2,
            s.a + jerk * t};
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void LimitSet::validate() const {
    if (!(v_max > 0.0) || !(a_max > 0.0) || !(j_max > 0.0)) {
        throw std::invalid_argument("LimitSet: all limits must be strictly positive");
    }
}

JointState JointState::at_rest(const Eigen::VectorXd& q) {
    return {q, Eigen::VectorXd::Zero(q.size()), Eigen::VectorXd::Zero(q.size())};
}

bool JointState::is_at_rest() const {
    return (qd.array() == 0.0).all() && (qdd.array() == 0.0).all();
}

// --- Profile1D ---------------------------------------------------------------

void Profile1D::append(double duration, double jerk) {
    if (!(duration > 0.0)) return;
    const ScalarState start = segments_.empty() ? initial_ : final_state();
    segments_.push_back({duration, jerk, start.p, start.v, start.a});
    duration_ += duration;
}

ScalarState Profile1D::final_state() const {
    if (segments_.empty()) return initial_;
    const JerkSegment& s = segments_.back();
    return advance({s.p, s.v, s.a}, s.duration, s.jerk);
}

ScalarState Profile1D::at(double t) const {
    if (segments_.empty() || t <= 0.0) return initial_;
    double t0 = 0.0;
    for (const JerkSegment& s : segments_) {
        if (t < t0 + s.duration) return advance({s.p, s.v, s.a}, t - t0, s.jerk);
        t0 += s.duration;
    }
    return final_state();
}

double Profile1D::peak_speed_after(double from) const {
    if (from >= duration_) return std::abs(final_state().v);
    double peak = 0.0;
    double t0 = 0.0;
    for (const JerkSegment& s : segments_) {
        const double t1 = t0 + s.duration;
        if (t1 > from) {
            const double u0 = std::max(0.0, from - t0);
            auto speed = [&](double u) { return std::abs(s.v + s.a * u + 0.5 * s.jerk * u * u); };
            peak = std::max({peak, speed(u0), speed(s.duration)});
            if (s.jerk != 0.0) {
                const double u = -s.a / s.jerk;
                if (u > u0 && u < s.duration) peak = std::max(peak, speed(u));
            }
        }
        t0 = t1;
    }
    return peak;
}

void Profile1D::truncate(double t) {
    if (t >= duration_) return;
    std::vector<JerkSegment> kept;
    double t0 = 0.0;
    for (const JerkSegment& s : segments_) {
        if (t0 >= t) break;
        JerkSegment piece = s;
        piece.duration = std::min(s.duration, t - t0);
        if (piece.duration > 0.0) kept.push_back(piece);
        t0 += s.duration;
    }
    segments_ = std::move(kept);
    duration_ = 0.0;
    for (const JerkSegment& s : segments_) duration_ += s.duration;
}

// --- single-axis planning -----------------------------------------------------

namespace detail {

int velocity_change(double v0, double a0, double v1, double a_max, double j_max, Piece out[3]) {
    int n = 0;
    auto push = [&](double d, double j) {
        if (d > 0.0) out[n++] = {d, j};
    };
    // Velocity reached if the acceleration is ramped to zero right away.
    const double v_nat = v0 + a0 * std::abs(a0) / (2.0 * j_max);
    const double dir = sgn(v1 - v_nat);
    if (dir == 0.0) {
        push(std::abs(a0) / j_max, -sgn(a0) * j_max);
        return n;
    }
    // Accelerations already above the bound (within tolerance) are kept.
    const double a_cap = std::max(a_max, dir * a0);
    double peak_sq = dir * j_max * (v1 - v0) + 0.5 * a0 * a0;
    double peak = dir * std::sqrt(std::max(0.0, peak_sq));
    double hold = 0.0;
    if (std::abs(peak) > a_cap) {
        peak = dir * a_cap;
        hold = ((v1 - v0) - (2.0 * peak * peak - a0 * a0) / (2.0 * dir * j_max)) / peak;
        hold = std::max(0.0, hold);
    }
    push((peak - a0) / (dir * j_max), dir * j_max);
    push(hold, 0.0);
    push(std::abs(peak) / j_max, -dir * j_max);
    return n;
}

namespace {

struct AxisCandidate {
    Piece accel[3];
    int n_accel{0};
    Piece brake[3];
    int n_brake{0};
    double t_accel{0.0};
    double t_brake{0.0};
    double distance{0.0};  // displacement without cruise
};

double pieces_duration(const Piece* p, int n) {
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += p[i].duration;
    return t;
}

ScalarState integrate(ScalarState s, const Piece* p, int n) {
    for (int i = 0; i < n; ++i) s = advance(s, p[i].duration, p[i].jerk);
    return s;
}

AxisCandidate evaluate(ScalarState start, double cruise, const LimitSet& lim) {
    AxisCandidate c;
    c.n_accel = velocity_change(start.v, start.a, cruise, lim.a_max, lim.j_max, c.accel);
    c.n_brake = velocity_change(cruise, 0.0, 0.0, lim.a_max, lim.j_max, c.brake);
    c.t_accel = pieces_duration(c.accel, c.n_accel);
    c.t_brake = pieces_duration(c.brake, c.n_brake);
    const ScalarState a = integrate({0.0, start.v, start.a}, c.accel, c.n_accel);
    const ScalarState b = integrate({0.0, cruise, 0.0}, c.brake, c.n_brake);
    c.distance = a.p + b.p;
    return c;
}

Profile1D build(ScalarState start, const AxisCandidate& c, double cruise_time) {
    Profile1D prof(start);
    for (int i = 0; i < c.n_accel; ++i) prof.append(c.accel[i].duration, c.accel[i].jerk);
    prof.append(cruise_time, 0.0);
    for (int i = 0; i < c.n_brake; ++i) prof.append(c.brake[i].duration, c.brake[i].jerk);
    return prof;
}

struct MinTimeSolution {
    double cruise{0.0};
    double cruise_time{0.0};
    AxisCandidate cand;
    double total() const { return cand.t_accel + cruise_time + cand.t_brake; }
};

MinTimeSolution solve_min_time(ScalarState start, double goal, const LimitSet& lim) {
    const double delta = goal - start.p;
    MinTimeSolution sol;
    const AxisCandidate hi = evaluate(start, lim.v_max, lim);
    if (delta >= hi.distance) {
        sol.cruise = lim.v_max;
        sol.cand = hi;
        sol.cruise_time = (delta - hi.distance) / lim.v_max;
        return sol;
    }
    const AxisCandidate lo = evaluate(start, -lim.v_max, lim);
    if (delta <= lo.distance) {
        sol.cruise = -lim.v_max;
        sol.cand = lo;
        sol.cruise_time = (lo.distance - delta) / lim.v_max;
        return sol;
    }
    // The reached distance grows with the cruise velocity; bisect for it.
    double v_lo = -lim.v_max;
    double v_hi = lim.v_max;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (v_lo + v_hi);
        if (mid == v_lo || mid == v_hi) break;
        if (evaluate(start, mid, lim).distance < delta) {
            v_lo = mid;
        } else {
            v_hi = mid;
        }
    }
    const AxisCandidate c_lo = evaluate(start, v_lo, lim);
    const AxisCandidate c_hi = evaluate(start, v_hi, lim);
    const bool pick_lo = std::abs(c_lo.distance - delta) < std::abs(c_hi.distance - delta);
    sol.cruise = pick_lo ? v_lo : v_hi;
    sol.cand = pick_lo ? c_lo : c_hi;
    sol.cruise_time = 0.0;
    return sol;
}

bool trivially_at_goal(ScalarState start, double goal) {
    return start.p == goal && start.v == 0.0 && start.a == 0.0;
}

}  // namespace

Profile1D plan_axis_min_time(ScalarState start, double goal, const LimitSet& lim) {
    if (trivially_at_goal(start, goal)) return Profile1D(start);
    const MinTimeSolution sol = solve_min_time(start, goal, lim);
    return build(start, sol.cand, sol.cruise_time);
}

Profile1D plan_axis_with_duration(ScalarState start, double goal, const LimitSet& lim,
                                  double duration) {
    if (trivially_at_goal(start, goal)) {
        Profile1D prof(start);
        prof.append(duration, 0.0);
        return prof;
    }
    const MinTimeSolution sol = solve_min_time(start, goal, lim);
    const double t_min = sol.total();
    if (duration <= t_min) return build(start, sol.cand, sol.cruise_time);

    const double delta = goal - start.p;
    // Total time when cruising at v; the cruise length absorbs the remaining distance.
    auto total_at = [&](double v, AxisCandidate& c) {
        c = evaluate(start, v, lim);
        const double cruise_time = std::max(0.0, (delta - c.distance) / v);
        return c.t_accel + c.t_brake + cruise_time;
    };

    AxisCandidate c;
    double v_fast = sol.cruise;
    double v_slow = 0.5 * v_fast;
    bool bracketed = false;
    for (int k = 0; k < 2000 && v_slow != 0.0; ++k) {
        if (total_at(v_slow, c) >= duration) {
            bracketed = true;
            break;
        }
        v_fast = v_slow;
        v_slow *= 0.5;
    }
    if (!bracketed) {
        // Only reachable when stopping right away already lands on the goal:
        // brake, then wait at rest.
        const AxisCandidate stop = evaluate(start, 0.0, lim);
        Profile1D prof(start);
        for (int i = 0; i < stop.n_accel; ++i) prof.append(stop.accel[i].duration, stop.accel[i].jerk);
        prof.append(duration - stop.t_accel, 0.0);
        return prof;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (v_fast + v_slow);
        if (mid == v_fast || mid == v_slow) break;
        if (total_at(mid, c) >= duration) {
            v_slow = mid;
        } else {
            v_fast = mid;
        }
    }
    c = evaluate(start, v_slow, lim);
    const double cruise_time = std::max(0.0, duration - c.t_accel - c.t_brake);
    return build(start, c, cruise_time);
}

}  // namespace detail

// --- Trajectory -----------------------------------------------------------------

Trajectory Trajectory::stationary(double start_time, const Eigen::VectorXd& q) {
    std::vector<Profile1D> joints;
    joints.reserve(static_cast<std::size_t>(q.size()));
    for (Eigen::Index i = 0; i < q.size(); ++i) joints.emplace_back(ScalarState{q[i], 0.0, 0.0});
    return polynomial(start_time, q, std::move(joints));
}

Trajectory Trajectory::polynomial(double start_time, Eigen::VectorXd goal,
                                  std::vector<Profile1D> joints) {
    Trajectory t;
    t.start_time_ = start_time;
    t.goal_ = std::move(goal);
    t.joints_ = std::move(joints);
    double d = 0.0;
    for (const Profile1D& p : t.joints_) d = std::max(d, p.duration());
    t.duration_ = d;
    return t;
}

Trajectory Trajectory::path_scaled(std::shared_ptr<const Trajectory> reference, double start_time,
                                   Profile1D timing) {
    if (!reference || reference->is_path_scaled()) {
        throw std::invalid_argument("path_scaled: reference must be a polynomial trajectory");
    }
    Trajectory t;
    t.start_time_ = start_time;
    t.duration_ = timing.duration();
    const double tau_end = std::min(timing.final_state().p, reference->duration());
    t.goal_.resize(reference->dof());
    reference->positions_into(reference->start_time() + tau_end, t.goal_);
    t.reference_ = std::move(reference);
    t.timing_ = std::move(timing);
    return t;
}

void Trajectory::sample_into(double t, JointState& out) const {
    const Eigen::Index n = dof();
    out.q.resize(n);
    out.qd.resize(n);
    out.qdd.resize(n);
    if (t >= end_time()) {
        out.q = goal_;
        out.qd.setZero();
        out.qdd.setZero();
        return;
    }
    const double local = std::max(0.0, t - start_time_);
    if (!reference_) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const ScalarState s = joints_[static_cast<std::size_t>(i)].at(local);
            out.q[i] = s.p;
            out.qd[i] = s.v;
            out.qdd[i] = s.a;
        }
        return;
    }
    const ScalarState timing = timing_.at(local);
    const double tau = std::min(timing.p, reference_->duration());
    reference_->sample_into(reference_->start_time() + tau, out);
    // Chain rule through the time scaling: qd = q' * lambda, qdd = q'' * lambda^2 + q' * lambda'.
    out.qdd = out.qdd * (timing.v * timing.v) + out.qd * timing.a;
    out.qd *= timing.v;
}

JointState Trajectory::sample(double t) const {
    JointState s;
    sample_into(t, s);
    return s;
}

void Trajectory::positions_into(double t, Eigen::VectorXd& q) const {
    const Eigen::Index n = dof();
    q.resize(n);
    if (t >= end_time()) {
        q = goal_;
        return;
    }
    const double local = std::max(0.0, t - start_time_);
    if (!reference_) {
        for (Eigen::Index i = 0; i < n; ++i) q[i] = joints_[static_cast<std::size_t>(i)].at(local).p;
        return;
    }
    const double tau = std::min(timing_.at(local).p, reference_->duration());
    reference_->positions_into(reference_->start_time() + tau, q);
}

PathState Trajectory::path_state_at(double t) const {
    if (reference_) throw std::logic_error("path_state_at: polynomial trajectories only");
    if (duration_ <= 0.0) return {1.0, 0.0, 0.0};
    const double s = std::clamp((t - start_time_) / duration_, 0.0, 1.0);
    return {s, s < 1.0 ? 1.0 / duration_ : 0.0, 0.0};
}

Eigen::VectorXd Trajectory::position_at_path(double s) const {
    Eigen::VectorXd q;
    positions_into(start_time_ + std::clamp(s, 0.0, 1.0) * duration_, q);
    return q;
}

double Trajectory::peak_speed_after(double from) const {
    double peak = 0.0;
    for (const Profile1D& p : joints_) peak = std::max(peak, p.peak_speed_after(from));
    return peak;
}

double Trajectory::reference_time_at(double t) const {
    if (!reference_) return std::clamp(t - start_time_, 0.0, duration_);
    const double local = std::clamp(t - start_time_, 0.0, duration_);
    return std::min(timing_.at(local).p, reference_->duration());
}

// --- planners -------------------------------------------------------------------

Trajectory plan_intended(const JointState& start, const Eigen::VectorXd& goal,
                         const LimitSet& limits, double start_time) {
    limits.validate();
    const Eigen::Index n = start.q.size();
    if (goal.size() != n || start.qd.size() != n || start.qdd.size() != n) {
        throw std::invalid_argument("plan_intended: dimension mismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = start.qd[i];
        const double a = start.qdd[i];
        if (!std::isfinite(start.q[i]) || !std::isfinite(v) || !std::isfinite(a) ||
            !std::isfinite(goal[i])) {
            throw InfeasibleStart("plan_intended: non-finite state or goal");
        }
        const double v_nat = v + a * std::abs(a) / (2.0 * limits.j_max);
        if (std::abs(v) > limits.v_max + kStartTol || std::abs(a) > limits.a_max + kStartTol ||
            std::abs(v_nat) > limits.v_max + kStartTol) {
            throw InfeasibleStart("plan_intended: joint " + std::to_string(i) +
                                  " start state violates limits (qd=" + std::to_string(v) +
                                  ", qdd=" + std::to_string(a) + ")");
        }
    }

    std::vector<double> t_min(static_cast<std::size_t>(n));
    double sync = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const ScalarState s{start.q[i], start.qd[i], start.qdd[i]};
        t_min[static_cast<std::size_t>(i)] =
            detail::plan_axis_min_time(s, goal[i], limits).duration();
        sync = std::max(sync, t_min[static_cast<std::size_t>(i)]);
    }

    std::vector<Profile1D> joints;
    joints.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const ScalarState s{start.q[i], start.qd[i], start.qdd[i]};
        if (sync == 0.0) {
            joints.emplace_back(s);
        } else if (t_min[static_cast<std::size_t>(i)] == sync) {
            joints.push_back(detail::plan_axis_min_time(s, goal[i], limits));
        } else {
            joints.push_back(detail::plan_axis_with_duration(s, goal[i], limits, sync));
        }
    }
    return Trajectory::polynomial(start_time, goal, std::move(joints));
}

Trajectory plan_failsafe(const std::shared_ptr<const Trajectory>& intended, const PathState& at,
                         const LimitSet& fs_limits) {
    if (!intended || intended->is_path_scaled()) {
        throw std::invalid_argument("plan_failsafe: needs a polynomial intended trajectory");
    }
    const double total = intended->duration();
    const double s = std::clamp(at.s, 0.0, 1.0);
    const double tau0 = s * total;
    const double rate = std::max(0.0, at.sd) * total;  // d(tau)/dt, 1 at nominal speed
    const double rate_dot = at.sdd * total;
    const double start_time = intended->start_time() + tau0;

    // Path speeds are expressed as the equivalent speed of the fastest joint on
    // the remaining path so the failsafe limits read as joint limits.
    const double v_ref = intended->peak_speed_after(tau0);
    Profile1D timing(ScalarState{tau0, rate, rate_dot});
    if (total <= 0.0 || v_ref <= 0.0 || s >= 1.0 || (rate == 0.0 && rate_dot == 0.0)) {
        return Trajectory::path_scaled(intended, start_time, Profile1D(ScalarState{tau0, 0.0, 0.0}));
    }
    detail::Piece pieces[3];
    const int n = detail::velocity_change(rate, rate_dot, 0.0, fs_limits.a_max / v_ref,
                                          fs_limits.j_max / v_ref, pieces);
    for (int i = 0; i < n; ++i) timing.append(pieces[i].duration, pieces[i].jerk);

    if (timing.final_state().p > total) {
        // The intended ends at rest before the brake finishes; stop there.
        double lo = 0.0;
        double hi = timing.duration();
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            if (timing.at(mid).p < total) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        timing.truncate(hi);
    }
    return Trajectory::path_scaled(intended, start_time, std::move(timing));
}

JointState sample(const Trajectory& traj, double t) { return traj.sample(t); }

int stopping_horizon(const std::shared_ptr<const Trajectory>& traj, const PathState& at,
                     const LimitSet& fs_limits, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("stopping_horizon: dt must be positive");
    const double d = plan_failsafe(traj, at, fs_limits).duration();
    if (d <= 0.0) return 0;
    // Absorb representation error so that e.g. 0.2 / 0.004 counts as 50 ticks.
    return static_cast<int>(std::ceil(d / dt - 1e-9));
}

}  // namespace saferl
