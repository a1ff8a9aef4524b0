#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

namespace saferl {

/// Kinematic bounds for one planning pass. Every field strictly positive.
struct LimitSet {
    double v_max{2.0};
    double a_max{2.0};
    double j_max{15.0};

    void validate() const;
};

/// Intended-motion bounds from the hyperparameter table.
inline constexpr LimitSet kTrajLimits{2.0, 2.0, 15.0};
/// Braking bounds. v_max is unused by the failsafe planner; the path scaling
/// never exceeds the intended velocity.
inline constexpr LimitSet kFailsafeLimits{2.0, 10.0, 400.0};

struct JointState {
    Eigen::VectorXd q;
    Eigen::VectorXd qd;
    Eigen::VectorXd qdd;

    static JointState at_rest(const Eigen::VectorXd& q);
    Eigen::Index dof() const { return q.size(); }
    bool is_at_rest() const;
};

/// One constant-jerk piece. p/v/a are the state at the start of the piece.
struct JerkSegment {
    double duration{0.0};
    double jerk{0.0};
    double p{0.0};
    double v{0.0};
    double a{0.0};
};

struct ScalarState {
    double p{0.0};
    double v{0.0};
    double a{0.0};
};

/// Piecewise-constant-jerk motion of one scalar coordinate.
class Profile1D {
public:
    Profile1D() = default;
    explicit Profile1D(ScalarState initial) : initial_(initial) {}

    /// Append a piece; its initial state is integrated from the previous one.
    void append(double duration, double jerk);

    const std::vector<JerkSegment>& segments() const { return segments_; }
    double duration() const { return duration_; }
    ScalarState initial() const { return initial_; }
    ScalarState final_state() const;

    /// Exact polynomial evaluation at local time t (clamped to [0, duration]).
    ScalarState at(double t) const;

    /// Largest |v| over local times [from, duration].
    double peak_speed_after(double from) const;

    /// Drop everything after local time t; the piece containing t is shortened.
    void truncate(double t);

private:
    ScalarState initial_{};
    std::vector<JerkSegment> segments_;
    double duration_{0.0};
};

/// Path parameter view of an intended trajectory: s = elapsed / duration.
struct PathState {
    double s{0.0};
    double sd{0.0};
    double sdd{0.0};
};

/// Time-parameterised joint-space motion. Either a polynomial trajectory
/// (per-joint constant-jerk pieces) or a path-scaled replay of a polynomial
/// reference, which is how failsafe stops are represented.
class Trajectory {
public:
    /// Rest trajectory of zero duration at q.
    static Trajectory stationary(double start_time, const Eigen::VectorXd& q);

    static Trajectory polynomial(double start_time, Eigen::VectorXd goal,
                                 std::vector<Profile1D> joints);

    /// `timing` is a profile whose position is the reference's local time,
    /// starting at `timing.initial().p`.
    static Trajectory path_scaled(std::shared_ptr<const Trajectory> reference, double start_time,
                                  Profile1D timing);

    double start_time() const { return start_time_; }
    double duration() const { return duration_; }
    double end_time() const { return start_time_ + duration_; }
    const Eigen::VectorXd& goal() const { return goal_; }
    Eigen::Index dof() const { return goal_.size(); }

    bool is_path_scaled() const { return reference_ != nullptr; }
    const std::vector<Profile1D>& joints() const { return joints_; }
    const Profile1D& timing() const { return timing_; }
    const std::shared_ptr<const Trajectory>& reference() const { return reference_; }

    /// Exact evaluation. t before start clamps to the start; t past the end
    /// yields the goal at rest.
    JointState sample(double t) const;
    void sample_into(double t, JointState& out) const;
    void positions_into(double t, Eigen::VectorXd& q) const;

    /// Path state of a polynomial trajectory followed at nominal speed.
    PathState path_state_at(double t) const;
    Eigen::VectorXd position_at_path(double s) const;

    /// Largest joint speed of a polynomial trajectory from local time `from` on.
    double peak_speed_after(double from) const;

    /// Path-scaled trajectories: reference local time reached at time t.
    double reference_time_at(double t) const;

private:
    double start_time_{0.0};
    double duration_{0.0};
    Eigen::VectorXd goal_;
    std::vector<Profile1D> joints_;
    std::shared_ptr<const Trajectory> reference_;
    Profile1D timing_;
};

/// Time-synchronised jerk-limited motion from `start` to rest at `goal`.
/// Throws InfeasibleStart when the start state breaks the limits or would
/// inevitably overshoot the velocity bound.
Trajectory plan_intended(const JointState& start, const Eigen::VectorXd& goal,
                         const LimitSet& limits, double start_time = 0.0);

/// Path-consistent stop: replays `intended` from `at` while decelerating the
/// path speed to zero. Never fails.
Trajectory plan_failsafe(const std::shared_ptr<const Trajectory>& intended, const PathState& at,
                         const LimitSet& fs_limits);

JointState sample(const Trajectory& traj, double t);

/// Ticks of length dt needed to bring the robot to rest from `at`.
int stopping_horizon(const std::shared_ptr<const Trajectory>& traj, const PathState& at,
                     const LimitSet& fs_limits, double dt);

namespace detail {

struct Piece {
    double duration{0.0};
    double jerk{0.0};
};

/// Time-optimal jerk-limited change from (v0, a0) to (v1, 0).
/// At most three pieces; zero-length pieces are omitted.
int velocity_change(double v0, double a0, double v1, double a_max, double j_max, Piece out[3]);

/// Minimal-time single-axis profile to rest at `goal`.
Profile1D plan_axis_min_time(ScalarState start, double goal, const LimitSet& limits);

/// Same boundary conditions, stretched to exactly `duration` (>= min time).
Profile1D plan_axis_with_duration(ScalarState start, double goal, const LimitSet& limits,
                                  double duration);

}  // namespace detail

}  // namespace saferl
