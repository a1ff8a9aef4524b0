#pragma once

#include <memory>
#include <optional>

#include "saferl/human_reach.hpp"
#include "saferl/robot_model.hpp"
#include "saferl/trajectory.hpp"

namespace saferl {

struct ShieldConfig {
    double dt{0.004};
    LimitSet traj_limits{kTrajLimits};
    LimitSet fs_limits{kFailsafeLimits};
    ReachParams reach{};
    /// Sub-interval length for robot sweeps; defaults to dt when <= 0.
    double sweep_substep{0.0};

    void validate() const;
};

enum class ShieldMode { FollowIntended, FollowFailsafe, Stopped };
enum class Branch { Intended, Failsafe, Hold };

const char* to_string(ShieldMode m);
const char* to_string(Branch b);

struct MotionCommand {
    JointState desired;  // state at t_k + dt
    Branch executed_branch{Branch::Hold};
};

struct ShieldDiagnostics {
    ShieldMode mode{ShieldMode::Stopped};
    bool attempted{false};   // an intended step was checked this tick
    bool verified{false};
    int stopping_ticks{0};   // b of the checked candidate
    double min_distance{0.0};  // robot after the tick vs. measured human bodies
    double compute_us{0.0};
};

/// True iff no robot capsule intersects any human capsule.
bool verify(const OccupancySet& robot_occ, const OccupancySet& human_occ);

/// Smallest capsule-capsule clearance between the two sets (+inf if either is empty).
double min_clearance(const std::vector<Capsule>& a, const std::vector<Capsule>& b);

/// Interleaves intended and failsafe motion one tick at a time so that the
/// robot is at rest whenever a human could possibly reach it.
class Shield {
public:
    /// Starts stopped at q, at time t0. `human` may be null for a workspace
    /// without people.
    Shield(std::shared_ptr<const KinematicChain> robot, std::shared_ptr<const HumanModel> human,
           ShieldConfig config, const Eigen::VectorXd& q, double t0 = 0.0);

    /// Throws OutOfJointLimits. Takes effect at the next tick.
    void set_intermediate_goal(const Eigen::VectorXd& goal);

    /// Advance one tick from t_k. `meas` may be null when nobody is present.
    MotionCommand tick(double t_k, const HumanMeasurement* meas);

    ShieldMode mode() const { return mode_; }
    const JointState& state() const { return state_; }
    double time() const { return time_; }
    const std::optional<Eigen::VectorXd>& pending_goal() const { return pending_; }
    const std::shared_ptr<const Trajectory>& intended() const { return intended_; }
    const std::shared_ptr<const Trajectory>& failsafe() const { return failsafe_; }
    const ShieldDiagnostics& diagnostics() const { return diag_; }
    const ShieldConfig& config() const { return config_; }
    const KinematicChain& robot() const { return *robot_; }
    /// Robot occupancy of the last checked candidate.
    const OccupancySet& last_robot_occupancy() const { return robot_occ_; }
    const OccupancySet& last_human_occupancy() const { return human_occ_; }

private:
    bool check_candidate(const std::shared_ptr<const Trajectory>& intended, double t_k,
                         const HumanMeasurement* meas, std::shared_ptr<const Trajectory>& fs_out);
    void execute_failsafe(double t_next, MotionCommand& cmd);

    std::shared_ptr<const KinematicChain> robot_;
    std::shared_ptr<const HumanModel> human_;
    ShieldConfig config_;

    JointState state_;
    double time_;
    ShieldMode mode_{ShieldMode::Stopped};
    std::optional<Eigen::VectorXd> pending_;
    std::shared_ptr<const Trajectory> intended_;
    std::shared_ptr<const Trajectory> failsafe_;
    ShieldDiagnostics diag_;

    OccupancySet robot_occ_;
    OccupancySet human_occ_;
    SweepScratch scratch_;
    std::vector<Capsule> links_now_;
    std::vector<Capsule> bodies_now_;
};

}  // namespace saferl
