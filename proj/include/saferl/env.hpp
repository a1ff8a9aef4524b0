#pragma once

#include <cstdint>
#include <limits>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "saferl/human_motion.hpp"
#include "saferl/human_reach.hpp"
#include "saferl/random.hpp"
#include "saferl/robot_model.hpp"
#include "saferl/shield.hpp"

namespace saferl {

struct Range {
    double lo{0.0};
    double hi{0.0};
    double draw(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
};

enum class GoalMode { Uniform, Fixed };
enum class HumanMode { None, Playback, Chaser };

struct Scenario {
    std::string name{"scenario"};
    std::shared_ptr<const KinematicChain> robot;
    std::shared_ptr<const HumanModel> human_model;
    Eigen::VectorXd start_q;

    GoalMode goal_mode{GoalMode::Uniform};
    Eigen::VectorXd goal_lo;   // uniform bounds (default: joint limits)
    Eigen::VectorXd goal_hi;
    Eigen::VectorXd goal_value;  // fixed goal
    double goal_jitter{0.0};
    int goal_budget{1000};

    HumanMode human_mode{HumanMode::None};
    std::shared_ptr<const HumanMotion> motion;
    Range offset_x{-0.2, 0.2};
    Range offset_y{-0.2, 0.2};
    Range start_delay{0.0, 1.0};
    Range chase_speed{0.5, 2.0};
    Range chase_distance{1.5, 3.0};
    Range chase_reach{0.0, 1.0};
    double eps_meas{0.005};
    double v_h_max{2.0};

    int t_max_episode{100};
    double step_dt{0.2};  // RL step length
    double dt{0.004};     // shield tick
    double eps_g{0.05};
    double eps_inner{0.01};
    double dq_max{0.4};
    int resample_budget{1000};
    bool shield{true};

    std::optional<Box> table;
    double clearance{0.02};
    double floor_z{0.0};

    static Scenario from_json(const nlohmann::json& j, const std::filesystem::path& base_file = {});
    static Scenario load(const std::filesystem::path& path);
    /// Bundled name (data/scenarios/<name>.json) or a path.
    static Scenario find(const std::string& name_or_path);
    void validate() const;
};

enum class DoneReason { Running, GoalReached, UnsafeCollision, SafeCollision, Timeout };
const char* to_string(DoneReason r);

/// q (N) | qd (N) | goal (N) | end effector (3) | left wrist, right wrist,
/// head relative to the end effector (9). Human entries are zero when no
/// person is present.
struct Observation {
    Eigen::VectorXd values;
    int dof{0};

    static int size_for(int dof) { return 3 * dof + 12; }
    Eigen::VectorXd q() const { return values.head(dof); }
    Eigen::VectorXd qd() const { return values.segment(dof, dof); }
    Eigen::VectorXd goal() const { return values.segment(2 * dof, dof); }
    Vec3 end_effector() const { return values.segment<3>(3 * dof); }
    Vec3 relative(int k) const { return values.segment<3>(3 * dof + 3 + 3 * k); }
    /// Copy with the goal block replaced.
    Observation with_goal(const Eigen::VectorXd& g) const;
};

struct StepResult {
    Observation obs;
    double reward{-1.0};
    bool done{false};
    DoneReason reason{DoneReason::Running};
    int ticks{0};
};

struct EpisodeStats {
    int steps{0};
    int ticks{0};
    int moving_contact_ticks{0};  // contact while any joint moves; must stay 0 with the shield
    int clamped_actions{0};
    int resampled_actions{0};
    double min_moving_distance{std::numeric_limits<double>::infinity()};
    std::vector<double> tick_us;
};

/// 0 iff every component of achieved is strictly within eps_g of goal.
double compute_reward(const Eigen::VectorXd& achieved, const Eigen::VectorXd& goal, double eps_g);

class Environment {
public:
    explicit Environment(Scenario scenario);

    Observation reset(std::uint64_t seed);
    StepResult step(const Eigen::VectorXd& action);
    Observation observe() const;

    bool static_collision(const Eigen::VectorXd& q) const;
    /// q + a * dq_max clamped to the limits; resampled uniformly while in
    /// static collision. Consumes the episode generator.
    Eigen::VectorXd action_to_goal(const Eigen::VectorXd& q, const Eigen::VectorXd& action);

    int dof() const { return scenario_.robot->dof(); }
    const Scenario& scenario() const { return scenario_; }
    const Eigen::VectorXd& goal() const { return goal_; }
    const Eigen::VectorXd& intermediate_goal() const { return inter_goal_; }
    const JointState& robot_state() const { return state_; }
    double time() const { return static_cast<double>(tick_) * scenario_.dt; }
    bool done() const { return done_; }
    bool human_present() const { return scenario_.human_mode != HumanMode::None; }
    const Keypoints& human_keypoints() const { return human_now_; }
    const EpisodeStats& stats() const { return stats_; }
    const Shield* shield() const { return shield_.get(); }
    Rng& rng() { return rng_; }

private:
    void update_human(double t);
    bool tick_once();  // returns true on contact
    Eigen::VectorXd sample_goal();

    Scenario scenario_;
    Rng rng_{0};
    std::unique_ptr<Shield> shield_;
    std::shared_ptr<const Trajectory> baseline_;
    JointState state_;
    Eigen::VectorXd goal_;
    Eigen::VectorXd inter_goal_;
    std::int64_t tick_{0};
    bool done_{true};
    DoneReason contact_reason_{DoneReason::Running};
    EpisodeStats stats_;

    Vec3 human_offset_{Vec3::Zero()};
    double human_delay_{0.0};
    Vec3 chase_center_{Vec3::Zero()};
    double chase_heading_{0.0};
    double chase_speed_{0.0};
    double chase_reach_{0.0};
    Keypoints human_now_;
    HumanMeasurement meas_;
    std::vector<Capsule> links_;
    std::vector<Capsule> bodies_;
};

}  // namespace saferl
