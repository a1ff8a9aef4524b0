#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "saferl/geometry.hpp"
#include "saferl/robot_model.hpp"

namespace saferl {

struct HumanBody {
    std::string name;
    std::string kp1;
    std::string kp2;  // equal to kp1 for a sphere
    double radius{0.0};
};

class HumanModel {
public:
    explicit HumanModel(std::vector<HumanBody> bodies);

    static HumanModel from_json(const nlohmann::json& j);
    static HumanModel load(const std::filesystem::path& path);
    /// Ten bodies: head, torso, upper/lower arms and legs.
    static HumanModel default_model();

    const std::vector<HumanBody>& bodies() const { return bodies_; }
    /// Distinct keypoint names referenced by the bodies, in first-use order.
    const std::vector<std::string>& keypoints() const { return keypoints_; }
    /// Index into keypoints() of each body's two ends.
    const std::vector<std::pair<int, int>>& body_keypoints() const { return body_kp_; }

private:
    std::vector<HumanBody> bodies_;
    std::vector<std::string> keypoints_;
    std::vector<std::pair<int, int>> body_kp_;
};

struct HumanMeasurement {
    double timestamp{0.0};
    std::map<std::string, Vec3> keypoints;
    double eps_meas{0.005};
};

struct ReachParams {
    double v_h_max{2.0};
    void validate() const;
};

/// Everything the human can occupy within `horizon` seconds after the
/// measurement: one capsule per body, inflated by eps_meas + v_h_max * horizon.
OccupancySet reachable_occupancy(const HumanModel& model, const HumanMeasurement& meas,
                                 double horizon, const ReachParams& params = {});

/// Non-allocating variant; overwrites `out`.
void reachable_occupancy_into(const HumanModel& model, const HumanMeasurement& meas,
                              double horizon, const ReachParams& params, OccupancySet& out);

/// Instantaneous body capsules (no inflation).
std::vector<Capsule> body_capsules(const HumanModel& model,
                                   const std::map<std::string, Vec3>& keypoints);

}  // namespace saferl
