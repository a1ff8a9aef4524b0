#include "saferl/human_reach.hpp"

#include <algorithm>
#include <cmath>

#include "saferl/config.hpp"
#include "saferl/errors.hpp"

namespace saferl {

HumanModel::HumanModel(std::vector<HumanBody> bodies) : bodies_(std::move(bodies)) {
    if (bodies_.empty()) throw ConfigError("human model: no bodies");
    auto index_of = [this](const std::string& kp) {
        const auto it = std::find(keypoints_.begin(), keypoints_.end(), kp);
        if (it != keypoints_.end()) return static_cast<int>(it - keypoints_.begin());
        keypoints_.push_back(kp);
        return static_cast<int>(keypoints_.size()) - 1;
    };
    for (const HumanBody& b : bodies_) {
        if (!(b.radius > 0.0)) throw ConfigError("human model: body '" + b.name + "' radius must be > 0");
        if (b.kp1.empty() || b.kp2.empty()) throw ConfigError("human model: empty keypoint name");
        const int a = index_of(b.kp1);
        body_kp_.emplace_back(a, index_of(b.kp2));
    }
}

HumanModel HumanModel::from_json(const nlohmann::json& j) {
    try {
        std::vector<HumanBody> bodies;
        for (const auto& b : j.at("bodies")) {
            bodies.push_back({b.at("name").get<std::string>(), b.at("kp1").get<std::string>(),
                              b.at("kp2").get<std::string>(), b.at("radius").get<double>()});
        }
        return HumanModel(std::move(bodies));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("human model: ") + e.what());
    }
}

HumanModel HumanModel::load(const std::filesystem::path& path) {
    return from_json(config::read_file(path));
}

HumanModel HumanModel::default_model() {
    return HumanModel({
        {"head", "head", "head", 0.12},
        {"torso", "neck", "pelvis", 0.17},
        {"upper_arm_l", "shoulder_l", "elbow_l", 0.06},
        {"lower_arm_l", "elbow_l", "wrist_l", 0.05},
        {"upper_arm_r", "shoulder_r", "elbow_r", 0.06},
        {"lower_arm_r", "elbow_r", "wrist_r", 0.05},
        {"upper_leg_l", "hip_l", "knee_l", 0.08},
        {"lower_leg_l", "knee_l", "ankle_l", 0.06},
        {"upper_leg_r", "hip_r", "knee_r", 0.08},
        {"lower_leg_r", "knee_r", "ankle_r", 0.06},
    });
}

void ReachParams::validate() const {
    if (!(v_h_max > 0.0)) throw ConfigError("reach params: v_h_max must be > 0");
}

namespace {

const Vec3& lookup(const std::map<std::string, Vec3>& kps, const std::string& name) {
    const auto it = kps.find(name);
    if (it == kps.end()) throw MissingKeypoint("measurement lacks keypoint '" + name + "'");
    if (!it->second.allFinite()) throw MissingKeypoint("keypoint '" + name + "' is not finite");
    return it->second;
}

}  // namespace

void reachable_occupancy_into(const HumanModel& model, const HumanMeasurement& meas,
                              double horizon, const ReachParams& params, OccupancySet& out) {
    if (!(horizon >= 0.0)) throw std::invalid_argument("reachable_occupancy: negative horizon");
    if (!(meas.eps_meas >= 0.0)) throw std::invalid_argument("reachable_occupancy: negative eps_meas");
    const double grow = meas.eps_meas + params.v_h_max * horizon;
    const auto& bodies = model.bodies();
    out.capsules.resize(bodies.size());
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        out.capsules[i].seg.p1 = lookup(meas.keypoints, bodies[i].kp1);
        out.capsules[i].seg.p2 = lookup(meas.keypoints, bodies[i].kp2);
        out.capsules[i].radius = bodies[i].radius + grow;
    }
    out.t_begin = meas.timestamp;
    out.t_end = meas.timestamp + horizon;
}

OccupancySet reachable_occupancy(const HumanModel& model, const HumanMeasurement& meas,
                                 double horizon, const ReachParams& params) {
    OccupancySet out;
    reachable_occupancy_into(model, meas, horizon, params, out);
    return out;
}

std::vector<Capsule> body_capsules(const HumanModel& model,
                                   const std::map<std::string, Vec3>& keypoints) {
    std::vector<Capsule> out;
    out.reserve(model.bodies().size());
    for (const HumanBody& b : model.bodies()) {
        out.push_back({{lookup(keypoints, b.kp1), lookup(keypoints, b.kp2)}, b.radius});
    }
    return out;
}

}  // namespace saferl
