#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "saferl/geometry.hpp"

namespace saferl {

using Keypoints = std::map<std::string, Vec3>;

/// Keypoint trajectories sampled at increasing times, played back with
/// linear interpolation and held at the first/last frame outside the clip.
class HumanMotion {
public:
    HumanMotion(std::vector<std::string> names, std::vector<double> times,
                std::vector<std::vector<Vec3>> frames);

    /// CSV with header `time,<kp>_x,<kp>_y,<kp>_z,...`.
    static HumanMotion load_csv(const std::filesystem::path& path);

    const std::vector<std::string>& names() const { return names_; }
    double duration() const { return times_.back() - times_.front(); }
    std::size_t frame_count() const { return times_.size(); }

    /// Largest finite-difference keypoint speed over consecutive frames.
    double max_speed() const;
    /// ConfigError if max_speed() exceeds `v_max` or a name in `required` is absent.
    void validate(double v_max, const std::vector<std::string>& required) const;

    /// Pose at clip time t (relative to the first frame), shifted by `offset`.
    void sample_into(double t, const Vec3& offset, Keypoints& out) const;

private:
    std::vector<std::string> names_;
    std::vector<double> times_;
    std::vector<std::vector<Vec3>> frames_;  // [frame][keypoint]
};

/// Upright person with feet centred at (x, y, 0), facing `heading`; the arms
/// reach forward by `reach` in [0, 1]. Uses the default model's keypoint names.
Keypoints standing_pose(double x, double y, double heading, double reach);

}  // namespace saferl
