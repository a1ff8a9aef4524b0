#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "json.hpp"
#include "saferl/geometry.hpp"
#include "saferl/trajectory.hpp"

namespace saferl {

struct JointSpec {
    Eigen::Isometry3d origin{Eigen::Isometry3d::Identity()};  // in the parent frame
    Vec3 axis{Vec3::UnitZ()};                                 // unit, in the joint frame
    double lower{-3.14159};
    double upper{3.14159};
};

/// Serial chain of revolute joints. Link i is rigidly attached to joint i's
/// frame; its capsule is given in that frame.
class KinematicChain {
public:
    KinematicChain(std::string name, Eigen::Isometry3d mount, std::vector<JointSpec> joints,
                   std::vector<Capsule> links, Vec3 tool, double joint_speed_max);

    static KinematicChain from_json(const nlohmann::json& j);
    static KinematicChain load(const std::filesystem::path& path);

    const std::string& name() const { return name_; }
    int dof() const { return static_cast<int>(joints_.size()); }
    const std::vector<JointSpec>& joints() const { return joints_; }
    const std::vector<Capsule>& link_capsules_local() const { return links_; }
    const Eigen::Isometry3d& mount() const { return mount_; }
    const Vec3& tool() const { return tool_; }
    double joint_speed_max() const { return joint_speed_max_; }

    Eigen::VectorXd lower_limits() const;
    Eigen::VectorXd upper_limits() const;
    bool within_limits(const Eigen::VectorXd& q, double tol = 0.0) const;
    Eigen::VectorXd clamp_to_limits(const Eigen::VectorXd& q) const;

    /// Upper bound on the Cartesian speed of any point of link i's axis when
    /// every joint moves at most joint_speed_max. Config independent.
    const std::vector<double>& link_speed_bounds() const { return link_speed_; }

    KinematicChain with_mount(const Eigen::Isometry3d& mount) const;

private:
    std::string name_;
    Eigen::Isometry3d mount_;
    std::vector<JointSpec> joints_;
    std::vector<Capsule> links_;
    Vec3 tool_;
    double joint_speed_max_;
    std::vector<double> link_speed_;
};

struct FkResult {
    std::vector<Eigen::Isometry3d> link_poses;  // world pose of each joint frame
    Vec3 end_effector{Vec3::Zero()};
};

FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

std::vector<Capsule> link_capsules(const KinematicChain& chain, const Eigen::VectorXd& q);

/// Same as link_capsules, reusing `out`'s storage. Also returns the end-effector.
Vec3 link_capsules_into(const KinematicChain& chain, const Eigen::VectorXd& q,
                        std::vector<Capsule>& out);

struct OccupancySet {
    std::vector<Capsule> capsules;
    double t_begin{0.0};
    double t_end{0.0};
};

/// Capsules enclosing every link over [t0, t1] of `traj`: per substep
/// interval, the enclosure of the link at both interval ends padded by
/// v_link * h / 4 + 1e-6. Ordered by (link, interval).
OccupancySet swept_occupancy(const KinematicChain& chain, const Trajectory& traj, double t0,
                             double t1, double substep);

/// Appends to `out.capsules` and widens its time range. Scratch buffers are
/// kept in `scratch` so repeated calls do not allocate.
struct SweepScratch {
    std::vector<std::vector<Capsule>> frames;
    Eigen::VectorXd q;
};
void swept_occupancy_append(const KinematicChain& chain, const Trajectory& traj, double t0,
                            double t1, double substep, OccupancySet& out, SweepScratch& scratch);

/// Padding added to a swept interval of length h for link `link`.
double sweep_padding(const KinematicChain& chain, int link, double h);

}  // namespace saferl
