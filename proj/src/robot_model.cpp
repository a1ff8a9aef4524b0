#include "saferl/robot_model.hpp"

#include <algorithm>
#include <cmath>

#include "saferl/config.hpp"
#include "saferl/errors.hpp"

namespace saferl {

KinematicChain::KinematicChain(std::string name, Eigen::Isometry3d mount,
                               std::vector<JointSpec> joints, std::vector<Capsule> links,
                               Vec3 tool, double joint_speed_max)
    : name_(std::move(name)),
      mount_(mount),
      joints_(std::move(joints)),
      links_(std::move(links)),
      tool_(tool),
      joint_speed_max_(joint_speed_max) {
    if (joints_.empty()) throw ConfigError("robot: at least one joint required");
    if (links_.size() != joints_.size()) {
        throw ConfigError("robot: need exactly one link capsule per joint");
    }
    if (!(joint_speed_max_ > 0.0)) throw ConfigError("robot: joint_speed_max must be positive");
    for (const JointSpec& j : joints_) {
        if (std::abs(j.axis.norm() - 1.0) > 1e-9) throw ConfigError("robot: joint axis not unit");
        if (!(j.lower < j.upper)) throw ConfigError("robot: joint limit min >= max");
    }
    for (const Capsule& c : links_) {
        if (!(c.radius >= 0.0)) throw ConfigError("robot: negative link radius");
    }

    // Distance from joint i's axis point to link l's frame origin is at most
    // the summed origin offsets between them.
    const std::size_t n = joints_.size();
    link_speed_.assign(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        const double tip = std::max(links_[l].seg.p1.norm(), links_[l].seg.p2.norm());
        double v = 0.0;
        for (std::size_t i = 0; i <= l; ++i) {
            double reach = tip;
            for (std::size_t k = i + 1; k <= l; ++k) reach += joints_[k].origin.translation().norm();
            v += joint_speed_max_ * reach;
        }
        link_speed_[l] = v;
    }
}

KinematicChain KinematicChain::from_json(const nlohmann::json& j) {
    try {
        std::vector<JointSpec> joints;
        for (const auto& jj : j.at("joints")) {
            JointSpec spec;
            spec.axis = config::vec3(jj.at("axis"), "joint axis");
            if (spec.axis.norm() > 0.0) spec.axis.normalize();
            spec.origin = jj.contains("origin") ? config::pose(jj.at("origin"))
                                                : Eigen::Isometry3d::Identity();
            spec.lower = jj.at("limit").at("min").get<double>();
            spec.upper = jj.at("limit").at("max").get<double>();
            joints.push_back(spec);
        }
        std::vector<Capsule> links;
        for (const auto& lj : j.at("links")) {
            const auto& c = lj.at("capsule");
            links.push_back({{config::vec3(c.at("p1"), "capsule p1"), config::vec3(c.at("p2"), "capsule p2")},
                             c.at("radius").get<double>()});
        }
        const Eigen::Isometry3d mount =
            j.contains("mount") ? config::pose(j.at("mount")) : Eigen::Isometry3d::Identity();
        const Vec3 tool = j.contains("tool") ? config::vec3(j.at("tool"), "tool") : Vec3::Zero();
        return KinematicChain(config::get_or<std::string>(j, "name", "robot"), mount,
                              std::move(joints), std::move(links), tool,
                              config::get_or<double>(j, "joint_speed_max", 2.0));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("robot config: ") + e.what());
    }
}

KinematicChain KinematicChain::load(const std::filesystem::path& path) {
    return from_json(config::read_file(path));
}

Eigen::VectorXd KinematicChain::lower_limits() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints_[static_cast<std::size_t>(i)].lower;
    return v;
}

Eigen::VectorXd KinematicChain::upper_limits() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints_[static_cast<std::size_t>(i)].upper;
    return v;
}

bool KinematicChain::within_limits(const Eigen::VectorXd& q, double tol) const {
    if (q.size() != dof()) return false;
    for (int i = 0; i < dof(); ++i) {
        const JointSpec& j = joints_[static_cast<std::size_t>(i)];
        if (!std::isfinite(q[i]) || q[i] < j.lower - tol || q[i] > j.upper + tol) return false;
    }
    return true;
}

Eigen::VectorXd KinematicChain::clamp_to_limits(const Eigen::VectorXd& q) const {
    return q.cwiseMax(lower_limits()).cwiseMin(upper_limits());
}

KinematicChain KinematicChain::with_mount(const Eigen::Isometry3d& mount) const {
    KinematicChain c = *this;
    c.mount_ = mount;
    return c;
}

namespace {

template <typename Visit>
void walk_chain(const KinematicChain& chain, const Eigen::VectorXd& q, Visit&& visit) {
    Eigen::Isometry3d frame = chain.mount();
    const auto& joints = chain.joints();
    for (std::size_t i = 0; i < joints.size(); ++i) {
        frame = frame * joints[i].origin *
                Eigen::AngleAxisd(q[static_cast<Eigen::Index>(i)], joints[i].axis);
        visit(i, frame);
    }
}

}  // namespace

FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
    FkResult r;
    r.link_poses.reserve(chain.joints().size());
    walk_chain(chain, q, [&](std::size_t, const Eigen::Isometry3d& f) { r.link_poses.push_back(f); });
    r.end_effector = r.link_poses.back() * chain.tool();
    return r;
}

Vec3 link_capsules_into(const KinematicChain& chain, const Eigen::VectorXd& q,
                        std::vector<Capsule>& out) {
    out.resize(chain.joints().size());
    const auto& local = chain.link_capsules_local();
    Vec3 ee = Vec3::Zero();
    walk_chain(chain, q, [&](std::size_t i, const Eigen::Isometry3d& f) {
        out[i].seg.p1 = f * local[i].seg.p1;
        out[i].seg.p2 = f * local[i].seg.p2;
        out[i].radius = local[i].radius;
        if (i + 1 == local.size()) ee = f * chain.tool();
    });
    return ee;
}

std::vector<Capsule> link_capsules(const KinematicChain& chain, const Eigen::VectorXd& q) {
    std::vector<Capsule> out;
    link_capsules_into(chain, q, out);
    return out;
}

double sweep_padding(const KinematicChain& chain, int link, double h) {
    // Endpoint enclosures miss the bulge of the true path between samples.
    // For a point with speed <= v and acceleration <= A the bulge is at most
    // A h^2 / 8, which stays under v h / 4 while A h <= 2 v.
    return chain.link_speed_bounds()[static_cast<std::size_t>(link)] * h / 4.0 + 1e-6;
}

void swept_occupancy_append(const KinematicChain& chain, const Trajectory& traj, double t0,
                            double t1, double substep, OccupancySet& out, SweepScratch& scratch) {
    if (!(substep > 0.0)) throw std::invalid_argument("swept_occupancy: substep must be positive");
    if (t1 < t0) throw std::invalid_argument("swept_occupancy: t1 < t0");
    const int intervals = std::max(1, static_cast<int>(std::ceil((t1 - t0) / substep - 1e-9)));
    if (scratch.frames.size() < static_cast<std::size_t>(intervals + 1)) {
        scratch.frames.resize(static_cast<std::size_t>(intervals + 1));
    }
    for (int k = 0; k <= intervals; ++k) {
        const double t = k == intervals ? t1 : t0 + k * substep;
        traj.positions_into(t, scratch.q);
        link_capsules_into(chain, scratch.q, scratch.frames[static_cast<std::size_t>(k)]);
    }
    const int links = chain.dof();
    const bool first = out.capsules.empty();
    out.capsules.reserve(out.capsules.size() + static_cast<std::size_t>(links * intervals));
    for (int l = 0; l < links; ++l) {
        for (int k = 0; k < intervals; ++k) {
            const double ta = t0 + k * substep;
            const double tb = k + 1 == intervals ? t1 : t0 + (k + 1) * substep;
            Capsule c = enclosing_capsule(scratch.frames[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)],
                                          scratch.frames[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(l)]);
            c.radius += sweep_padding(chain, l, tb - ta);
            out.capsules.push_back(c);
        }
    }
    out.t_begin = first ? t0 : std::min(out.t_begin, t0);
    out.t_end = first ? t1 : std::max(out.t_end, t1);
}

OccupancySet swept_occupancy(const KinematicChain& chain, const Trajectory& traj, double t0,
                             double t1, double substep) {
    OccupancySet out;
    SweepScratch scratch;
    swept_occupancy_append(chain, traj, t0, t1, substep, out, scratch);
    return out;
}

}  // namespace saferl
