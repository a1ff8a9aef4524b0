#include "saferl/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "saferl/errors.hpp"

namespace saferl::config {

json read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("SAFERL_DATA_DIR")) return env;
    return SAFERL_DATA_DIR;
}

std::filesystem::path resolve(const std::filesystem::path& base_file, const std::string& ref) {
    std::filesystem::path p(ref);
    if (p.is_absolute()) return p;
    return base_file.parent_path() / p;
}

std::filesystem::path find_bundled(const std::string& kind, const std::string& name,
                                   const std::string& ext, const std::filesystem::path& base_file) {
    const std::filesystem::path given(name);
    if (!base_file.empty() && given.is_relative()) {
        const auto near = base_file.parent_path() / given;
        if (std::filesystem::is_regular_file(near)) return near;
    }
    if (std::filesystem::is_regular_file(given)) return given;
    const std::filesystem::path bundled = data_dir() / kind / (name + ext);
    if (std::filesystem::exists(bundled)) return bundled;
    throw ConfigError("no such " + kind + " file or bundled name: " + name);
}

Vec3 vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError(std::string(what) + ": expected a 3-element array");
    }
    Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    if (!v.allFinite()) throw ConfigError(std::string(what) + ": non-finite value");
    return v;
}

Eigen::Matrix3d rpy_matrix(double roll, double pitch, double yaw) {
    return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(roll, Vec3::UnitX()))
        .toRotationMatrix();
}

Eigen::Isometry3d pose(const json& j) {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    if (j.contains("xyz")) t.translation() = vec3(j.at("xyz"), "xyz");
    if (j.contains("rpy")) {
        const Vec3 rpy = vec3(j.at("rpy"), "rpy");
        t.linear() = rpy_matrix(rpy[0], rpy[1], rpy[2]);
    }
    return t;
}

}  // namespace saferl::config
