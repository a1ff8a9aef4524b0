#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Geometry>

#include "json.hpp"
#include "saferl/geometry.hpp"

namespace saferl::config {

using json = nlohmann::json;

/// Parse a JSON document; ConfigError on IO or syntax failure.
json read_file(const std::filesystem::path& path);

/// Resolve `ref` relative to the directory of `base_file`.
std::filesystem::path resolve(const std::filesystem::path& base_file, const std::string& ref);

/// Bundled data directory; SAFERL_DATA_DIR in the environment overrides it.
std::filesystem::path data_dir();

/// `name` relative to `base_file`'s directory or as given if such a file
/// exists, else the bundled `<data>/<kind>/<name><ext>`.
std::filesystem::path find_bundled(const std::string& kind, const std::string& name,
                                   const std::string& ext = ".json",
                                   const std::filesystem::path& base_file = {});

Vec3 vec3(const json& j, const char* what);

/// {xyz: [..], rpy: [..]}, both optional; rpy is roll/pitch/yaw about fixed x, y, z.
Eigen::Isometry3d pose(const json& j);

Eigen::Matrix3d rpy_matrix(double roll, double pitch, double yaw);

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace saferl::config
