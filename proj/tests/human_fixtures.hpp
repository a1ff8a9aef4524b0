#pragma once

#include <cmath>
#include <map>
#include <string>

#include "saferl/geometry.hpp"

namespace saferl::fixture {

/// Upright person with feet at (x, y, 0), facing along `heading` (rad).
/// Arms reach forward by `reach` (0 = hanging).
inline std::map<std::string, Vec3> standing(double x, double y, double heading = 0.0,
                                            double reach = 0.0) {
    const Vec3 c(x, y, 0.0);
    const Vec3 fwd(std::cos(heading), std::sin(heading), 0.0);
    const Vec3 left(-fwd.y(), fwd.x(), 0.0);
    auto at = [&](double f, double l, double z) { return Vec3(c + f * fwd + l * left + Vec3(0, 0, z)); };
    std::map<std::string, Vec3> k;
    k["head"] = at(0, 0, 1.65);
    k["neck"] = at(0, 0, 1.5);
    k["pelvis"] = at(0, 0, 0.95);
    for (const auto& [side, s] : {std::pair<std::string, double>{"l", 1.0}, {"r", -1.0}}) {
        k["shoulder_" + side] = at(0, 0.2 * s, 1.45);
        k["elbow_" + side] = at(0.3 * reach, 0.22 * s, 1.45 - 0.3 * (1.0 - reach));
        k["wrist_" + side] = at(0.6 * reach, 0.22 * s, 1.45 - 0.55 * (1.0 - reach));
        k["hip_" + side] = at(0, 0.1 * s, 0.9);
        k["knee_" + side] = at(0, 0.1 * s, 0.5);
        k["ankle_" + side] = at(0, 0.1 * s, 0.08);
    }
    return k;
}

inline void translate(std::map<std::string, Vec3>& k, const Vec3& d) {
    for (auto& [name, p] : k) p += d;
}

}  // namespace saferl::fixture
