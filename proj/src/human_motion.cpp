#include "saferl/human_motion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "saferl/errors.hpp"

namespace saferl {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError("motion file: bad number '" + s + "' at " + where);
    }
    return v;
}

}  // namespace

HumanMotion::HumanMotion(std::vector<std::string> names, std::vector<double> times,
                         std::vector<std::vector<Vec3>> frames)
    : names_(std::move(names)), times_(std::move(times)), frames_(std::move(frames)) {
    if (times_.empty()) throw ConfigError("motion: no frames");
    if (frames_.size() != times_.size()) throw ConfigError("motion: frame/time count mismatch");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (frames_[i].size() != names_.size()) throw ConfigError("motion: ragged frame");
        if (i > 0 && !(times_[i] > times_[i - 1])) {
            throw ConfigError("motion: time must be strictly increasing");
        }
    }
}

HumanMotion HumanMotion::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("motion file: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("motion file: empty " + path.string());
    const auto header = split(line);
    if (header.empty() || header[0] != "time" || (header.size() - 1) % 3 != 0) {
        throw ConfigError("motion file: header must be time followed by x,y,z triples");
    }
    std::vector<std::string> names;
    for (std::size_t c = 1; c < header.size(); c += 3) {
        const std::string& hx = header[c];
        if (hx.size() < 3 || hx.substr(hx.size() - 2) != "_x") {
            throw ConfigError("motion file: expected <kp>_x in column " + std::to_string(c));
        }
        const std::string name = hx.substr(0, hx.size() - 2);
        if (header[c + 1] != name + "_y" || header[c + 2] != name + "_z") {
            throw ConfigError("motion file: columns for '" + name + "' not in x,y,z order");
        }
        names.push_back(name);
    }
    std::vector<double> times;
    std::vector<std::vector<Vec3>> frames;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw ConfigError("motion file: row " + std::to_string(row) + " has wrong column count");
        }
        const std::string where = path.filename().string() + ":" + std::to_string(row);
        times.push_back(parse_number(cells[0], where));
        std::vector<Vec3> f(names.size());
        for (std::size_t k = 0; k < names.size(); ++k) {
            f[k] = Vec3(parse_number(cells[1 + 3 * k], where), parse_number(cells[2 + 3 * k], where),
                        parse_number(cells[3 + 3 * k], where));
        }
        frames.push_back(std::move(f));
    }
    return HumanMotion(std::move(names), std::move(times), std::move(frames));
}

double HumanMotion::max_speed() const {
    double v = 0.0;
    for (std::size_t i = 1; i < times_.size(); ++i) {
        const double dt = times_[i] - times_[i - 1];
        for (std::size_t k = 0; k < names_.size(); ++k) {
            v = std::max(v, (frames_[i][k] - frames_[i - 1][k]).norm() / dt);
        }
    }
    return v;
}

void HumanMotion::validate(double v_max, const std::vector<std::string>& required) const {
    for (const std::string& r : required) {
        if (std::find(names_.begin(), names_.end(), r) == names_.end()) {
            throw ConfigError("motion: keypoint '" + r + "' required by the human model is missing");
        }
    }
    const double v = max_speed();
    if (v > v_max) {
        throw ConfigError("motion: keypoint speed " + std::to_string(v) +
                          " m/s exceeds the human speed bound");
    }
}

void HumanMotion::sample_into(double t, const Vec3& offset, Keypoints& out) const {
    const double tt = times_.front() + t;
    std::size_t i = 0;
    double u = 0.0;
    if (tt <= times_.front()) {
        i = 0;
    } else if (tt >= times_.back()) {
        i = times_.size() - 1;
    } else {
        i = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), tt) - times_.begin()) - 1;
        u = (tt - times_[i]) / (times_[i + 1] - times_[i]);
    }
    for (std::size_t k = 0; k < names_.size(); ++k) {
        Vec3 p = frames_[i][k];
        if (u > 0.0) p += u * (frames_[i + 1][k] - frames_[i][k]);
        out[names_[k]] = p + offset;
    }
}

Keypoints standing_pose(double x, double y, double heading, double reach) {
    const Vec3 c(x, y, 0.0);
    const Vec3 fwd(std::cos(heading), std::sin(heading), 0.0);
    const Vec3 left(-fwd.y(), fwd.x(), 0.0);
    auto at = [&](double f, double l, double z) { return Vec3(c + f * fwd + l * left + Vec3(0, 0, z)); };
    Keypoints k;
    k["head"] = at(0, 0, 1.65);
    k["neck"] = at(0, 0, 1.5);
    k["pelvis"] = at(0, 0, 0.95);
    for (const auto& [side, s] : {std::pair<const char*, double>{"l", 1.0}, {"r", -1.0}}) {
        const std::string sfx = std::string("_") + side;
        k["shoulder" + sfx] = at(0, 0.2 * s, 1.45);
        k["elbow" + sfx] = at(0.3 * reach, 0.22 * s, 1.45 - 0.3 * (1.0 - reach));
        k["wrist" + sfx] = at(0.6 * reach, 0.22 * s, 1.45 - 0.55 * (1.0 - reach));
        k["hip" + sfx] = at(0, 0.1 * s, 0.9);
        k["knee" + sfx] = at(0, 0.1 * s, 0.5);
        k["ankle" + sfx] = at(0, 0.1 * s, 0.08);
    }
    return k;
}

}  // namespace saferl
