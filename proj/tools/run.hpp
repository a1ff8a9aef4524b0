#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"

namespace saferl::cli {

enum class Mode { Train, Evaluate, BenchmarkShield, FuzzSafety };
enum class Agent { Random, Scripted, External };

struct RunSpec {
    std::string scenario{"human_evasion"};
    Mode mode{Mode::Evaluate};
    Agent agent{Agent::Random};
    std::uint64_t seed{0};
    std::filesystem::path out{"runs/latest"};
    std::optional<int> epochs;
    std::optional<int> episodes_per_epoch;
    std::optional<bool> shield;      // scenario default when unset
    std::optional<int> t_max_episode;
    std::string endpoint{"tcp://127.0.0.1:5555"};
    int timeout_ms{30000};
    std::filesystem::path train_config;  // optional JSON overrides of TrainConfig
    bool resume{false};
};

Mode parse_mode(const std::string& s);
Agent parse_agent(const std::string& s);
const char* to_string(Mode m);
const char* to_string(Agent a);

/// Executes a run, writing metrics.csv, events.jsonl and manifest.json
/// (plus mode-specific reports) into spec.out. Returns the process exit
/// status; progress goes to `log`.
int run(const RunSpec& spec, std::ostream& log);

/// Hex SHA-1 of the git blob object for `content` (what `git hash-object` prints).
std::string git_blob_sha1(const std::string& content);
std::string git_blob_sha1_file(const std::filesystem::path& path);

}  // namespace saferl::cli
