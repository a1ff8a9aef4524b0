#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "saferl/env.hpp"
#include "saferl/random.hpp"

namespace saferl {

/// (s_i||g, a_i, r_i, s_{i+1}||g). Observations carry their goal block.
struct Transition {
    Observation s;
    Eigen::VectorXd a;
    double r{-1.0};
    Observation s_next;
    bool done{false};
};

/// FIFO ring buffer.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 1'000'000);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    /// Index 0 is the oldest surviving transition.
    const Transition& operator[](std::size_t i) const { return items_[i]; }
    void clear() { items_.clear(); }

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    std::size_t capacity_;
    std::deque<Transition> items_;
};

/// Pointers into a buffer; valid until the buffer is next modified.
struct Minibatch {
    std::vector<const Transition*> items;
    std::size_t size() const { return items.size(); }
    const Transition& operator[](std::size_t i) const { return *items[i]; }
};

/// Uniform with replacement. Throws EmptyBuffer on an empty buffer.
Minibatch sample_batch(const ReplayBuffer& buffer, std::size_t size, Rng& rng);

using RewardFn = std::function<double(const Eigen::VectorXd& achieved, const Eigen::VectorXd& goal)>;

/// Originals interleaved with their relabeled variants: for each i the
/// original comes first, then min(k_her, L-1-i) relabelings whose goals are
/// the joint positions of states drawn without replacement from i+1..L-1.
std::vector<Transition> her_augment(const std::vector<Transition>& episode, int k_her, Rng& rng,
                                    const RewardFn& reward_fn);

struct TrainConfig {
    int k_her{4};
    std::int64_t k_start_steps{5000};
    std::int64_t t_update_after{1000};
    std::int64_t t_update_every{200};
    int n_epochs{200};
    int n_episodes_per_epoch{30};
    int t_max_episode{100};
    int batch_size{128};
    double gamma{0.99};
    double alpha{0.2};
    std::size_t buffer_capacity{1'000'000};

    void validate() const;
    nlohmann::json to_json() const;
};

/// Policy provider boundary. Update receives sampled minibatches; the
/// built-in providers ignore them.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    /// N components in [-1, 1]. `explore` selects stochastic behaviour.
    virtual Eigen::VectorXd act(const Observation& obs, bool explore) = 0;
    virtual nlohmann::json update(const Minibatch& batch, const TrainConfig& config);
    virtual void on_episode_start(std::uint64_t seed);
    virtual void save(const std::filesystem::path& path);
    /// Serializable internal state for checkpoints.
    virtual nlohmann::json state() const { return nullptr; }
    virtual void restore(const nlohmann::json& state);
};

class RandomPolicy : public Policy {
public:
    RandomPolicy(int dof, std::uint64_t seed);
    std::string name() const override { return "random"; }
    Eigen::VectorXd act(const Observation& obs, bool explore) override;
    nlohmann::json state() const override;
    void restore(const nlohmann::json& state) override;

private:
    int dof_;
    Rng rng_;
};

/// Deterministic heuristics. Without a person the robot drives straight at
/// the goal with saturated actions. With a person it picks, among the 2N+1
/// single-joint full-scale moves, the one that brings the end effector
/// closest to the nearest tracked keypoint.
class ScriptedPolicy : public Policy {
public:
    ScriptedPolicy(std::shared_ptr<const KinematicChain> robot, double dq_max);
    std::string name() const override { return "scripted"; }
    Eigen::VectorXd act(const Observation& obs, bool explore) override;

private:
    std::shared_ptr<const KinematicChain> robot_;
    double dq_max_;
};

struct EpisodeRecord {
    int epoch{0};
    int episode{0};            // within the epoch
    std::int64_t index{0};     // across the run
    std::uint64_t seed{0};
    int steps{0};
    DoneReason reason{DoneReason::Running};
    int ticks{0};
    int moving_contact_ticks{0};
    int clamped_actions{0};
    int resampled_actions{0};
    double min_moving_distance{0.0};  // +inf when the robot never moved
    double mean_tick_us{0.0};

    nlohmann::json to_json() const;
};

struct EpochMetrics {
    int epoch{0};
    double success_rate{0.0};
    double unsafe_collision_rate{0.0};
    double safe_collision_rate{0.0};
    double timeout_rate{0.0};
    double mean_episode_steps{0.0};
    double mean_tick_us{0.0};
    double median_tick_us{0.0};
    double p99_tick_us{0.0};
};

/// Rates and step means from episode records, timing from raw tick samples.
EpochMetrics summarize_epoch(int epoch, const std::vector<EpisodeRecord>& episodes,
                             std::vector<double> tick_us);

/// Nearest-rank percentile, p in (0, 100]. Median averages the middle pair.
double percentile(std::vector<double> v, double p);
double median(std::vector<double> v);

const char* metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

class MetricsSink {
public:
    virtual ~MetricsSink() = default;
    virtual void on_episode(const EpisodeRecord&) {}
    virtual void on_epoch(const EpochMetrics&) {}
};

/// Writes metrics.csv and events.jsonl, flushing each line.
class FileMetricsSink : public MetricsSink {
public:
    FileMetricsSink(const std::filesystem::path& dir, bool append);
    ~FileMetricsSink() override;
    void on_episode(const EpisodeRecord& r) override;
    void on_epoch(const EpochMetrics& m) override;

private:
    struct Files;
    std::unique_ptr<Files> files_;
};

/// Keeps everything in memory.
struct CollectingSink : MetricsSink {
    std::vector<EpisodeRecord> episodes;
    std::vector<EpochMetrics> epochs;
    void on_episode(const EpisodeRecord& r) override { episodes.push_back(r); }
    void on_epoch(const EpochMetrics& m) override { epochs.push_back(m); }
};

struct TrainCounters {
    std::int64_t t_total{0};
    std::int64_t t_last_update{0};
    std::int64_t update_calls{0};
    std::int64_t episodes{0};
    std::int64_t random_actions{0};
    std::int64_t policy_actions{0};
    std::int64_t stored_transitions{0};
    /// (T_total at the flush, update calls made) for every flush.
    std::vector<std::pair<std::int64_t, std::int64_t>> flushes;
};

struct RunSummary {
    int epochs_completed{0};
    TrainCounters counters;
    std::int64_t moving_contact_ticks{0};
    std::int64_t reasons[5]{};  // indexed by DoneReason
    nlohmann::json to_json() const;
};

/// Off-policy training loop with hindsight relabeling. Owns the replay buffer and the loop generator,
/// which drives exploration actions, HER draws and minibatch sampling.
class Trainer {
public:
    Trainer(TrainConfig config, Environment& env, Policy& policy, MetricsSink* sink,
            std::uint64_t seed);

    /// One epoch of n_episodes_per_epoch episodes.
    EpochMetrics run_epoch();
    RunSummary run();

    /// Epoch-granular checkpoint: counters, generator state, replay buffer
    /// and the policy's own state.
    void save_checkpoint(const std::filesystem::path& dir) const;
    void load_checkpoint(const std::filesystem::path& dir);

    int epoch() const { return epoch_; }
    const TrainCounters& counters() const { return counters_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const RunSummary& summary() const { return summary_; }
    const TrainConfig& config() const { return config_; }
    /// Optional hook observing every update call (T_total at the call).
    std::function<void(std::int64_t)> on_update;

private:
    EpisodeRecord run_episode(int episode_in_epoch, std::vector<double>& ticks);

    TrainConfig config_;
    Environment& env_;
    Policy& policy_;
    MetricsSink* sink_;
    std::uint64_t seed_;
    Rng rng_;
    ReplayBuffer buffer_;
    TrainCounters counters_;
    RunSummary summary_;
    int epoch_{0};
};

RunSummary train(const TrainConfig& config, Environment& env, Policy& policy, MetricsSink* sink,
                 std::uint64_t seed);

/// Runs episodes with the policy alone: no exploration schedule, no buffer,
/// no updates. Episode seeds follow the same derivation as training.
/// `observer`, when set, sees the environment after every finished episode.
using EpisodeObserver = std::function<void(const Environment&, const EpisodeRecord&)>;
RunSummary evaluate(Environment& env, Policy& policy, int n_epochs, int n_episodes_per_epoch,
                    MetricsSink* sink, std::uint64_t seed, bool explore = false,
                    const EpisodeObserver& observer = {});

/// Seed of the episode with run-wide index `index`.
std::uint64_t episode_seed(std::uint64_t run_seed, std::int64_t index);

}  // namespace saferl
