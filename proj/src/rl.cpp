#include "saferl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "saferl/errors.hpp"
#include "saferl/robot_model.hpp"

namespace saferl {

using nlohmann::json;

// ---------------------------------------------------------------- buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(t));
}

namespace {

constexpr std::uint32_t kBufferMagic = 0x53524255;  // "SRBU"
constexpr std::uint32_t kBufferVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("replay buffer file truncated");
    return v;
}

void put_vec(std::ostream& os, const Eigen::VectorXd& v) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Eigen::VectorXd get_vec(std::istream& is) {
    Eigen::VectorXd v(get<std::uint32_t>(is));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
    if (!is) throw ConfigError("replay buffer file truncated");
    return v;
}

}  // namespace

void ReplayBuffer::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path.string());
    put(os, kBufferMagic);
    put(os, kBufferVersion);
    put<std::uint64_t>(os, capacity_);
    put<std::uint64_t>(os, items_.size());
    for (const Transition& t : items_) {
        put<std::int32_t>(os, t.s.dof);
        put_vec(os, t.s.values);
        put_vec(os, t.a);
        put(os, t.r);
        put_vec(os, t.s_next.values);
        put<std::uint8_t>(os, t.done ? 1 : 0);
    }
    if (!os) throw ConfigError("failed writing " + path.string());
}

void ReplayBuffer::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path.string());
    if (get<std::uint32_t>(is) != kBufferMagic || get<std::uint32_t>(is) != kBufferVersion) {
        throw ConfigError(path.string() + ": not a replay buffer file");
    }
    const auto capacity = get<std::uint64_t>(is);
    const auto n = get<std::uint64_t>(is);
    if (capacity == 0 || n > capacity) throw ConfigError(path.string() + ": bad header");
    std::deque<Transition> items;
    for (std::uint64_t k = 0; k < n; ++k) {
        Transition t;
        t.s.dof = t.s_next.dof = get<std::int32_t>(is);
        t.s.values = get_vec(is);
        t.a = get_vec(is);
        t.r = get<double>(is);
        t.s_next.values = get_vec(is);
        t.done = get<std::uint8_t>(is) != 0;
        items.push_back(std::move(t));
    }
    capacity_ = capacity;
    items_ = std::move(items);
}

Minibatch sample_batch(const ReplayBuffer& buffer, std::size_t size, Rng& rng) {
    if (buffer.empty()) throw EmptyBuffer("sample_batch on an empty replay buffer");
    Minibatch b;
    b.items.reserve(size);
    for (std::size_t k = 0; k < size; ++k) b.items.push_back(&buffer[rng.below(buffer.size())]);
    return b;
}

// ---------------------------------------------------------------- HER

std::vector<Transition> her_augment(const std::vector<Transition>& episode, int k_her, Rng& rng,
                                    const RewardFn& reward_fn) {
    const std::size_t n = episode.size();
    std::vector<Transition> out;
    out.reserve(n * static_cast<std::size_t>(1 + std::max(0, k_her)));
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(episode[i]);
        remaining.clear();
        for (std::size_t id = i + 1; id < n; ++id) remaining.push_back(id);
        const std::size_t draws = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, k_her)),
                                                        remaining.size());
        // Partial Fisher-Yates: the first `draws` slots become the selection.
        for (std::size_t d = 0; d < draws; ++d) {
            const std::size_t pick = d + rng.below(remaining.size() - d);
            std::swap(remaining[d], remaining[pick]);
            const Eigen::VectorXd fictional = episode[remaining[d]].s.q();
            const Transition& orig = episode[i];
            Transition t;
            t.s = orig.s.with_goal(fictional);
            t.a = orig.a;
            t.s_next = orig.s_next.with_goal(fictional);
            t.r = reward_fn(orig.s_next.q(), fictional);
            t.done = orig.done;
            out.push_back(std::move(t));
        }
    }
    return out;
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
    if (k_her < 0) throw ConfigError("train: k_HER must be >= 0");
    if (k_start_steps < 0 || t_update_after < 0) throw ConfigError("train: step thresholds must be >= 0");
    if (t_update_every < 1) throw ConfigError("train: T_update_every must be positive");
    if (n_epochs < 1 || n_episodes_per_epoch < 1 || t_max_episode < 1 || batch_size < 1) {
        throw ConfigError("train: epoch, episode, step and batch counts must be positive");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("train: gamma must lie in (0, 1)");
    if (!(alpha > 0.0)) throw ConfigError("train: alpha must be positive");
    if (buffer_capacity == 0) throw ConfigError("train: buffer capacity must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"k_HER", k_her},
            {"k_start_steps", k_start_steps},
            {"T_update_after", t_update_after},
            {"T_update_every", t_update_every},
            {"n_epochs", n_epochs},
            {"n_episodes_per_epoch", n_episodes_per_epoch},
            {"T_max_episode", t_max_episode},
            {"batch_size", batch_size},
            {"gamma", gamma},
            {"alpha", alpha},
            {"buffer_capacity", buffer_capacity}};
}

// ---------------------------------------------------------------- policies

nlohmann::json Policy::update(const Minibatch& batch, const TrainConfig&) {
    return {{"batch", batch.size()}};
}
void Policy::on_episode_start(std::uint64_t) {}
void Policy::save(const std::filesystem::path&) {}
void Policy::restore(const nlohmann::json&) {}

RandomPolicy::RandomPolicy(int dof, std::uint64_t seed) : dof_(dof), rng_(seed) {}

Eigen::VectorXd RandomPolicy::act(const Observation&, bool) {
    Eigen::VectorXd a(dof_);
    for (int i = 0; i < dof_; ++i) a[i] = rng_.uniform(-1.0, 1.0);
    return a;
}

nlohmann::json RandomPolicy::state() const { return {{"rng", rng_.state()}}; }
void RandomPolicy::restore(const nlohmann::json& s) { rng_.restore(s.at("rng").get<std::string>()); }

ScriptedPolicy::ScriptedPolicy(std::shared_ptr<const KinematicChain> robot, double dq_max)
    : robot_(std::move(robot)), dq_max_(dq_max) {}

Eigen::VectorXd ScriptedPolicy::act(const Observation& obs, bool) {
    const int n = obs.dof;
    const Eigen::VectorXd q = obs.q();
    bool person = false;
    for (int k = 0; k < 3; ++k) person = person || obs.relative(k).squaredNorm() > 0.0;
    if (!person) {
        return ((obs.goal() - q) / dq_max_).cwiseMax(-1.0).cwiseMin(1.0);
    }
    const Vec3 ee = obs.end_effector();
    Vec3 target = ee + obs.relative(0);
    for (int k = 1; k < 3; ++k) {
        if (obs.relative(k).norm() < (target - ee).norm()) target = ee + obs.relative(k);
    }
    Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
    double best_d = (ee - target).norm();
    for (int i = 0; i < n; ++i) {
        for (double sign : {-1.0, 1.0}) {
            Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
            a[i] = sign;
            const Eigen::VectorXd qn = robot_->clamp_to_limits(q + a * dq_max_);
            const double d = (forward_kinematics(*robot_, qn).end_effector - target).norm();
            if (d < best_d) {
                best_d = d;
                best = a;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------- metrics

nlohmann::json EpisodeRecord::to_json() const {
    nlohmann::json j{{"epoch", epoch},
                     {"episode", episode},
                     {"index", index},
                     {"seed", seed},
                     {"steps", steps},
                     {"reason", to_string(reason)},
                     {"ticks", ticks},
                     {"moving_contact_ticks", moving_contact_ticks},
                     {"clamped_actions", clamped_actions},
                     {"resampled_actions", resampled_actions},
                     {"mean_tick_us", mean_tick_us}};
    j["min_moving_distance"] =
        std::isfinite(min_moving_distance) ? nlohmann::json(min_moving_distance) : nlohmann::json(nullptr);
    return j;
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    const std::size_t k = std::clamp<std::size_t>(rank, 1, v.size()) - 1;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EpochMetrics summarize_epoch(int epoch, const std::vector<EpisodeRecord>& episodes,
                             std::vector<double> tick_us) {
    EpochMetrics m;
    m.epoch = epoch;
    if (!episodes.empty()) {
        int counts[5] = {};
        double steps = 0.0;
        for (const EpisodeRecord& r : episodes) {
            ++counts[static_cast<int>(r.reason)];
            steps += r.steps;
        }
        const double n = static_cast<double>(episodes.size());
        m.success_rate = counts[static_cast<int>(DoneReason::GoalReached)] / n;
        m.unsafe_collision_rate = counts[static_cast<int>(DoneReason::UnsafeCollision)] / n;
        m.safe_collision_rate = counts[static_cast<int>(DoneReason::SafeCollision)] / n;
        m.timeout_rate = counts[static_cast<int>(DoneReason::Timeout)] / n;
        m.mean_episode_steps = steps / n;
    }
    if (!tick_us.empty()) {
        m.mean_tick_us = std::accumulate(tick_us.begin(), tick_us.end(), 0.0) / static_cast<double>(tick_us.size());
        m.p99_tick_us = percentile(tick_us, 99.0);
        m.median_tick_us = median(std::move(tick_us));
    }
    return m;
}

const char* metrics_csv_header() {
    return "epoch,success_rate,unsafe_collision_rate,safe_collision_rate,timeout_rate,"
           "mean_episode_steps,mean_tick_us,median_tick_us,p99_tick_us";
}

std::string metrics_csv_row(const EpochMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.4f,%.3f,%.3f,%.3f", m.epoch,
                  m.success_rate, m.unsafe_collision_rate, m.safe_collision_rate, m.timeout_rate,
                  m.mean_episode_steps, m.mean_tick_us, m.median_tick_us, m.p99_tick_us);
    return buf;
}

struct FileMetricsSink::Files {
    std::ofstream csv;
    std::ofstream events;
};

FileMetricsSink::FileMetricsSink(const std::filesystem::path& dir, bool append)
    : files_(std::make_unique<Files>()) {
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / "metrics.csv";
    const bool fresh = !append || !std::filesystem::exists(csv_path);
    const auto mode = fresh ? std::ios::trunc : std::ios::app;
    files_->csv.open(csv_path, std::ios::out | mode);
    files_->events.open(dir / "events.jsonl", std::ios::out | mode);
    if (!files_->csv || !files_->events) throw ConfigError("cannot open metrics files in " + dir.string());
    if (fresh) files_->csv << metrics_csv_header() << '\n' << std::flush;
}

FileMetricsSink::~FileMetricsSink() = default;

void FileMetricsSink::on_episode(const EpisodeRecord& r) {
    files_->events << r.to_json().dump() << '\n' << std::flush;
}

void FileMetricsSink::on_epoch(const EpochMetrics& m) {
    files_->csv << metrics_csv_row(m) << '\n' << std::flush;
}

nlohmann::json RunSummary::to_json() const {
    return {{"epochs_completed", epochs_completed},
            {"episodes", counters.episodes},
            {"T_total", counters.t_total},
            {"update_calls", counters.update_calls},
            {"stored_transitions", counters.stored_transitions},
            {"moving_contact_ticks", moving_contact_ticks},
            {"goal_reached", reasons[static_cast<int>(DoneReason::GoalReached)]},
            {"unsafe_collision", reasons[static_cast<int>(DoneReason::UnsafeCollision)]},
            {"safe_collision", reasons[static_cast<int>(DoneReason::SafeCollision)]},
            {"timeout", reasons[static_cast<int>(DoneReason::Timeout)]}};
}

std::uint64_t episode_seed(std::uint64_t run_seed, std::int64_t index) {
    return mix_seed(run_seed, static_cast<std::uint64_t>(index));
}

// ---------------------------------------------------------------- training

namespace {

EpisodeRecord record_from(const Environment& env, int epoch, int episode, std::int64_t index,
                          std::uint64_t seed, DoneReason reason) {
    const EpisodeStats& st = env.stats();
    EpisodeRecord r;
    r.epoch = epoch;
    r.episode = episode;
    r.index = index;
    r.seed = seed;
    r.steps = st.steps;
    r.reason = reason;
    r.ticks = st.ticks;
    r.moving_contact_ticks = st.moving_contact_ticks;
    r.clamped_actions = st.clamped_actions;
    r.resampled_actions = st.resampled_actions;
    r.min_moving_distance = st.min_moving_distance;
    if (!st.tick_us.empty()) {
        r.mean_tick_us = std::accumulate(st.tick_us.begin(), st.tick_us.end(), 0.0) /
                         static_cast<double>(st.tick_us.size());
    }
    return r;
}

void tally(RunSummary& s, const EpisodeRecord& r) {
    ++s.reasons[static_cast<int>(r.reason)];
    s.moving_contact_ticks += r.moving_contact_ticks;
}

Eigen::VectorXd checked_action(const Eigen::VectorXd& a, int dof, const std::string& who) {
    if (a.size() != dof) throw ProtocolViolation(who + ": action has wrong length");
    return a;
}

}  // namespace

Trainer::Trainer(TrainConfig config, Environment& env, Policy& policy, MetricsSink* sink,
                 std::uint64_t seed)
    : config_(std::move(config)),
      env_(env),
      policy_(policy),
      sink_(sink),
      seed_(seed),
      rng_(mix_seed(seed, ~std::uint64_t{0})),
      buffer_(config_.buffer_capacity) {
    config_.validate();
    if (env_.scenario().t_max_episode != config_.t_max_episode) {
        throw ConfigError("train: T_max_episode differs between scenario and training config");
    }
}

EpisodeRecord Trainer::run_episode(int episode_in_epoch, std::vector<double>& ticks) {
    const std::int64_t index = counters_.episodes;
    const std::uint64_t seed = episode_seed(seed_, index);
    policy_.on_episode_start(seed);
    Observation s = env_.reset(seed);
    const int dof = env_.dof();

    std::vector<Transition> local;
    DoneReason reason = DoneReason::Timeout;
    for (int i = 0; i < config_.t_max_episode; ++i) {
        Eigen::VectorXd a;
        if (counters_.t_total < config_.k_start_steps) {
            a.resize(dof);
            for (int k = 0; k < dof; ++k) a[k] = rng_.uniform(-1.0, 1.0);
            ++counters_.random_actions;
        } else {
            a = checked_action(policy_.act(s, true), dof, policy_.name());
            ++counters_.policy_actions;
        }
        StepResult res = env_.step(a);
        local.push_back({s, a, res.reward, res.obs, res.done});
        ++counters_.t_total;
        s = std::move(res.obs);
        if (res.done) {
            reason = res.reason;
            break;
        }
    }

    const double eps_g = env_.scenario().eps_g;
    const auto reward_fn = [eps_g](const Eigen::VectorXd& achieved, const Eigen::VectorXd& g) {
        return compute_reward(achieved, g, eps_g);
    };
    for (Transition& t : her_augment(local, config_.k_her, rng_, reward_fn)) {
        buffer_.push(std::move(t));
        ++counters_.stored_transitions;
    }

    const std::int64_t pending = counters_.t_total - counters_.t_last_update;
    if (counters_.t_total >= config_.t_update_after && pending >= config_.t_update_every) {
        for (std::int64_t u = 0; u < pending; ++u) {
            const Minibatch batch = sample_batch(buffer_, static_cast<std::size_t>(config_.batch_size), rng_);
            if (on_update) on_update(counters_.t_total);
            policy_.update(batch, config_);
            ++counters_.update_calls;
        }
        counters_.flushes.emplace_back(counters_.t_total, pending);
        counters_.t_last_update = counters_.t_total;
    }

    EpisodeRecord r = record_from(env_, epoch_, episode_in_epoch, index, seed, reason);
    const auto& tu = env_.stats().tick_us;
    ticks.insert(ticks.end(), tu.begin(), tu.end());
    ++counters_.episodes;
    return r;
}

EpochMetrics Trainer::run_epoch() {
    std::vector<EpisodeRecord> records;
    std::vector<double> ticks;
    for (int e = 0; e < config_.n_episodes_per_epoch; ++e) {
        records.push_back(run_episode(e, ticks));
        tally(summary_, records.back());
        if (sink_) sink_->on_episode(records.back());
    }
    EpochMetrics m = summarize_epoch(epoch_, records, std::move(ticks));
    if (sink_) sink_->on_epoch(m);
    ++epoch_;
    summary_.epochs_completed = epoch_;
    summary_.counters = counters_;
    return m;
}

RunSummary Trainer::run() {
    while (epoch_ < config_.n_epochs) run_epoch();
    summary_.counters = counters_;
    return summary_;
}

void Trainer::save_checkpoint(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["version"] = 1;
    j["epoch"] = epoch_;
    j["seed"] = seed_;
    j["config"] = config_.to_json();
    j["rng"] = rng_.state();
    j["counters"] = {{"t_total", counters_.t_total},
                     {"t_last_update", counters_.t_last_update},
                     {"update_calls", counters_.update_calls},
                     {"episodes", counters_.episodes},
                     {"random_actions", counters_.random_actions},
                     {"policy_actions", counters_.policy_actions},
                     {"stored_transitions", counters_.stored_transitions},
                     {"flushes", counters_.flushes}};
    j["summary"] = {{"moving_contact_ticks", summary_.moving_contact_ticks},
                    {"reasons", summary_.reasons}};
    j["policy"] = policy_.state();
    buffer_.save(dir / "replay.bin");
    policy_.save(dir / "policy");
    std::ofstream os(dir / "trainer.json", std::ios::trunc);
    os << j.dump(2) << '\n';
    if (!os) throw ConfigError("cannot write checkpoint in " + dir.string());
}

void Trainer::load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream is(dir / "trainer.json");
    if (!is) throw ConfigError("no checkpoint in " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
        if (j.at("version").get<int>() != 1) throw ConfigError("checkpoint: unsupported version");
        if (j.at("seed").get<std::uint64_t>() != seed_) throw ConfigError("checkpoint: seed mismatch");
        // The epoch budget may grow between sessions; everything else must match.
        json saved = j.at("config"), now = config_.to_json();
        saved.erase("n_epochs");
        now.erase("n_epochs");
        if (saved != now) throw ConfigError("checkpoint: config mismatch");
        const auto& c = j.at("counters");
        TrainCounters k;
        k.t_total = c.at("t_total");
        k.t_last_update = c.at("t_last_update");
        k.update_calls = c.at("update_calls");
        k.episodes = c.at("episodes");
        k.random_actions = c.at("random_actions");
        k.policy_actions = c.at("policy_actions");
        k.stored_transitions = c.at("stored_transitions");
        k.flushes = c.at("flushes").get<std::vector<std::pair<std::int64_t, std::int64_t>>>();
        buffer_.load(dir / "replay.bin");
        rng_.restore(j.at("rng").get<std::string>());
        policy_.restore(j.at("policy"));
        counters_ = std::move(k);
        epoch_ = j.at("epoch");
        summary_.moving_contact_ticks = j.at("summary").at("moving_contact_ticks");
        const auto reasons = j.at("summary").at("reasons").get<std::vector<std::int64_t>>();
        for (std::size_t i = 0; i < 5 && i < reasons.size(); ++i) summary_.reasons[i] = reasons[i];
        summary_.epochs_completed = epoch_;
        summary_.counters = counters_;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
}

RunSummary train(const TrainConfig& config, Environment& env, Policy& policy, MetricsSink* sink,
                 std::uint64_t seed) {
    Trainer t(config, env, policy, sink, seed);
    return t.run();
}

RunSummary evaluate(Environment& env, Policy& policy, int n_epochs, int n_episodes_per_epoch,
                    MetricsSink* sink, std::uint64_t seed, bool explore,
                    const EpisodeObserver& observer) {
    if (n_epochs < 1 || n_episodes_per_epoch < 1) throw ConfigError("evaluate: counts must be positive");
    RunSummary summary;
    std::int64_t index = 0;
    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        std::vector<EpisodeRecord> records;
        std::vector<double> ticks;
        for (int e = 0; e < n_episodes_per_epoch; ++e, ++index) {
            const std::uint64_t s = episode_seed(seed, index);
            policy.on_episode_start(s);
            Observation obs = env.reset(s);
            DoneReason reason = DoneReason::Timeout;
            while (true) {
                StepResult r = env.step(checked_action(policy.act(obs, explore), env.dof(), policy.name()));
                ++summary.counters.t_total;
                obs = std::move(r.obs);
                if (r.done) {
                    reason = r.reason;
                    break;
                }
            }
            records.push_back(record_from(env, epoch, e, index, s, reason));
            const auto& tu = env.stats().tick_us;
            ticks.insert(ticks.end(), tu.begin(), tu.end());
            tally(summary, records.back());
            ++summary.counters.episodes;
            if (sink) sink->on_episode(records.back());
            if (observer) observer(env, records.back());
        }
        const EpochMetrics m = summarize_epoch(epoch, records, std::move(ticks));
        if (sink) sink->on_epoch(m);
        summary.epochs_completed = epoch + 1;
    }
    return summary;
}

}  // namespace saferl
