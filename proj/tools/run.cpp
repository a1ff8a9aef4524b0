#include "run.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include "saferl/config.hpp"
#include "saferl/env.hpp"
#include "saferl/errors.hpp"
#include "saferl/protocol.hpp"
#include "saferl/rl.hpp"

namespace saferl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

Mode parse_mode(const std::string& s) {
    if (s == "train") return Mode::Train;
    if (s == "evaluate") return Mode::Evaluate;
    if (s == "benchmark-shield") return Mode::BenchmarkShield;
    if (s == "fuzz-safety") return Mode::FuzzSafety;
    throw ConfigError("unknown mode '" + s + "'");
}

Agent parse_agent(const std::string& s) {
    if (s == "random") return Agent::Random;
    if (s == "scripted") return Agent::Scripted;
    if (s == "external") return Agent::External;
    throw ConfigError("unknown agent '" + s + "'");
}

const char* to_string(Mode m) {
    switch (m) {
        case Mode::Train: return "train";
        case Mode::Evaluate: return "evaluate";
        case Mode::BenchmarkShield: return "benchmark-shield";
        case Mode::FuzzSafety: return "fuzz-safety";
    }
    return "?";
}

const char* to_string(Agent a) {
    switch (a) {
        case Agent::Random: return "random";
        case Agent::Scripted: return "scripted";
        case Agent::External: return "external";
    }
    return "?";
}

std::string git_blob_sha1(const std::string& content) {
    const std::string head = "blob " + std::to_string(content.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || !EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) ||
        !EVP_DigestUpdate(ctx.get(), head.data(), head.size()) ||
        !EVP_DigestUpdate(ctx.get(), content.data(), content.size()) ||
        !EVP_DigestFinal_ex(ctx.get(), md, &len)) {
        throw Error("sha1 digest failed");
    }
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::string git_blob_sha1_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return git_blob_sha1(ss.str());
}

namespace {

// Alternates between two providers, switching at every episode start.
class AlternatingPolicy : public Policy {
public:
    AlternatingPolicy(Policy& a, Policy& b) : a_(a), b_(b) {}
    std::string name() const override { return a_.name() + "+" + b_.name(); }
    Eigen::VectorXd act(const Observation& obs, bool explore) override {
        return (episodes_ % 2 ? b_ : a_).act(obs, explore);
    }
    void on_episode_start(std::uint64_t seed) override {
        ++episodes_;
        (episodes_ % 2 ? b_ : a_).on_episode_start(seed);
    }

private:
    Policy& a_;
    Policy& b_;
    std::int64_t episodes_{-1};
};

TrainConfig train_config_for(const RunSpec& spec, const Scenario& scenario) {
    TrainConfig c;
    if (!spec.train_config.empty()) {
        const json j = config::read_file(spec.train_config);
        try {
            c.k_her = config::get_or(j, "k_HER", c.k_her);
            c.k_start_steps = config::get_or(j, "k_start_steps", c.k_start_steps);
            c.t_update_after = config::get_or(j, "T_update_after", c.t_update_after);
            c.t_update_every = config::get_or(j, "T_update_every", c.t_update_every);
            c.n_epochs = config::get_or(j, "n_epochs", c.n_epochs);
            c.n_episodes_per_epoch = config::get_or(j, "n_episodes_per_epoch", c.n_episodes_per_epoch);
            c.batch_size = config::get_or(j, "batch_size", c.batch_size);
            c.gamma = config::get_or(j, "gamma", c.gamma);
            c.alpha = config::get_or(j, "alpha", c.alpha);
            c.buffer_capacity = config::get_or(j, "buffer_capacity", c.buffer_capacity);
            if (j.contains("T_max_episode")) throw ConfigError("train config: set T_max_episode in the scenario");
        } catch (const json::exception& e) {
            throw ConfigError(std::string("train config: ") + e.what());
        }
    }
    if (spec.epochs) c.n_epochs = *spec.epochs;
    if (spec.episodes_per_epoch) c.n_episodes_per_epoch = *spec.episodes_per_epoch;
    c.t_max_episode = scenario.t_max_episode;
    c.validate();
    return c;
}

struct Counts {
    int epochs;
    int episodes;
};

Counts eval_counts(const RunSpec& spec) {
    const int default_eps = spec.mode == Mode::Evaluate ? 100 : spec.mode == Mode::BenchmarkShield ? 20 : 200;
    const Counts c{spec.epochs.value_or(1), spec.episodes_per_epoch.value_or(default_eps)};
    if (c.epochs < 1 || c.episodes < 1) throw ConfigError("epochs and episodes per epoch must be positive");
    return c;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path, std::ios::trunc);
    os << j.dump(2) << '\n';
    if (!os) throw ConfigError("cannot write " + path.string());
}

json rates_json(const RunSummary& s) {
    json j = s.to_json();
    const double n = static_cast<double>(std::max<std::int64_t>(1, s.counters.episodes));
    j["unsafe_collision_rate"] = s.reasons[static_cast<int>(DoneReason::UnsafeCollision)] / n;
    j["success_rate"] = s.reasons[static_cast<int>(DoneReason::GoalReached)] / n;
    return j;
}

}  // namespace

int run(const RunSpec& spec, std::ostream& log) {
    const fs::path scenario_path = config::find_bundled("scenarios", spec.scenario);
    Scenario scenario = Scenario::load(scenario_path);
    if (spec.shield) scenario.shield = *spec.shield;
    if (spec.t_max_episode) scenario.t_max_episode = *spec.t_max_episode;
    scenario.validate();
    fs::create_directories(spec.out);

    Environment env(scenario);
    const int dof = env.dof();

    std::unique_ptr<protocol::Listener> listener;
    std::unique_ptr<protocol::AgentSession> session;
    RandomPolicy random(dof, mix_seed(spec.seed, 0x5EED));
    ScriptedPolicy scripted(scenario.robot, scenario.dq_max);
    std::unique_ptr<protocol::ExternalPolicy> external;
    Policy* policy = &random;
    if (spec.agent == Agent::Scripted) policy = &scripted;
    if (spec.agent == Agent::External) {
        listener = std::make_unique<protocol::Listener>(protocol::Endpoint::parse(spec.endpoint));
        log << "waiting for agent on " << listener->endpoint().to_string() << std::endl;
        session = std::make_unique<protocol::AgentSession>(
            listener->accept(std::chrono::milliseconds(spec.timeout_ms)), std::chrono::milliseconds(spec.timeout_ms));
        session->ping();
        external = std::make_unique<protocol::ExternalPolicy>(*session, dof);
        policy = external.get();
    }

    json manifest{{"tool", "saferl"},
                  {"version", "0.1.0"},
                  {"mode", to_string(spec.mode)},
                  {"agent", to_string(spec.agent)},
                  {"seed", spec.seed},
                  {"shield", scenario.shield},
                  {"scenario", {{"name", scenario.name},
                                {"path", scenario_path.string()},
                                {"sha1", git_blob_sha1_file(scenario_path)}}},
                  {"T_max_episode", scenario.t_max_episode}};
    if (spec.agent == Agent::External) manifest["endpoint"] = spec.endpoint;

    const bool append = spec.mode == Mode::Train && spec.resume && fs::exists(spec.out / "checkpoint" / "trainer.json");
    int status = 0;
    {
        FileMetricsSink sink(spec.out, append);
        if (spec.mode == Mode::Train) {
            const TrainConfig cfg = train_config_for(spec, scenario);
            manifest["train_config"] = cfg.to_json();
            Trainer trainer(cfg, env, *policy, &sink, spec.seed);
            if (append) {
                trainer.load_checkpoint(spec.out / "checkpoint");
                log << "resumed at epoch " << trainer.epoch() << std::endl;
            }
            while (trainer.epoch() < cfg.n_epochs) {
                const EpochMetrics m = trainer.run_epoch();
                trainer.save_checkpoint(spec.out / "checkpoint");
                log << "epoch " << m.epoch << " success " << m.success_rate << " unsafe "
                    << m.unsafe_collision_rate << " steps " << trainer.counters().t_total << std::endl;
            }
            manifest["summary"] = rates_json(trainer.summary());
        } else {
            const Counts n = eval_counts(spec);
            manifest["epochs"] = n.epochs;
            manifest["episodes_per_epoch"] = n.episodes;
            std::vector<double> ticks;
            std::int64_t sim_ticks = 0;
            double min_distance = std::numeric_limits<double>::infinity();
            const EpisodeObserver observe = [&](const Environment& e, const EpisodeRecord& r) {
                const auto& tu = e.stats().tick_us;
                ticks.insert(ticks.end(), tu.begin(), tu.end());
                sim_ticks += r.ticks;
                min_distance = std::min(min_distance, r.min_moving_distance);
            };
            AlternatingPolicy mixed(random, scripted);
            Policy& p = spec.mode == Mode::FuzzSafety && spec.agent != Agent::External ? mixed : *policy;
            const auto wall0 = std::chrono::steady_clock::now();
            const RunSummary s = evaluate(env, p, n.epochs, n.episodes, &sink, spec.seed, false, observe);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
            manifest["summary"] = rates_json(s);

            if (spec.mode == Mode::BenchmarkShield) {
                double mean = 0.0, mx = 0.0;
                for (double t : ticks) {
                    mean += t;
                    mx = std::max(mx, t);
                }
                mean = ticks.empty() ? 0.0 : mean / static_cast<double>(ticks.size());
                const double sim = static_cast<double>(sim_ticks) * scenario.dt;
                const json bench{{"ticks", ticks.size()},
                                 {"mean_tick_us", mean},
                                 {"median_tick_us", median(ticks)},
                                 {"p99_tick_us", percentile(ticks, 99.0)},
                                 {"max_tick_us", mx},
                                 {"simulated_s", sim},
                                 {"wall_s", wall},
                                 {"realtime_factor", wall > 0 ? sim / wall : 0.0}};
                write_json(spec.out / "benchmark.json", bench);
                log << bench.dump(2) << std::endl;
            }
            if (spec.mode == Mode::FuzzSafety) {
                const json fuzz{{"episodes", s.counters.episodes},
                                {"moving_contact_ticks", s.moving_contact_ticks},
                                {"simulated_ticks", sim_ticks},
                                {"min_moving_distance", std::isfinite(min_distance) ? json(min_distance) : json(nullptr)},
                                {"unsafe_collision", s.reasons[static_cast<int>(DoneReason::UnsafeCollision)]},
                                {"passed", s.moving_contact_ticks == 0}};
                write_json(spec.out / "fuzz.json", fuzz);
                log << (s.moving_contact_ticks == 0 ? "PASS" : "FAIL") << " fuzz-safety: "
                    << s.moving_contact_ticks << " moving-contact ticks over " << s.counters.episodes
                    << " episodes" << std::endl;
                if (s.moving_contact_ticks != 0) status = 3;
            }
        }
    }

    json artifacts = json::object();
    for (const char* f : {"metrics.csv", "events.jsonl", "benchmark.json", "fuzz.json"}) {
        if (fs::exists(spec.out / f)) artifacts[f] = git_blob_sha1_file(spec.out / f);
    }
    manifest["artifacts"] = artifacts;
    write_json(spec.out / "manifest.json", manifest);
    return status;
}

}  // namespace saferl::cli
