#include <atomic>
#include <fstream>
#include <functional>
#include <thread>

#include "doctest.h"
#include "saferl/errors.hpp"
#include "saferl/protocol.hpp"

using namespace saferl;
using namespace saferl::protocol;
using nlohmann::json;
using Eigen::VectorXd;
using namespace std::chrono_literals;

namespace {

std::vector<json> load_vectors() {
    std::ifstream in(std::string(SAFERL_SOURCE_DIR) + "/tests/protocol_vectors.jsonl");
    REQUIRE(in);
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
}

Observation obs_from(const json& values, int dof) {
    Observation o;
    o.dof = dof;
    o.values.resize(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) o.values[static_cast<Eigen::Index>(i)] = values[i].get<double>();
    return o;
}

VectorXd vec_from(const json& values) {
    VectorXd v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
    return v;
}

// In-memory transport: each sent line is answered by `respond`, and the
// answer is queued for the next recv.
struct Loopback : LineTransport {
    std::function<std::string(const json&)> respond;
    std::vector<std::string> sent;
    std::deque<std::string> queued;

    void send_line(const std::string& line) override {
        sent.push_back(line);
        queued.push_back(respond(json::parse(line)));
    }
    std::string recv_line(std::chrono::milliseconds) override {
        if (queued.empty()) throw ProtocolTimeout("nothing queued");
        std::string s = queued.front();
        queued.pop_front();
        return s;
    }
};

std::string good_reply(const json& req, int dof) {
    json r{{"v", 1}, {"id", req["id"]}};
    const std::string t = req["type"];
    r["type"] = reply_type_for(t);
    if (t == "act") r["action"] = std::vector<double>(static_cast<std::size_t>(dof), 0.25);
    if (t == "update") r["diagnostics"] = {{"n", req["batch"]["reward"].size()}};
    return r.dump();
}

// Agent loop for socket tests: answers requests until the peer goes away.
void serve_agent(LineTransport& t, int dof, std::atomic<int>& updates, std::atomic<int>& resets) {
    try {
        while (true) {
            const json req = json::parse(t.recv_line(5000ms));
            if (req["type"] == "update") ++updates;
            if (req["type"] == "reset_notice") ++resets;
            t.send_line(good_reply(req, dof));
        }
    } catch (const Error&) {
    }
}

}  // namespace

TEST_CASE("request vectors are reproduced byte for byte") {
    int checked = 0;
    for (const json& v : load_vectors()) {
        if (v["kind"] != "request") continue;
        const std::int64_t id = v["id"];
        const json& in = v["input"];
        const std::string type = v["type"];
        std::string line;
        if (type == "ping") {
            line = encode(ping_request(id));
        } else if (type == "act") {
            line = encode(act_request(id, obs_from(in["observation"], in["dof"]), in["explore"]));
        } else if (type == "update") {
            std::vector<Transition> ts;
            for (const json& t : in["transitions"]) {
                ts.push_back({obs_from(t["s"], in["dof"]), vec_from(t["a"]), t["r"].get<double>(),
                              obs_from(t["s_next"], in["dof"]), t["done"].get<bool>()});
            }
            Minibatch b;
            for (const Transition& t : ts) b.items.push_back(&t);
            line = encode(update_request(id, b));
        } else if (type == "reset_notice") {
            line = encode(reset_notice_request(id, in["seed"].get<std::uint64_t>()));
        } else if (type == "save") {
            line = encode(save_request(id, in["path"]));
        }
        CHECK_MESSAGE(line == v["line"].get<std::string>(), v["name"]);
        ++checked;
    }
    CHECK(checked == 7);
}

TEST_CASE("reply vectors are accepted or rejected as specified") {
    int valid = 0, invalid = 0;
    for (const json& v : load_vectors()) {
        if (v["kind"] != "reply") continue;
        const std::string line = v["line"];
        const std::string rtype = v["request_type"];
        const std::int64_t id = v["expected_id"];
        auto run = [&] {
            const json r = decode_reply(line, id, rtype);
            if (rtype == "act") return action_from_reply(r, v["dof"]);
            return VectorXd();
        };
        if (v["valid"]) {
            ++valid;
            VectorXd a;
            CHECK_NOTHROW(a = run());
            if (v.contains("action")) CHECK(a == vec_from(v["action"]));
        } else {
            ++invalid;
            CHECK_THROWS_AS_MESSAGE(run(), ProtocolViolation, v["name"]);
        }
    }
    CHECK(valid == 8);
    CHECK(invalid == 28);
}

TEST_CASE("endpoint parsing") {
    const Endpoint a = Endpoint::parse("tcp://127.0.0.1:5555");
    CHECK(a.kind == Endpoint::Kind::Tcp);
    CHECK(a.port == 5555);
    CHECK(Endpoint::parse(":0").host == "127.0.0.1");
    const Endpoint u = Endpoint::parse("unix:///tmp/x.sock");
    CHECK(u.kind == Endpoint::Kind::Unix);
    CHECK(u.path == "/tmp/x.sock");
    CHECK(u.to_string() == "unix:///tmp/x.sock");
    CHECK_THROWS_AS(Endpoint::parse("localhost"), ConfigError);
    CHECK_THROWS_AS(Endpoint::parse("h:70000"), ConfigError);
    CHECK_THROWS_AS(Endpoint::parse("h:12x"), ConfigError);
    CHECK_THROWS_AS(Endpoint::parse("unix://"), ConfigError);
}

TEST_CASE("fuzzed replies raise ProtocolViolation and the session survives") {
    auto lb = std::make_unique<Loopback>();
    Loopback* raw = lb.get();
    Rng rng(61);
    bool corrupt = false;
    int dof = 3;
    raw->respond = [&](const json& req) {
        std::string s = good_reply(req, dof);
        if (!corrupt) return s;
        switch (rng.below(6)) {
            case 0:  // flip bytes
                for (int k = 0; k < 1 + static_cast<int>(rng.below(4)); ++k) {
                    s[rng.below(s.size())] = static_cast<char>(rng.below(256));
                }
                return s;
            case 1:
                return s.substr(0, rng.below(s.size()));
            case 2: {
                json j = json::parse(s);
                const char* keys[] = {"v", "id", "type", "action", "diagnostics"};
                const json junk[] = {nullptr, "x", 1.5, json::array(), json::object(), -7, true};
                j[keys[rng.below(5)]] = junk[rng.below(7)];
                return j.dump();
            }
            case 3: {
                json j = json::parse(s);
                j["extra" + std::to_string(rng.below(3))] = 0;
                return j.dump();
            }
            case 4: {
                std::string r;
                for (int k = 0; k < static_cast<int>(rng.below(40)); ++k) r.push_back(static_cast<char>(rng.below(256)));
                return r;
            }
            default: {
                json j = json::parse(s);
                if (j.contains("action")) j["action"][0] = rng.uniform(1.0001, 5.0);
                else j["id"] = j["id"].get<std::int64_t>() + 1;
                return j.dump();
            }
        }
    };
    AgentSession session(std::move(lb), 100ms);

    Observation obs;
    obs.dof = dof;
    obs.values = VectorXd::LinSpaced(Observation::size_for(dof), -1, 1);
    ReplayBuffer buf(4);
    buf.push({obs, VectorXd::Zero(dof), -1.0, obs, false});
    Rng brng(1);

    int violations = 0, accepted = 0;
    for (int trial = 0; trial < 3000; ++trial) {
        corrupt = true;
        try {
            switch (trial % 4) {
                case 0: session.ping(); break;
                case 1: session.act(obs, true); break;
                case 2: session.update(sample_batch(buf, 2, brng)); break;
                default: session.reset_notice(static_cast<std::uint64_t>(trial)); break;
            }
            ++accepted;
        } catch (const ProtocolViolation&) {
            ++violations;
        }
        corrupt = false;
        CHECK_NOTHROW(session.ping());
        CHECK(session.act(obs, false) == VectorXd::Constant(dof, 0.25));
    }
    CHECK(violations > 2500);
    CHECK(session.violations() == violations);
}

TEST_CASE("a violating agent leaves the environment untouched") {
    Environment env(Scenario::find("human_evasion"));
    const int dof = env.dof();
    bool bad = true;
    auto lb = std::make_unique<Loopback>();
    lb->respond = [&](const json& req) {
        if (bad && req["type"] == "act") {
            return json{{"v", 1}, {"id", req["id"]}, {"type", "action"}, {"action", std::vector<double>(dof, 2.0)}}.dump();
        }
        return good_reply(req, dof);
    };
    AgentSession session(std::move(lb), 100ms);
    ExternalPolicy policy(session, dof);
    policy.on_episode_start(5);
    const Observation obs = env.reset(5);
    const JointState before = env.robot_state();
    const double t_before = env.time();
    CHECK_THROWS_AS(env.step(policy.act(obs, true)), ProtocolViolation);
    CHECK(env.robot_state().q == before.q);
    CHECK(env.time() == t_before);
    CHECK(env.stats().steps == 0);
    bad = false;
    const StepResult r = env.step(policy.act(obs, true));
    CHECK(env.stats().steps == 1);
    CHECK(r.obs.dof == dof);
}

TEST_CASE("tcp session with a live agent, including timeouts") {
    Listener listener(Endpoint::parse("tcp://127.0.0.1:0"));
    REQUIRE(listener.endpoint().port > 0);
    std::atomic<bool> slow{true};
    std::thread agent([ep = listener.endpoint(), &slow] {
        auto t = connect(ep, 2000ms);
        // First request: answer late, after the simulator gave up.
        json req = json::parse(t->recv_line(5000ms));
        std::this_thread::sleep_for(300ms);
        t->send_line(good_reply(req, 2));
        slow = false;
        std::atomic<int> u{0}, r{0};
        serve_agent(*t, 2, u, r);
    });
    AgentSession session(listener.accept(2000ms), 100ms);
    CHECK_THROWS_AS(session.ping(), ProtocolTimeout);
    session.set_timeout(2000ms);
    while (slow) std::this_thread::sleep_for(10ms);
    CHECK_NOTHROW(session.ping());
    Observation obs;
    obs.dof = 2;
    obs.values = VectorXd::Zero(Observation::size_for(2));
    CHECK(session.act(obs, true) == VectorXd::Constant(2, 0.25));
    session.reset_notice(9);
    session.save("/tmp/unused");
    session = AgentSession(std::make_unique<Loopback>(), 1ms);  // closes the socket
    agent.join();
}

TEST_CASE("training against a remote agent over a unix socket") {
    const std::string path = (std::filesystem::temp_directory_path() / "saferl_test_agent.sock").string();
    Listener listener(Endpoint::parse("unix://" + path));
    std::atomic<int> updates{0}, resets{0};
    std::thread agent([&] {
        auto t = connect(listener.endpoint(), 2000ms);
        serve_agent(*t, 1, updates, resets);
    });
    {
        AgentSession session(listener.accept(2000ms), 2000ms);
        ExternalPolicy policy(session, 1);
        Scenario s = Scenario::find("reach_1dof");
        s.t_max_episode = 10;
        Environment env(s);
        TrainConfig cfg;
        cfg.k_start_steps = 20;
        cfg.t_update_after = 30;
        cfg.t_update_every = 10;
        cfg.n_epochs = 2;
        cfg.n_episodes_per_epoch = 5;
        cfg.t_max_episode = 10;
        cfg.batch_size = 4;
        Trainer trainer(cfg, env, policy, nullptr, 3);
        trainer.run();
        CHECK(trainer.counters().update_calls > 0);
        CHECK(session.violations() == 0);
        session.ping();
        CHECK(updates.load() == trainer.counters().update_calls);
        CHECK(resets.load() == 10);
    }
    agent.join();
}
