#pragma once

// Agent wire protocol: newline-delimited JSON. The simulator side listens,
// an agent connects, and from then on the simulator issues requests and the
// agent answers each one before the next is sent.
//
//   request                                   reply
//   {"v":1,"id":n,"type":"ping"}              {"v":1,"id":n,"type":"pong"}
//   {"v":1,"id":n,"type":"act",               {"v":1,"id":n,"type":"action",
//    "obs":[..],"goal":[..],"explore":b}        "action":[..]}
//   {"v":1,"id":n,"type":"update",            {"v":1,"id":n,"type":"diagnostics",
//    "batch":{"obs","goal","action",            "diagnostics":{..}}
//             "reward","next_obs","done"}}
//   {"v":1,"id":n,"type":"reset_notice",      {"v":1,"id":n,"type":"ack"}
//    "seed":s}
//   {"v":1,"id":n,"type":"save","path":p}     {"v":1,"id":n,"type":"ack"}
//
// "obs" is the observation without its goal block (q, qd, end effector,
// relative keypoints); "goal" is the goal block. Keys are emitted sorted
// with no whitespace. Replies with unknown keys, a wrong version, id or
// type, or an out-of-range action are rejected with ProtocolViolation. An
// agent may answer any request with {"v":1,"id":n,"type":"error",
// "message":".."}, which is also surfaced as ProtocolViolation.

#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <set>
#include <string>

#include <Eigen/Core>

#include "json.hpp"
#include "saferl/rl.hpp"

namespace saferl::protocol {

inline constexpr int kVersion = 1;
inline constexpr std::size_t kMaxLineBytes = 64u << 20;

// ---- codec

std::string encode(const nlohmann::json& message);

nlohmann::json ping_request(std::int64_t id);
nlohmann::json act_request(std::int64_t id, const Observation& obs, bool explore);
nlohmann::json update_request(std::int64_t id, const Minibatch& batch);
nlohmann::json reset_notice_request(std::int64_t id, std::uint64_t seed);
nlohmann::json save_request(std::int64_t id, const std::string& path);

/// Reply type expected for a request type ("act" -> "action", ...).
const char* reply_type_for(const std::string& request_type);

/// Parses and validates one reply line against the outstanding request.
/// Returns the reply object; throws ProtocolViolation.
nlohmann::json decode_reply(const std::string& line, std::int64_t expected_id,
                            const std::string& request_type);

/// Action vector from a validated "action" reply, checked for length `dof`
/// and componentwise membership in [-1, 1].
Eigen::VectorXd action_from_reply(const nlohmann::json& reply, int dof);

// ---- transport

class LineTransport {
public:
    virtual ~LineTransport() = default;
    virtual void send_line(const std::string& line) = 0;
    /// Next line without its terminator. Throws ProtocolTimeout when nothing
    /// arrives in time and ProtocolViolation when the peer disconnects.
    virtual std::string recv_line(std::chrono::milliseconds timeout) = 0;
};

/// "tcp://host:port", "host:port" or "unix:///path/to/socket".
struct Endpoint {
    enum class Kind { Tcp, Unix } kind{Kind::Tcp};
    std::string host{"127.0.0.1"};
    int port{0};
    std::string path;

    static Endpoint parse(const std::string& text);
    std::string to_string() const;
};

class SocketTransport : public LineTransport {
public:
    explicit SocketTransport(int fd);
    ~SocketTransport() override;
    SocketTransport(const SocketTransport&) = delete;
    SocketTransport& operator=(const SocketTransport&) = delete;

    void send_line(const std::string& line) override;
    std::string recv_line(std::chrono::milliseconds timeout) override;

private:
    int fd_;
    std::string buffer_;
};

/// Listening socket. Port 0 picks a free port, reported by endpoint().
class Listener {
public:
    explicit Listener(const Endpoint& endpoint);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    const Endpoint& endpoint() const { return bound_; }
    std::unique_ptr<SocketTransport> accept(std::chrono::milliseconds timeout);

private:
    int fd_{-1};
    Endpoint bound_;
};

std::unique_ptr<SocketTransport> connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

// ---- session

/// Simulator side of a connection. One request outstanding at a time; a
/// violation leaves the session usable for the next request. Replies that
/// arrive after their request timed out are discarded.
class AgentSession {
public:
    explicit AgentSession(std::unique_ptr<LineTransport> transport,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));

    void ping();
    Eigen::VectorXd act(const Observation& obs, bool explore);
    nlohmann::json update(const Minibatch& batch);
    void reset_notice(std::uint64_t seed);
    void save(const std::string& path);

    std::int64_t requests_sent() const { return next_id_ - 1; }
    std::int64_t violations() const { return violations_; }
    void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

private:
    nlohmann::json exchange(const nlohmann::json& request);

    std::unique_ptr<LineTransport> transport_;
    std::chrono::milliseconds timeout_;
    std::int64_t next_id_{1};
    std::int64_t violations_{0};
    std::set<std::int64_t> abandoned_;
};

/// Policy backed by a remote agent.
class ExternalPolicy : public Policy {
public:
    ExternalPolicy(AgentSession& session, int dof) : session_(session), dof_(dof) {}
    std::string name() const override { return "external"; }
    Eigen::VectorXd act(const Observation& obs, bool explore) override;
    nlohmann::json update(const Minibatch& batch, const TrainConfig& config) override;
    void on_episode_start(std::uint64_t seed) override { session_.reset_notice(seed); }
    void save(const std::filesystem::path& path) override { session_.save(path.string()); }

private:
    AgentSession& session_;
    int dof_;
};

}  // namespace saferl::protocol
