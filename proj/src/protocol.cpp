#include "saferl/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <set>

#include "saferl/errors.hpp"

namespace saferl::protocol {

using nlohmann::json;

std::string encode(const json& message) { return message.dump(); }

namespace {

json header(std::int64_t id, const char* type) { return {{"v", kVersion}, {"id", id}, {"type", type}}; }

json to_array(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

// Observation without its goal block.
Eigen::VectorXd state_part(const Observation& o) {
    Eigen::VectorXd s(o.values.size() - o.dof);
    s << o.values.head(2 * o.dof), o.values.tail(o.values.size() - 3 * o.dof);
    return s;
}

[[noreturn]] void violation(const std::string& what) { throw ProtocolViolation("agent protocol: " + what); }

}  // namespace

json ping_request(std::int64_t id) { return header(id, "ping"); }

json act_request(std::int64_t id, const Observation& obs, bool explore) {
    json j = header(id, "act");
    j["obs"] = to_array(state_part(obs));
    j["goal"] = to_array(obs.goal());
    j["explore"] = explore;
    return j;
}

json update_request(std::int64_t id, const Minibatch& batch) {
    json obs = json::array(), goal = json::array(), action = json::array(), reward = json::array(),
         next = json::array(), done = json::array();
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const Transition& t = batch[k];
        obs.push_back(to_array(state_part(t.s)));
        goal.push_back(to_array(t.s.goal()));
        action.push_back(to_array(t.a));
        reward.push_back(t.r);
        next.push_back(to_array(state_part(t.s_next)));
        done.push_back(t.done);
    }
    json j = header(id, "update");
    j["batch"] = {{"obs", std::move(obs)},       {"goal", std::move(goal)},
                  {"action", std::move(action)}, {"reward", std::move(reward)},
                  {"next_obs", std::move(next)}, {"done", std::move(done)}};
    return j;
}

json reset_notice_request(std::int64_t id, std::uint64_t seed) {
    json j = header(id, "reset_notice");
    j["seed"] = seed;
    return j;
}

json save_request(std::int64_t id, const std::string& path) {
    json j = header(id, "save");
    j["path"] = path;
    return j;
}

const char* reply_type_for(const std::string& request_type) {
    if (request_type == "ping") return "pong";
    if (request_type == "act") return "action";
    if (request_type == "update") return "diagnostics";
    if (request_type == "reset_notice" || request_type == "save") return "ack";
    throw std::invalid_argument("unknown request type " + request_type);
}

json decode_reply(const std::string& line, std::int64_t expected_id, const std::string& request_type) {
    if (line.size() > kMaxLineBytes) violation("reply too long");
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        violation(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) violation("reply is not an object");
    const auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer() || v->get<std::int64_t>() != kVersion) {
        violation("missing or unsupported version");
    }
    const auto id = j.find("id");
    if (id == j.end() || !id->is_number_integer()) violation("missing id");
    if (id->get<std::int64_t>() != expected_id) {
        violation("reply id " + id->dump() + " does not match outstanding request " +
                  std::to_string(expected_id));
    }
    const auto type = j.find("type");
    if (type == j.end() || !type->is_string()) violation("missing type");
    const std::string t = type->get<std::string>();

    std::set<std::string> allowed{"v", "id", "type"};
    if (t == "error") {
        const auto msg = j.find("message");
        violation("agent reported an error: " +
                  (msg != j.end() && msg->is_string() ? msg->get<std::string>() : std::string("?")));
    }
    const std::string want = reply_type_for(request_type);
    if (t != want) violation("expected a '" + want + "' reply, got '" + t + "'");
    if (t == "action") {
        allowed.insert("action");
        const auto a = j.find("action");
        if (a == j.end() || !a->is_array()) violation("action must be an array");
        for (const auto& x : *a) {
            if (!x.is_number()) violation("action components must be numbers");
        }
    } else if (t == "diagnostics") {
        allowed.insert("diagnostics");
        const auto d = j.find("diagnostics");
        if (d == j.end() || !d->is_object()) violation("diagnostics must be an object");
    }
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) violation("unexpected key '" + key + "'");
    }
    return j;
}

Eigen::VectorXd action_from_reply(const json& reply, int dof) {
    const json& a = reply.at("action");
    if (static_cast<int>(a.size()) != dof) {
        violation("action has " + std::to_string(a.size()) + " components, expected " + std::to_string(dof));
    }
    Eigen::VectorXd out(dof);
    for (int i = 0; i < dof; ++i) {
        const double x = a[static_cast<std::size_t>(i)].get<double>();
        if (!std::isfinite(x) || x < -1.0 || x > 1.0) violation("action component outside [-1, 1]");
        out[i] = x;
    }
    return out;
}

// ---------------------------------------------------------------- endpoints

Endpoint Endpoint::parse(const std::string& text) {
    Endpoint e;
    std::string rest = text;
    if (rest.rfind("unix://", 0) == 0) {
        e.kind = Kind::Unix;
        e.path = rest.substr(7);
        if (e.path.empty()) throw ConfigError("endpoint: empty unix socket path");
        if (e.path.size() >= sizeof(sockaddr_un{}.sun_path)) throw ConfigError("endpoint: unix path too long");
        return e;
    }
    if (rest.rfind("tcp://", 0) == 0) rest = rest.substr(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw ConfigError("endpoint: expected host:port in '" + text + "'");
    e.host = rest.substr(0, colon);
    if (e.host.empty()) e.host = "127.0.0.1";
    try {
        std::size_t used = 0;
        e.port = std::stoi(rest.substr(colon + 1), &used);
        if (used != rest.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ConfigError("endpoint: bad port in '" + text + "'");
    }
    if (e.port < 0 || e.port > 65535) throw ConfigError("endpoint: port out of range");
    return e;
}

std::string Endpoint::to_string() const {
    return kind == Kind::Unix ? "unix://" + path : "tcp://" + host + ":" + std::to_string(port);
}

namespace {

[[noreturn]] void sys_error(const std::string& what) {
    throw ConfigError(what + ": " + std::strerror(errno));
}

sockaddr_in tcp_address(const Endpoint& e) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
        throw ConfigError("endpoint: cannot resolve host " + e.host);
    }
    sockaddr_in a = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
    freeaddrinfo(res);
    a.sin_port = htons(static_cast<std::uint16_t>(e.port));
    return a;
}

sockaddr_un unix_address(const Endpoint& e) {
    sockaddr_un a{};
    a.sun_family = AF_UNIX;
    std::strncpy(a.sun_path, e.path.c_str(), sizeof(a.sun_path) - 1);
    return a;
}

bool wait_fd(int fd, short events, std::chrono::milliseconds timeout) {
    pollfd p{fd, events, 0};
    int rc;
    do {
        rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    if (rc < 0) sys_error("poll");
    return rc > 0;
}

}  // namespace

SocketTransport::SocketTransport(int fd) : fd_(fd) {}

SocketTransport::~SocketTransport() {
    if (fd_ >= 0) ::close(fd_);
}

void SocketTransport::send_line(const std::string& line) {
    std::string data = line;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolViolation(std::string("agent protocol: send failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string SocketTransport::recv_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (buffer_.size() > kMaxLineBytes) {
            buffer_.clear();
            violation("line exceeds size limit");
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0 || !wait_fd(fd_, POLLIN, left)) {
            throw ProtocolTimeout("agent protocol: no reply within " + std::to_string(timeout.count()) + " ms");
        }
        char chunk[65536];
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            violation(std::string("recv failed: ") + std::strerror(errno));
        }
        if (n == 0) violation("agent disconnected");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

Listener::Listener(const Endpoint& endpoint) : bound_(endpoint) {
    if (endpoint.kind == Endpoint::Kind::Unix) {
        fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd_ < 0) sys_error("socket");
        ::unlink(endpoint.path.c_str());
        const sockaddr_un a = unix_address(endpoint);
        if (::bind(fd_, reinterpret_cast<const sockaddr*>(&a), sizeof a) < 0) {
            ::close(fd_);
            sys_error("bind " + endpoint.path);
        }
    } else {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) sys_error("socket");
        const int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        const sockaddr_in a = tcp_address(endpoint);
        if (::bind(fd_, reinterpret_cast<const sockaddr*>(&a), sizeof a) < 0) {
            ::close(fd_);
            sys_error("bind " + endpoint.to_string());
        }
        sockaddr_in got{};
        socklen_t len = sizeof got;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&got), &len);
        bound_.port = ntohs(got.sin_port);
    }
    if (::listen(fd_, 1) < 0) {
        ::close(fd_);
        sys_error("listen");
    }
}

Listener::~Listener() {
    if (fd_ >= 0) ::close(fd_);
    if (bound_.kind == Endpoint::Kind::Unix) ::unlink(bound_.path.c_str());
}

std::unique_ptr<SocketTransport> Listener::accept(std::chrono::milliseconds timeout) {
    if (!wait_fd(fd_, POLLIN, timeout)) {
        throw ProtocolTimeout("agent protocol: no agent connected to " + bound_.to_string());
    }
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c < 0) sys_error("accept");
    if (bound_.kind == Endpoint::Kind::Tcp) {
        const int one = 1;
        ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    return std::make_unique<SocketTransport>(c);
}

std::unique_ptr<SocketTransport> connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        int fd;
        int rc;
        if (endpoint.kind == Endpoint::Kind::Unix) {
            fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
            const sockaddr_un a = unix_address(endpoint);
            rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&a), sizeof a);
        } else {
            fd = ::socket(AF_INET, SOCK_STREAM, 0);
            const sockaddr_in a = tcp_address(endpoint);
            rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&a), sizeof a);
            const int one = 1;
            if (rc == 0) ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        }
        if (rc == 0) return std::make_unique<SocketTransport>(fd);
        ::close(fd);
        if (std::chrono::steady_clock::now() >= deadline) {
            throw ProtocolTimeout("agent protocol: cannot connect to " + endpoint.to_string());
        }
        ::usleep(20000);
    }
}

// ---------------------------------------------------------------- session

AgentSession::AgentSession(std::unique_ptr<LineTransport> transport, std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {}

json AgentSession::exchange(const json& request) {
    const std::int64_t id = request.at("id").get<std::int64_t>();
    ++next_id_;
    transport_->send_line(encode(request));
    try {
        while (true) {
            std::string line = transport_->recv_line(timeout_);
            // Late answers to requests that already timed out are dropped.
            if (!abandoned_.empty()) {
                const json peek = json::parse(line, nullptr, false);
                if (peek.is_object() && peek.contains("id") && peek["id"].is_number_integer() &&
                    abandoned_.erase(peek["id"].get<std::int64_t>())) {
                    continue;
                }
            }
            return decode_reply(line, id, request.at("type").get<std::string>());
        }
    } catch (const ProtocolTimeout&) {
        abandoned_.insert(id);
        ++violations_;
        throw;
    } catch (const ProtocolViolation&) {
        ++violations_;
        throw;
    }
}

void AgentSession::ping() { exchange(ping_request(next_id_)); }

Eigen::VectorXd AgentSession::act(const Observation& obs, bool explore) {
    const json reply = exchange(act_request(next_id_, obs, explore));
    try {
        return action_from_reply(reply, obs.dof);
    } catch (const ProtocolViolation&) {
        ++violations_;
        throw;
    }
}

json AgentSession::update(const Minibatch& batch) {
    return exchange(update_request(next_id_, batch)).at("diagnostics");
}

void AgentSession::reset_notice(std::uint64_t seed) { exchange(reset_notice_request(next_id_, seed)); }

void AgentSession::save(const std::string& path) { exchange(save_request(next_id_, path)); }

Eigen::VectorXd ExternalPolicy::act(const Observation& obs, bool explore) {
    if (obs.dof != dof_) throw std::invalid_argument("external policy: observation dof mismatch");
    return session_.act(obs, explore);
}

json ExternalPolicy::update(const Minibatch& batch, const TrainConfig&) { return session_.update(batch); }

}  // namespace saferl::protocol
