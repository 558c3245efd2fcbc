#include "stc/bridge.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <ostream>

#include "stc/errors.hpp"

extern char** environ;

namespace stc {
namespace {

void ignore_sigpipe() {
  // A vanished peer must surface as EPIPE, not kill the engine.
  static const bool done = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

Json vector_json(const auto& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Json reward_json(const RewardTerms& r) {
  return Json{{"stability", r.stability},
              {"communication", r.communication},
              {"safety", r.safety},
              {"terminal", r.terminal},
              {"total", r.total}};
}

int require_int(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    throw ProtocolError(std::string("field '") + key + "' must be an integer");
  }
  return it->get<int>();
}

/// True when an action echoes an ep/k that is not the pending decision.
bool is_stale(const std::string& line, int episode, int k) {
  const Json j = Json::parse(line, nullptr, false);
  if (!j.is_object()) return false;
  const auto ep = j.find("ep");
  const auto kk = j.find("k");
  if (ep != j.end() && ep->is_number_integer() && ep->get<long>() != episode) return true;
  return kk != j.end() && kk->is_number_integer() && kk->get<long>() != k;
}

}  // namespace

// --- transports -------------------------------------------------------------

FdTransport::FdTransport(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {
  ignore_sigpipe();
}

FdTransport::~FdTransport() { close_fds(); }

void FdTransport::attach(int read_fd, int write_fd) {
  read_fd_ = read_fd;
  write_fd_ = write_fd;
}

void FdTransport::close_fds() {
  if (!owns_) return;
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
}

void FdTransport::send_line(std::string_view line) {
  if (write_fd_ < 0) throw ProtocolError("transport is closed");
  std::string data(line);
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(errno_text("bridge write failed"));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdTransport::receive_line(std::chrono::milliseconds timeout) {
  if (read_fd_ < 0) throw ProtocolError("transport is closed");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (buffer_.size() > kMaxLine) throw ProtocolError("bridge line exceeds 1 MiB");

    int wait_ms = -1;
    if (timeout.count() >= 0) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(errno_text("bridge poll failed"));
    }
    if (ready == 0) return std::nullopt;

    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(errno_text("bridge read failed"));
    }
    if (n == 0) throw ProtocolError("bridge peer closed the stream");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

ChildProcessTransport::ChildProcessTransport(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ConfigError("bridge command is empty");
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw std::runtime_error(errno_text("pipe"));
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw std::runtime_error(errno_text("pipe"));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
  for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
    posix_spawn_file_actions_addclose(&actions, fd);
  }
  std::vector<char*> args;
  for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw ConfigError("cannot start bridge peer '" + argv[0] + "': " + std::strerror(rc));
  }
  pid_ = pid;
  attach(from_child[0], to_child[1]);
}

ChildProcessTransport::~ChildProcessTransport() { wait(); }

int ChildProcessTransport::wait() {
  close_fds();
  if (!reaped_ && pid_ > 0) {
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    status_ = status;
    reaped_ = true;
  }
  return status_;
}

std::unique_ptr<FdTransport> connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
  return std::make_unique<FdTransport>(fd, fd, true);
}

// --- messages ---------------------------------------------------------------

Json bridge_meta(const EnvSpec& spec) {
  Json k = Json::array();
  for (Eigen::Index i = 0; i < spec.cert.k.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < spec.cert.k.cols(); ++j) row.push_back(spec.cert.k(i, j));
    k.push_back(row);
  }
  return Json{{"type", "meta"},
              {"protocol", 1},
              {"plant", std::string(to_string(spec.plant.id()))},
              {"n", spec.state_dim()},
              {"m", spec.input_dim()},
              {"tau_grid", spec.grid.values()},
              {"u_max", vector_json(spec.plant.u_limits())},
              {"u_levels", spec.action_levels},
              {"K", k},
              {"shield", std::string(to_string(spec.shield.mode))},
              {"w_c", spec.reward.w_c},
              {"t_max", spec.t_max}};
}

Json obs_message(int episode, int k, const Observation& obs, const StepFeedback* previous,
                 bool done, std::optional<TerminationCause> cause) {
  Json j{{"type", "obs"},  {"ep", episode},  {"k", k},          {"x", vector_json(obs.x)},
         {"msi", obs.msi}, {"b", obs.b},     {"done", done}};
  if (previous != nullptr) {
    j["reward"] = previous->reward.total;
    j["terms"] = reward_json(previous->reward);
    j["fired"] = previous->fired;
    j["predicate"] = previous->predicate;
    j["tau_idx_exec"] = previous->tau_index_executed;
  }
  if (cause) j["cause"] = std::string(to_string(*cause));
  return j;
}

Action parse_action(const EnvSpec& spec, std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ProtocolError(std::string("malformed action line: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("action must be a JSON object");
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string() || *type != "act") {
    throw ProtocolError("expected a message of type 'act'");
  }
  const int m = spec.input_dim();
  Action a;
  a.u.resize(m);
  const auto u = j.find("u");
  const auto u_idx = j.find("u_idx");
  if ((u == j.end()) == (u_idx == j.end())) {
    throw ProtocolError("action needs exactly one of 'u' or 'u_idx'");
  }
  const Json& arr = u != j.end() ? *u : *u_idx;
  if (!arr.is_array() || static_cast<int>(arr.size()) != m) {
    throw ProtocolError("action input must be an array of length " + std::to_string(m));
  }
  for (int i = 0; i < m; ++i) {
    const Json& v = arr[static_cast<std::size_t>(i)];
    if (u != j.end()) {
      if (!v.is_number()) throw ProtocolError("action input values must be numbers");
      a.u(i) = v.get<double>();
    } else {
      const auto& levels = spec.action_levels[static_cast<std::size_t>(i)];
      if (!v.is_number_integer() || v.get<long>() < 0 ||
          v.get<long>() >= static_cast<long>(levels.size())) {
        throw ProtocolError("u_idx[" + std::to_string(i) + "] outside the action levels");
      }
      a.u(i) = levels[v.get<std::size_t>()];
    }
  }
  if (!a.u.allFinite()) throw ProtocolError("action input is not finite");
  a.tau_index = require_int(j, "tau_idx");
  if (!spec.grid.valid_index(a.tau_index)) {
    throw ProtocolError("tau_idx " + std::to_string(a.tau_index) + " outside the grid");
  }
  return a;
}

// --- bridge policy ----------------------------------------------------------

BridgePolicy::BridgePolicy(LineTransport& transport, BridgeOptions options)
    : transport_(transport), options_(options) {}

void BridgePolicy::send_meta(const EnvSpec& spec) { transport_.send_line(bridge_meta(spec).dump()); }

void BridgePolicy::send_close() { transport_.send_line(Json{{"type", "close"}}.dump()); }

void BridgePolicy::reset(const EnvSpec& /*spec*/, int episode, std::uint64_t seed) {
  faulted_ = false;
  if (!options_.send_reset) return;
  try {
    transport_.send_line(Json{{"type", "reset"}, {"ep", episode}, {"seed", seed}}.dump());
  } catch (const ProtocolError& e) {
    faulted_ = true;
    fault_text_ = e.what();
    throw;
  }
}

Action BridgePolicy::propose(const EnvSpec& spec, const DecisionContext& ctx) {
  try {
    transport_.send_line(obs_message(ctx.episode, ctx.k, ctx.obs, ctx.previous, false, {}).dump());
    const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
    for (;;) {
      auto left = options_.timeout;
      if (left.count() >= 0) {
        left = std::max(std::chrono::milliseconds(0),
                        std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now()));
      }
      const auto line = transport_.receive_line(left);
      if (!line) throw ProtocolError("bridge peer did not answer within the decision timeout");
      // A late answer to an earlier, timed-out decision is dropped.
      if (is_stale(*line, ctx.episode, ctx.k)) continue;
      return parse_action(spec, *line);
    }
  } catch (const ProtocolError& e) {
    faulted_ = true;
    fault_text_ = e.what();
    throw;
  }
}

void BridgePolicy::finish(const EnvSpec& /*spec*/, const EpisodeEnd& end) {
  try {
    if (faulted_) {
      transport_.send_line(Json{{"type", "error"}, {"ep", end.episode}, {"message", fault_text_}}.dump());
    } else {
      transport_.send_line(
          obs_message(end.episode, end.k, end.final_obs, end.last, true, end.cause).dump());
    }
  } catch (const ProtocolError&) {
    // The peer is gone; the episode outcome is already recorded.
  }
}

ChildBridgePolicy::ChildBridgePolicy(const std::vector<std::string>& argv, const EnvSpec& spec,
                                     BridgeOptions options)
    : transport_(argv), policy_(transport_, options) {
  policy_.send_meta(spec);
}

ChildBridgePolicy::~ChildBridgePolicy() {
  try {
    policy_.send_close();
  } catch (const std::exception&) {
  }
  transport_.wait();
}

// --- server -----------------------------------------------------------------

ServeStats serve_connection(const EnvSpec& spec, LineTransport& transport,
                            const BridgeOptions& options, std::ostream* log) {
  ServeStats stats;
  BridgeOptions episode_options = options;
  episode_options.send_reset = false;
  BridgePolicy policy(transport, episode_options);
  try {
    policy.send_meta(spec);
    for (;;) {
      const auto line = transport.receive_line(std::chrono::milliseconds(-1));
      if (!line) continue;
      if (line->empty()) continue;
      Json msg;
      try {
        msg = Json::parse(*line);
      } catch (const Json::parse_error&) {
        msg = nullptr;
      }
      const std::string type =
          msg.is_object() && msg.contains("type") && msg["type"].is_string() ? msg["type"].get<std::string>() : "";
      if (type == "close") break;
      if (type != "reset") {
        ++stats.faults;
        if (log) *log << "serve-env: expected reset or close, got: " << *line << '\n';
        transport.send_line(
            Json{{"type", "error"}, {"message", "expected a reset or close message"}}.dump());
        continue;
      }
      int episode = 0;
      std::uint64_t seed = 0;
      try {
        episode = require_int(msg, "ep");
        if (!msg.contains("seed") || !msg["seed"].is_number_unsigned()) {
          throw ProtocolError("field 'seed' must be a non-negative integer");
        }
        seed = msg["seed"].get<std::uint64_t>();
      } catch (const ProtocolError& e) {
        ++stats.faults;
        transport.send_line(Json{{"type", "error"}, {"message", e.what()}}.dump());
        continue;
      }
      const EpisodeTrace trace = run_episode(spec, policy, seed, episode);
      ++stats.episodes;
      if (trace.cause == TerminationCause::protocol_fault) {
        ++stats.faults;
        if (log) *log << "serve-env: episode " << episode << " aborted: " << trace.fault << '\n';
      }
    }
  } catch (const ProtocolError& e) {
    // End of stream or a dead peer ends the connection.
    if (log) *log << "serve-env: connection ended: " << e.what() << '\n';
  }
  return stats;
}

void serve_tcp(const EnvSpec& spec, int port, const BridgeOptions& options, int max_connections,
               const std::function<void(int)>& on_listen, std::ostream* log) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw std::runtime_error(errno_text("socket"));
  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listener, 4) != 0) {
    const std::string msg = errno_text("cannot listen");
    ::close(listener);
    throw std::runtime_error(msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listen) on_listen(ntohs(addr.sin_port));

  for (int served = 0; max_connections <= 0 || served < max_connections; ++served) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      ::close(listener);
      throw std::runtime_error(errno_text("accept"));
    }
    FdTransport transport(fd, fd, true);
    serve_connection(spec, transport, options, log);
  }
  ::close(listener);
}

}  // namespace stc
