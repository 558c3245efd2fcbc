#pragma once

// JSON-lines bridge to external policies. Framing, message shapes and the
// connection lifecycle are documented in docs/bridge_protocol.md.

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stc/episode.hpp"
#include "stc/policy.hpp"

namespace stc {

using Json = nlohmann::json;

/// A bidirectional stream of newline-terminated UTF-8 lines.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  /// Throws ProtocolError when the peer is gone.
  virtual void send_line(std::string_view line) = 0;
  /// nullopt on timeout; ProtocolError on end of stream. A negative timeout
  /// waits indefinitely.
  virtual std::optional<std::string> receive_line(std::chrono::milliseconds timeout) = 0;
};

/// Lines over a pair of file descriptors (pipes or a socket).
class FdTransport : public LineTransport {
 public:
  FdTransport(int read_fd, int write_fd, bool owns_fds);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void send_line(std::string_view line) override;
  std::optional<std::string> receive_line(std::chrono::milliseconds timeout) override;

 protected:
  FdTransport() : FdTransport(-1, -1, true) {}
  void attach(int read_fd, int write_fd);
  void close_fds();

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string buffer_;
  static constexpr std::size_t kMaxLine = 1 << 20;
};

/// Spawns `argv` with its stdin/stdout connected to this transport.
class ChildProcessTransport final : public FdTransport {
 public:
  explicit ChildProcessTransport(const std::vector<std::string>& argv);
  ~ChildProcessTransport() override;

  int pid() const { return pid_; }
  /// Closes the pipes and reaps the child; returns its exit status.
  int wait();

 private:
  int pid_ = -1;
  bool reaped_ = false;
  int status_ = 0;
};

/// Connects to host:port over TCP.
std::unique_ptr<FdTransport> connect_tcp(const std::string& host, int port);

struct BridgeOptions {
  std::chrono::milliseconds timeout{10000};
  /// Engine-driven mode sends reset messages; in server mode the peer does.
  bool send_reset = true;
};

/// Environment metadata sent once at connection start.
Json bridge_meta(const EnvSpec& spec);

Json obs_message(int episode, int k, const Observation& obs, const StepFeedback* previous,
                 bool done, std::optional<TerminationCause> cause);

/// Parses an action line. `u` gives input values; `u_idx` indexes the
/// per-channel action levels. Throws ProtocolError on any violation.
Action parse_action(const EnvSpec& spec, std::string_view line);

class BridgePolicy final : public Policy {
 public:
  BridgePolicy(LineTransport& transport, BridgeOptions options = {});

  void reset(const EnvSpec& spec, int episode, std::uint64_t seed) override;
  Action propose(const EnvSpec& spec, const DecisionContext& ctx) override;
  void finish(const EnvSpec& spec, const EpisodeEnd& end) override;

  /// Sends the meta message (engine-driven mode does this once).
  void send_meta(const EnvSpec& spec);
  void send_close();

 private:
  LineTransport& transport_;
  BridgeOptions options_;
  bool faulted_ = false;
  std::string fault_text_;
};

/// Owns a child process peer for engine-driven evaluation.
class ChildBridgePolicy final : public Policy {
 public:
  ChildBridgePolicy(const std::vector<std::string>& argv, const EnvSpec& spec,
                    BridgeOptions options = {});
  ~ChildBridgePolicy() override;

  void reset(const EnvSpec& spec, int episode, std::uint64_t seed) override {
    policy_.reset(spec, episode, seed);
  }
  Action propose(const EnvSpec& spec, const DecisionContext& ctx) override {
    return policy_.propose(spec, ctx);
  }
  void finish(const EnvSpec& spec, const EpisodeEnd& end) override { policy_.finish(spec, end); }

 private:
  ChildProcessTransport transport_;
  BridgePolicy policy_;
};

struct ServeStats {
  int episodes = 0;
  int faults = 0;
};

/// Serves one connection: sends meta, then runs one episode per reset
/// message until close or end of stream. Faults are reported with an
/// {"type":"error"} line; the server keeps going.
ServeStats serve_connection(const EnvSpec& spec, LineTransport& transport,
                            const BridgeOptions& options, std::ostream* log = nullptr);

/// Accepts TCP connections on `port` (0 picks one; `on_listen` receives
/// the bound port) and serves them sequentially. Returns after
/// `max_connections` connections when positive.
void serve_tcp(const EnvSpec& spec, int port, const BridgeOptions& options, int max_connections,
               const std::function<void(int)>& on_listen, std::ostream* log = nullptr);

}  // namespace stc
