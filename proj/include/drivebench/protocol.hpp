#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

#include "drivebench/planner.hpp"

namespace drivebench::protocol {

inline constexpr int kProtoVersion = 1;

/// Bad frame on receive or unencodable content on send.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Peer went away. The harness treats it as a takeover.
class ConnectionClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frames are single lines of JSON, newline-terminated. Optional fields are
// omitted when absent; unknown top-level fields are ignored on decode.
std::string encode_request(const PlannerRequest & req);
std::string encode_reply(const PlannerReply & reply);
PlannerRequest decode_request(std::string_view line);
PlannerReply decode_reply(std::string_view line);

class Connection {
 public:
  virtual ~Connection() = default;
  /// Writes one frame. Throws ConnectionClosed when the peer is gone.
  virtual void send_line(std::string_view line) = 0;
  /// Next line without its newline; nullopt when `timeout` seconds pass
  /// first. Throws ConnectionClosed on end of stream.
  virtual std::optional<std::string> read_line(double timeout) = 0;
};

/// Line framing over a pair of file descriptors.
class FdConnection : public Connection {
 public:
  FdConnection(int read_fd, int write_fd, bool owns = true);
  ~FdConnection() override;
  FdConnection(const FdConnection &) = delete;
  FdConnection & operator=(const FdConnection &) = delete;

  /// Queues the frame and writes what the peer accepts without blocking.
  /// The rest goes out from later calls, so a peer that stops reading
  /// cannot stall the caller.
  void send_line(std::string_view line) override;
  std::optional<std::string> read_line(double timeout) override;
  /// Writes queued bytes for up to `timeout` seconds. True when all are out.
  bool flush(double timeout);
  /// Gives queued bytes up to half a second, then closes.
  void close();

 private:
  void write_some();

  int rfd_;
  int wfd_;
  bool owns_;
  std::string buffer_;
  std::string out_;
};

/// Child process speaking the protocol on its stdin/stdout. The child is
/// terminated when the connection is destroyed.
class SubprocessConnection : public FdConnection {
 public:
  static std::unique_ptr<SubprocessConnection> spawn(const std::vector<std::string> & argv);
  ~SubprocessConnection() override;

 private:
  SubprocessConnection(int rfd, int wfd, pid_t pid) : FdConnection(rfd, wfd), pid_(pid) {}
  pid_t pid_;
};

std::unique_ptr<FdConnection> connect_unix(const std::string & path);

/// Listening unix socket; the path is removed on destruction.
class UnixListener {
 public:
  explicit UnixListener(std::string path);
  ~UnixListener();
  UnixListener(const UnixListener &) = delete;
  UnixListener & operator=(const UnixListener &) = delete;
  /// Blocks until a client connects.
  std::unique_ptr<FdConnection> accept();
  const std::string & path() const { return path_; }

 private:
  std::string path_;
  int fd_;
};

/// Connected pair for in-process tests.
std::pair<std::unique_ptr<FdConnection>, std::unique_ptr<FdConnection>> socket_pair();

enum class ReplyOutcome { ok, timeout, malformed };

/// Turns a reply (or its absence) into a decision, using `fallback` on a
/// timeout, malformed frame or unparseable decision text.
std::pair<decision::DecisionResponse, ProtocolStats> resolve_reply(const PlannerRequest & req, ReplyOutcome outcome,
                                                                   const std::optional<PlannerReply> & reply,
                                                                   Planner & fallback);

/// Sends `req` and waits for the reply with the same id. Replies to older
/// requests (late answers after a timeout) are skipped. Never blocks much
/// past `timeout`.
std::pair<decision::DecisionResponse, ProtocolStats> query_planner(Connection & conn, const PlannerRequest & req,
                                                                   double timeout, Planner & fallback);

// ---- scripted mock planner ----

/// Conjunction of scene tests; an empty predicate always matches.
struct ScenePredicate {
  std::optional<double> red_light_within;  // red or yellow light, stop line within d
  std::optional<bool> emergency_behind;    // emergency vehicle behind in the ego lane
  std::optional<double> pedestrian_within;
  std::optional<double> obstacle_within;   // static obstacle ahead in the ego lane
  std::optional<double> lead_within;       // any vehicle ahead in the ego lane
  std::optional<double> lead_slower_than;  // nearest lead speed below v (requires a lead)
  std::optional<bool> left_free;
  std::optional<bool> right_free;
  std::optional<std::string> instruction_contains;  // case-insensitive
  std::optional<bool> has_instruction;
  std::optional<decision::NavigationCommand> navigation;
  std::optional<double> speed_below;
  std::optional<double> speed_above;
  std::optional<double> junction_within;
  std::optional<std::string> lane;
  std::optional<double> time_after;
  std::optional<double> time_before;

  bool always() const;
  bool matches(const PlannerRequest & req) const;
  static ScenePredicate from_json(const json & j);
};

/// Side lane exists and no actor occupies it from 15 m behind to 20 m ahead.
bool side_lane_free(const sim::SceneDescription & scene, bool left);

struct ScriptEntry {
  ScenePredicate when;
  std::string decision;  // reply text, sent as is
  std::optional<std::string> explanation;
  double delay = 0.0;  // seconds before replying
};

struct MockScript {
  static constexpr int kFormatVersion = 1;
  std::vector<ScriptEntry> entries;

  /// First matching entry. The last entry always matches.
  const ScriptEntry & match(const PlannerRequest & req) const;
  PlannerReply reply_to(const PlannerRequest & req) const;

  static MockScript from_json(const json & doc);
  static MockScript load(const std::filesystem::path & path);
};

/// Serves `script` on `conn` until the peer closes, or until `max_replies`
/// replies were sent (0 = no limit). Malformed request frames are skipped.
void serve_mock_planner(Connection & conn, const MockScript & script, std::size_t max_replies = 0);

/// Mock answered in process. A scripted delay at or past `timeout` counts as
/// a timeout, so results match the same script served over a transport.
class MockPlanner : public Planner {
 public:
  MockPlanner(MockScript script, double timeout, std::unique_ptr<Planner> fallback);
  decision::DecisionResponse decide(const PlannerRequest & req) override;
  void reset() override;
  ProtocolStats stats() const override { return stats_; }
  std::string name() const override { return "mock"; }

 private:
  MockScript script_;
  double timeout_;
  std::unique_ptr<Planner> fallback_;
  ProtocolStats stats_;
};

/// Planner behind a transport. reset() opens a fresh connection for the
/// next episode.
class ExternalPlanner : public Planner {
 public:
  using Connector = std::function<std::unique_ptr<Connection>()>;
  ExternalPlanner(Connector connect, double timeout, std::unique_ptr<Planner> fallback, std::string label);
  decision::DecisionResponse decide(const PlannerRequest & req) override;
  void reset() override;
  ProtocolStats stats() const override { return stats_; }
  std::string name() const override { return label_; }

 private:
  Connector connect_;
  double timeout_;
  std::unique_ptr<Planner> fallback_;
  std::string label_;
  std::unique_ptr<Connection> conn_;
  ProtocolStats stats_;
};

}  // namespace drivebench::protocol
