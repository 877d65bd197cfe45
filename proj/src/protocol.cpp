#include "drivebench/protocol.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <climits>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

extern char ** environ;

namespace drivebench::protocol {

using decision::DecisionResponse;

namespace {

using Clock = std::chrono::steady_clock;

std::string dump_line(const ordered_json & j) {
  try {
    return j.dump(-1, ' ', false, ordered_json::error_handler_t::strict) + "\n";
  } catch (const ordered_json::exception & e) {
    throw ProtocolError(std::string("unencodable frame: ") + e.what());
  }
}

json parse_frame(std::string_view line, std::string_view type) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception & e) {
    throw ProtocolError(std::string("malformed frame: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("frame is not an object");
  if (!j.contains("proto_version") || j["proto_version"] != kProtoVersion) {
    throw ProtocolError("unsupported proto_version");
  }
  if (!j.contains("type") || j["type"] != type) throw ProtocolError("expected a " + std::string(type) + " frame");
  if (!j.contains("id") || !j["id"].is_number_unsigned()) throw ProtocolError("frame id must be a non-negative integer");
  return j;
}

std::optional<std::string> optional_string(const json & j, const char * key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw ProtocolError(std::string("field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

// ---- frames ----

std::string encode_request(const PlannerRequest & req) {
  if (req.system_message.empty()) throw ProtocolError("request system_message is empty");
  ordered_json j;
  j["proto_version"] = kProtoVersion;
  j["type"] = "request";
  j["id"] = req.id;
  j["system_message"] = req.system_message;
  j["scene"] = req.scene.to_json();
  j["navigation_command"] = std::string(decision::to_string(req.navigation));
  if (req.user_instruction) j["user_instruction"] = *req.user_instruction;
  if (!req.dialogue_history.empty()) {
    ordered_json h = ordered_json::array();
    for (const auto & [prompt, response] : req.dialogue_history) {
      ordered_json turn;
      turn["prompt"] = prompt;
      turn["response"] = response;
      h.push_back(turn);
    }
    j["dialogue_history"] = h;
  }
  return dump_line(j);
}

std::string encode_reply(const PlannerReply & reply) {
  ordered_json j;
  j["proto_version"] = kProtoVersion;
  j["type"] = "reply";
  j["id"] = reply.id;
  j["decision"] = reply.decision_text;
  if (reply.explanation) j["explanation"] = *reply.explanation;
  return dump_line(j);
}

PlannerRequest decode_request(std::string_view line) {
  const json j = parse_frame(line, "request");
  PlannerRequest req;
  req.id = j["id"].get<std::uint64_t>();
  const auto msg = optional_string(j, "system_message");
  if (!msg || msg->empty()) throw ProtocolError("request system_message missing or empty");
  req.system_message = *msg;
  if (!j.contains("scene")) throw ProtocolError("request scene missing");
  try {
    req.scene = sim::SceneDescription::from_json(j["scene"]);
  } catch (const std::exception & e) {
    throw ProtocolError(std::string("bad scene: ") + e.what());
  }
  const auto nav = optional_string(j, "navigation_command");
  if (!nav) throw ProtocolError("request navigation_command missing");
  try {
    req.navigation = decision::navigation_from_string(*nav);
  } catch (const std::invalid_argument & e) {
    throw ProtocolError(e.what());
  }
  req.user_instruction = optional_string(j, "user_instruction");
  if (j.contains("dialogue_history") && !j["dialogue_history"].is_null()) {
    if (!j["dialogue_history"].is_array()) throw ProtocolError("dialogue_history must be an array");
    for (const auto & turn : j["dialogue_history"]) {
      if (!turn.is_object()) throw ProtocolError("dialogue_history entries must be objects");
      const auto p = optional_string(turn, "prompt");
      const auto r = optional_string(turn, "response");
      if (!p || !r) throw ProtocolError("dialogue_history entry needs prompt and response");
      req.dialogue_history.emplace_back(*p, *r);
    }
  }
  return req;
}

PlannerReply decode_reply(std::string_view line) {
  const json j = parse_frame(line, "reply");
  PlannerReply r;
  r.id = j["id"].get<std::uint64_t>();
  const auto d = optional_string(j, "decision");
  if (!d) throw ProtocolError("reply decision missing");
  r.decision_text = *d;
  r.explanation = optional_string(j, "explanation");
  return r;
}

// ---- transports ----

FdConnection::FdConnection(int read_fd, int write_fd, bool owns) : rfd_(read_fd), wfd_(write_fd), owns_(owns) {
  ignore_sigpipe();
}

FdConnection::~FdConnection() { close(); }

void FdConnection::close() {
  if (wfd_ >= 0 && !out_.empty()) {
    try {
      flush(0.5);
    } catch (const ConnectionClosed &) {
    }
  }
  out_.clear();
  if (owns_) {
    if (rfd_ >= 0) ::close(rfd_);
    if (wfd_ >= 0 && wfd_ != rfd_) ::close(wfd_);
  }
  rfd_ = wfd_ = -1;
}

// one write that cannot block: sockets take MSG_DONTWAIT, pipes at most
// PIPE_BUF bytes once poll reported them writable
void FdConnection::write_some() {
  const std::size_t n = std::min<std::size_t>(out_.size(), PIPE_BUF);
  ssize_t w = ::send(wfd_, out_.data(), n, MSG_DONTWAIT | MSG_NOSIGNAL);
  if (w < 0 && errno == ENOTSOCK) w = ::write(wfd_, out_.data(), n);
  if (w < 0) {
    if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) return;
    throw ConnectionClosed(std::string("write failed: ") + std::strerror(errno));
  }
  out_.erase(0, static_cast<std::size_t>(w));
}

bool FdConnection::flush(double timeout) {
  if (wfd_ < 0) throw ConnectionClosed("connection is closed");
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(std::max(0.0, timeout)));
  while (!out_.empty()) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    pollfd p{wfd_, POLLOUT, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::clamp<long long>(left, 0, 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ConnectionClosed(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) return false;
    if (p.revents & (POLLERR | POLLHUP | POLLNVAL)) throw ConnectionClosed("peer closed the connection");
    write_some();
  }
  return true;
}

void FdConnection::send_line(std::string_view line) {
  if (wfd_ < 0) throw ConnectionClosed("connection is closed");
  out_.append(line);
  if (line.empty() || line.back() != '\n') out_.push_back('\n');
  flush(0.0);
}

std::optional<std::string> FdConnection::read_line(double timeout) {
  if (rfd_ < 0) throw ConnectionClosed("connection is closed");
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(std::max(0.0, timeout)));
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) return std::nullopt;
    // keep draining queued frames while waiting for the reply
    pollfd p[2] = {{rfd_, POLLIN, 0}, {wfd_, POLLOUT, 0}};
    const bool sending = !out_.empty() && wfd_ >= 0;
    const bool shared = wfd_ == rfd_;
    if (sending && shared) p[0].events |= POLLOUT;
    const nfds_t count = sending && !shared ? 2 : 1;
    const int rc = ::poll(p, count, static_cast<int>(std::min<long long>(left, 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ConnectionClosed(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    const short wrev = shared ? p[0].revents : count == 2 ? p[1].revents : 0;
    if (sending && (wrev & POLLOUT)) write_some();
    if (!(p[0].revents & (POLLIN | POLLHUP | POLLERR))) continue;
    char chunk[4096];
    const ssize_t n = ::read(rfd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ConnectionClosed(std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw ConnectionClosed("peer closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<SubprocessConnection> SubprocessConnection::spawn(const std::vector<std::string> & argv) {
  if (argv.empty()) throw std::invalid_argument("empty planner command");
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw std::runtime_error("pipe failed");
  }
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&fa, from_child[1], STDOUT_FILENO);
  std::vector<char *> args;
  for (const auto & a : argv) args.push_back(const_cast<char *>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, args[0], &fa, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw std::runtime_error("cannot start planner '" + argv[0] + "': " + std::strerror(rc));
  }
  return std::unique_ptr<SubprocessConnection>(new SubprocessConnection(from_child[0], to_child[1], pid));
}

SubprocessConnection::~SubprocessConnection() {
  close();  // EOF on the child's stdin
  for (int i = 0; i < 50; ++i) {
    if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
}

namespace {

sockaddr_un unix_address(const std::string & path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) throw std::invalid_argument("socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

}  // namespace

std::unique_ptr<FdConnection> connect_unix(const std::string & path) {
  const sockaddr_un addr = unix_address(path);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw std::runtime_error("socket failed");
  if (::connect(fd, reinterpret_cast<const sockaddr *>(&addr), sizeof addr) != 0) {
    const int err = errno;
    ::close(fd);
    throw ConnectionClosed("cannot connect to " + path + ": " + std::strerror(err));
  }
  return std::make_unique<FdConnection>(fd, fd);
}

UnixListener::UnixListener(std::string path) : path_(std::move(path)) {
  const sockaddr_un addr = unix_address(path_);
  fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw std::runtime_error("socket failed");
  ::unlink(path_.c_str());
  if (::bind(fd_, reinterpret_cast<const sockaddr *>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
    const int err = errno;
    ::close(fd_);
    throw std::runtime_error("cannot listen on " + path_ + ": " + std::strerror(err));
  }
}

UnixListener::~UnixListener() {
  ::close(fd_);
  ::unlink(path_.c_str());
}

std::unique_ptr<FdConnection> UnixListener::accept() {
  for (;;) {
    const int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (c >= 0) return std::make_unique<FdConnection>(c, c);
    if (errno != EINTR) throw std::runtime_error(std::string("accept failed: ") + std::strerror(errno));
  }
}

std::pair<std::unique_ptr<FdConnection>, std::unique_ptr<FdConnection>> socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) throw std::runtime_error("socketpair failed");
  return {std::make_unique<FdConnection>(fds[0], fds[0]), std::make_unique<FdConnection>(fds[1], fds[1])};
}

// ---- query ----

std::pair<DecisionResponse, ProtocolStats> resolve_reply(const PlannerRequest & req, ReplyOutcome outcome,
                                                         const std::optional<PlannerReply> & reply,
                                                         Planner & fallback) {
  ProtocolStats st;
  st.requests = 1;
  if (outcome == ReplyOutcome::ok && reply) {
    if (const auto pair = decision::try_parse_decision(reply->decision_text)) {
      st.ok = 1;
      return {{*pair, reply->explanation.value_or("")}, st};
    }
    outcome = ReplyOutcome::malformed;
  }
  if (outcome == ReplyOutcome::timeout) {
    st.timeouts = 1;
  } else {
    st.parse_failures = 1;
  }
  st.fallbacks = 1;
  return {fallback.decide(req), st};
}

std::pair<DecisionResponse, ProtocolStats> query_planner(Connection & conn, const PlannerRequest & req,
                                                         double timeout, Planner & fallback) {
  if (!(timeout > 0.0)) throw std::invalid_argument("planner timeout must be > 0");
  conn.send_line(encode_request(req));
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout));
  for (;;) {
    const double left = std::chrono::duration<double>(deadline - Clock::now()).count();
    if (left <= 0.0) return resolve_reply(req, ReplyOutcome::timeout, std::nullopt, fallback);
    const auto line = conn.read_line(left);
    if (!line) return resolve_reply(req, ReplyOutcome::timeout, std::nullopt, fallback);
    PlannerReply reply;
    try {
      reply = decode_reply(*line);
    } catch (const ProtocolError &) {
      return resolve_reply(req, ReplyOutcome::malformed, std::nullopt, fallback);
    }
    if (reply.id < req.id) continue;  // late answer to an earlier request
    if (reply.id > req.id) return resolve_reply(req, ReplyOutcome::malformed, std::nullopt, fallback);
    return resolve_reply(req, ReplyOutcome::ok, reply, fallback);
  }
}

// ---- mock ----

bool side_lane_free(const sim::SceneDescription & scene, bool left) {
  if (!(left ? scene.lane.left_neighbor : scene.lane.right_neighbor)) return false;
  const auto rel = left ? sim::Relation::left : sim::Relation::right;
  for (const auto & a : scene.actors) {
    if (a.relation == rel && a.longitudinal >= -15.0 && a.longitudinal <= 20.0) return false;
  }
  return true;
}

bool ScenePredicate::always() const {
  return !red_light_within && !emergency_behind && !pedestrian_within && !obstacle_within && !lead_within &&
         !lead_slower_than && !left_free && !right_free && !instruction_contains && !has_instruction && !navigation &&
         !speed_below && !speed_above && !junction_within && !lane && !time_after && !time_before;
}

bool ScenePredicate::matches(const PlannerRequest & req) const {
  const auto & s = req.scene;
  auto any_actor = [&](auto pred) { return std::any_of(s.actors.begin(), s.actors.end(), pred); };
  if (red_light_within) {
    const bool hit = s.light && s.light->state != sim::LightState::green &&
                     s.light->stop_line_distance <= *red_light_within;
    if (!hit) return false;
  }
  if (emergency_behind) {
    const bool hit = any_actor([](const sim::ActorObservation & a) {
      return a.kind == sim::ActorKind::emergency_vehicle && a.relation == sim::Relation::same && a.longitudinal < 0.0 &&
             a.longitudinal >= -40.0;
    });
    if (hit != *emergency_behind) return false;
  }
  if (pedestrian_within) {
    const double reach = s.lane.width / 2.0 + 2.0;
    const bool hit = any_actor([&](const sim::ActorObservation & a) {
      return a.kind == sim::ActorKind::pedestrian && a.longitudinal > 0.0 && a.longitudinal <= *pedestrian_within &&
             std::abs(a.lateral) < reach;
    });
    if (!hit) return false;
  }
  if (obstacle_within) {
    const bool hit = any_actor([&](const sim::ActorObservation & a) {
      return a.kind == sim::ActorKind::static_obstacle && a.relation == sim::Relation::same && a.longitudinal > 0.0 &&
             a.longitudinal <= *obstacle_within;
    });
    if (!hit) return false;
  }
  const sim::ActorObservation * lead = nullptr;
  for (const auto & a : s.actors) {
    if (a.kind == sim::ActorKind::pedestrian || a.relation != sim::Relation::same || a.longitudinal <= 0.0) continue;
    if (!lead || a.longitudinal < lead->longitudinal) lead = &a;
  }
  if (lead_within && !(lead && lead->kind != sim::ActorKind::static_obstacle && lead->longitudinal <= *lead_within)) {
    return false;
  }
  if (lead_slower_than && !(lead && lead->speed < *lead_slower_than)) return false;
  if (left_free && side_lane_free(s, true) != *left_free) return false;
  if (right_free && side_lane_free(s, false) != *right_free) return false;
  if (has_instruction && req.user_instruction.has_value() != *has_instruction) return false;
  if (instruction_contains &&
      !(req.user_instruction && lower(*req.user_instruction).find(lower(*instruction_contains)) != std::string::npos)) {
    return false;
  }
  if (navigation && req.navigation != *navigation) return false;
  if (speed_below && !(s.ego.speed < *speed_below)) return false;
  if (speed_above && !(s.ego.speed > *speed_above)) return false;
  if (junction_within && !(s.lane.in_junction || (s.lane.distance_to_junction &&
                                                   *s.lane.distance_to_junction <= *junction_within))) {
    return false;
  }
  if (lane && s.lane.lane_id != *lane) return false;
  if (time_after && !(s.time >= *time_after)) return false;
  if (time_before && !(s.time < *time_before)) return false;
  return true;
}

ScenePredicate ScenePredicate::from_json(const json & j) {
  constexpr std::string_view ctx = "mock script predicate";
  ScenePredicate p;
  if (j.is_string() && j == "always") return p;
  if (!j.is_object()) throw FormatError(std::string(ctx) + ": expected an object or \"always\"");
  io::require_known_keys(j,
                         {"red_light_within", "emergency_behind", "pedestrian_within", "obstacle_within",
                          "lead_within", "lead_slower_than", "left_free", "right_free", "instruction_contains",
                          "has_instruction", "navigation", "speed_below", "speed_above", "junction_within", "lane",
                          "time_after", "time_before"},
                         ctx);
  auto num = [&](const char * key, std::optional<double> & f) {
    if (j.contains(key)) f = io::get_required<double>(j, key, ctx);
  };
  auto flag = [&](const char * key, std::optional<bool> & f) {
    if (j.contains(key)) f = io::get_required<bool>(j, key, ctx);
  };
  num("red_light_within", p.red_light_within);
  flag("emergency_behind", p.emergency_behind);
  num("pedestrian_within", p.pedestrian_within);
  num("obstacle_within", p.obstacle_within);
  num("lead_within", p.lead_within);
  num("lead_slower_than", p.lead_slower_than);
  flag("left_free", p.left_free);
  flag("right_free", p.right_free);
  if (j.contains("instruction_contains")) p.instruction_contains = io::get_required<std::string>(j, "instruction_contains", ctx);
  flag("has_instruction", p.has_instruction);
  if (j.contains("navigation")) {
    try {
      p.navigation = decision::navigation_from_string(io::get_required<std::string>(j, "navigation", ctx));
    } catch (const std::invalid_argument & e) {
      throw FormatError(std::string(ctx) + ": " + e.what());
    }
  }
  num("speed_below", p.speed_below);
  num("speed_above", p.speed_above);
  num("junction_within", p.junction_within);
  if (j.contains("lane")) p.lane = io::get_required<std::string>(j, "lane", ctx);
  num("time_after", p.time_after);
  num("time_before", p.time_before);
  return p;
}

const ScriptEntry & MockScript::match(const PlannerRequest & req) const {
  for (const auto & e : entries) {
    if (e.when.matches(req)) return e;
  }
  return entries.back();
}

PlannerReply MockScript::reply_to(const PlannerRequest & req) const {
  const auto & e = match(req);
  return {req.id, e.decision, e.explanation};
}

MockScript MockScript::from_json(const json & doc) {
  constexpr std::string_view ctx = "mock script";
  io::require_known_keys(doc, {"format_version", "entries"}, ctx);
  io::require_format_version(doc, kFormatVersion, ctx);
  const auto list = io::get_required<json>(doc, "entries", ctx);
  if (!list.is_array() || list.empty()) throw FormatError("mock script: entries must be a non-empty array");
  MockScript script;
  for (const auto & e : list) {
    io::require_known_keys(e, {"when", "decision", "explanation", "delay"}, ctx);
    ScriptEntry entry;
    entry.when = ScenePredicate::from_json(e.contains("when") ? e["when"] : json("always"));
    entry.decision = io::get_required<std::string>(e, "decision", ctx);
    if (e.contains("explanation")) entry.explanation = io::get_required<std::string>(e, "explanation", ctx);
    entry.delay = io::get_or(e, "delay", 0.0, ctx);
    if (!(entry.delay >= 0.0) || !std::isfinite(entry.delay)) throw FormatError("mock script: delay must be >= 0");
    script.entries.push_back(std::move(entry));
  }
  if (!script.entries.back().when.always()) throw FormatError("mock script: the last entry must always match");
  return script;
}

MockScript MockScript::load(const std::filesystem::path & path) { return from_json(io::read_json_file(path)); }

void serve_mock_planner(Connection & conn, const MockScript & script, std::size_t max_replies) {
  try {
    for (std::size_t sent = 0; max_replies == 0 || sent < max_replies;) {
      const auto line = conn.read_line(3600.0);
      if (!line) continue;
      PlannerRequest req;
      try {
        req = decode_request(*line);
      } catch (const ProtocolError &) {
        continue;
      }
      const auto & entry = script.match(req);
      if (entry.delay > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(entry.delay));
      conn.send_line(encode_reply({req.id, entry.decision, entry.explanation}));
      ++sent;
    }
  } catch (const ConnectionClosed &) {
  }
}

MockPlanner::MockPlanner(MockScript script, double timeout, std::unique_ptr<Planner> fallback)
    : script_(std::move(script)), timeout_(timeout), fallback_(std::move(fallback)) {
  if (script_.entries.empty()) throw std::invalid_argument("mock script is empty");
  if (!(timeout_ > 0.0)) throw std::invalid_argument("planner timeout must be > 0");
}

DecisionResponse MockPlanner::decide(const PlannerRequest & req) {
  const auto & e = script_.match(req);
  const auto outcome = e.delay >= timeout_ ? ReplyOutcome::timeout : ReplyOutcome::ok;
  auto [resp, delta] = resolve_reply(req, outcome, PlannerReply{req.id, e.decision, e.explanation}, *fallback_);
  stats_ += delta;
  return resp;
}

void MockPlanner::reset() {
  fallback_->reset();
  stats_ = {};
}

ExternalPlanner::ExternalPlanner(Connector connect, double timeout, std::unique_ptr<Planner> fallback,
                                 std::string label)
    : connect_(std::move(connect)), timeout_(timeout), fallback_(std::move(fallback)), label_(std::move(label)) {
  if (!(timeout_ > 0.0)) throw std::invalid_argument("planner timeout must be > 0");
}

DecisionResponse ExternalPlanner::decide(const PlannerRequest & req) {
  if (!conn_) conn_ = connect_();
  try {
    auto [resp, delta] = query_planner(*conn_, req, timeout_, *fallback_);
    stats_ += delta;
    return resp;
  } catch (const ConnectionClosed &) {
    conn_.reset();
    throw;
  }
}

void ExternalPlanner::reset() {
  conn_.reset();
  fallback_->reset();
  stats_ = {};
}

}  // namespace drivebench::protocol
