#include "drivebench/decision.hpp"

#include <set>
#include <sstream>

#include "drivebench/system_message_asset.hpp"

namespace drivebench::decision {

std::string_view to_string(PathDecision p) {
  switch (p) {
    case PathDecision::follow_lane: return "FOLLOW_LANE";
    case PathDecision::left_lane_change: return "LEFT_LANE_CHANGE";
    case PathDecision::right_lane_change: return "RIGHT_LANE_CHANGE";
    case PathDecision::left_lane_borrow: return "LEFT_LANE_BORROW";
    case PathDecision::right_lane_borrow: return "RIGHT_LANE_BORROW";
  }
  return "FOLLOW_LANE";
}

std::string_view short_name(PathDecision p) {
  switch (p) {
    case PathDecision::follow_lane: return "FOLLOW";
    case PathDecision::left_lane_change: return "LEFT_CHANGE";
    case PathDecision::right_lane_change: return "RIGHT_CHANGE";
    case PathDecision::left_lane_borrow: return "LEFT_BORROW";
    case PathDecision::right_lane_borrow: return "RIGHT_BORROW";
  }
  return "FOLLOW";
}

std::string_view to_string(SpeedDecision s) {
  switch (s) {
    case SpeedDecision::keep: return "KEEP";
    case SpeedDecision::accelerate: return "ACCELERATE";
    case SpeedDecision::decelerate: return "DECELERATE";
    case SpeedDecision::stop: return "STOP";
  }
  return "KEEP";
}

std::string_view to_string(NavigationCommand c) {
  switch (c) {
    case NavigationCommand::follow_lane: return "follow_lane";
    case NavigationCommand::turn_left: return "turn_left";
    case NavigationCommand::turn_right: return "turn_right";
  }
  return "follow_lane";
}

NavigationCommand navigation_from_string(std::string_view s) {
  if (s == "follow_lane") return NavigationCommand::follow_lane;
  if (s == "turn_left") return NavigationCommand::turn_left;
  if (s == "turn_right") return NavigationCommand::turn_right;
  throw std::invalid_argument("unknown navigation command '" + std::string(s) + "'");
}

bool is_left(PathDecision p) {
  return p == PathDecision::left_lane_change || p == PathDecision::left_lane_borrow;
}
bool is_right(PathDecision p) {
  return p == PathDecision::right_lane_change || p == PathDecision::right_lane_borrow;
}
bool is_change(PathDecision p) {
  return p == PathDecision::left_lane_change || p == PathDecision::right_lane_change;
}
bool is_borrow(PathDecision p) {
  return p == PathDecision::left_lane_borrow || p == PathDecision::right_lane_borrow;
}

namespace {

bool word_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

char upper(char c) { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }

template <typename F>
void for_each_word(std::string_view text, F && f) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && word_char(text[j])) ++j;
    f(text.substr(i, j - i));
    i = j;
  }
}

std::string upper_copy(std::string_view w) {
  std::string out(w.size(), ' ');
  for (std::size_t k = 0; k < w.size(); ++k) out[k] = upper(w[k]);
  return out;
}

std::optional<PathDecision> path_token(const std::string & w) {
  for (auto p : kAllPaths) {
    if (w == to_string(p) || w == short_name(p)) return p;
  }
  return std::nullopt;
}

std::optional<SpeedDecision> speed_token(const std::string & w) {
  for (auto s : kAllSpeeds) {
    if (w == to_string(s)) return s;
  }
  return std::nullopt;
}

}  // namespace

DecisionPair parse_decision(std::string_view text) {
  std::set<PathDecision> paths;
  std::set<SpeedDecision> speeds;
  for_each_word(text, [&](std::string_view w) {
    if (w.size() > 17) return;  // longer than any decision name
    const std::string u = upper_copy(w);
    if (auto p = path_token(u)) paths.insert(*p);
    if (auto s = speed_token(u)) speeds.insert(*s);
  });
  if (paths.size() != 1) {
    throw DecisionParseError(ParseErrorKind::ambiguous_path,
                             paths.empty() ? "no path decision found" : "multiple path decisions found");
  }
  if (speeds.size() != 1) {
    throw DecisionParseError(ParseErrorKind::ambiguous_speed,
                             speeds.empty() ? "no speed decision found" : "multiple speed decisions found");
  }
  return {*paths.begin(), *speeds.begin()};
}

std::optional<DecisionPair> try_parse_decision(std::string_view text) noexcept {
  try {
    return parse_decision(text);
  } catch (...) {
    return std::nullopt;
  }
}

std::string render_decision(const DecisionPair & d) {
  std::string out(to_string(d.path));
  out += ", ";
  out += to_string(d.speed);
  return out;
}

Feasibility validate_feasibility(const DecisionPair & d, const sim::SceneDescription & scene) {
  const auto & lane = scene.lane;
  if (is_left(d.path) && !lane.left_neighbor) return {false, "no left lane"};
  if (is_right(d.path) && !lane.right_neighbor) return {false, "no right lane"};
  if (d.path == PathDecision::left_lane_borrow && lane.left_boundary == sim::BoundaryKind::double_solid) {
    return {false, "double solid line on the left"};
  }
  if (d.path == PathDecision::right_lane_borrow && lane.right_boundary == sim::BoundaryKind::double_solid) {
    return {false, "double solid line on the right"};
  }
  return {true, ""};
}

std::size_t count_token(std::string_view text, std::string_view name) {
  std::size_t n = 0;
  for_each_word(text, [&](std::string_view w) { n += w == name; });
  return n;
}

std::string SystemMessage::text() const { return task + " " + rules + " " + definitions + " " + closing; }

std::string_view default_system_message_asset() { return kSystemMessageAsset; }

SystemMessage parse_system_message_asset(std::string_view text) {
  SystemMessage m;
  std::string * current = nullptr;
  bool version_seen = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("format_version:", 0) == 0) {
      if (line != "format_version: 1") throw SystemMessageError("system message asset: unsupported " + line);
      version_seen = true;
      continue;
    }
    if (line == "[task]") {
      current = &m.task;
    } else if (line == "[rules]") {
      current = &m.rules;
    } else if (line == "[definitions]") {
      current = &m.definitions;
    } else if (line == "[closing]") {
      current = &m.closing;
    } else if (line.front() == '[') {
      throw SystemMessageError("system message asset: unknown section " + line);
    } else {
      if (!current) throw SystemMessageError("system message asset: text outside a section");
      if (!current->empty()) *current += ' ';
      *current += line;
    }
  }
  if (!version_seen) throw SystemMessageError("system message asset: missing format_version");
  if (m.task.empty() || m.rules.empty() || m.definitions.empty() || m.closing.empty()) {
    throw SystemMessageError("system message asset: missing section");
  }
  return m;
}

SystemMessage build_system_message(const SystemMessageConfig & cfg) {
  SystemMessage m = parse_system_message_asset(default_system_message_asset());
  if (cfg.rules_override) {
    if (cfg.rules_override->empty()) throw SystemMessageError("rules override is empty");
    m.rules = *cfg.rules_override;
  }
  if (cfg.definitions_override) m.definitions = *cfg.definitions_override;
  for (auto p : kAllPaths) {
    if (count_token(m.definitions, to_string(p)) != 1) {
      throw SystemMessageError("definitions must name " + std::string(to_string(p)) + " exactly once");
    }
  }
  for (auto s : kAllSpeeds) {
    if (count_token(m.definitions, to_string(s)) != 1) {
      throw SystemMessageError("definitions must name " + std::string(to_string(s)) + " exactly once");
    }
  }
  return m;
}

}  // namespace drivebench::decision
