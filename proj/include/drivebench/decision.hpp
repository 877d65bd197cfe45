#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "drivebench/perception.hpp"

namespace drivebench::decision {

enum class PathDecision { follow_lane, left_lane_change, right_lane_change, left_lane_borrow, right_lane_borrow };
enum class SpeedDecision { keep, accelerate, decelerate, stop };

inline constexpr std::array<PathDecision, 5> kAllPaths = {
    PathDecision::follow_lane, PathDecision::left_lane_change, PathDecision::right_lane_change,
    PathDecision::left_lane_borrow, PathDecision::right_lane_borrow};
inline constexpr std::array<SpeedDecision, 4> kAllSpeeds = {SpeedDecision::keep, SpeedDecision::accelerate,
                                                            SpeedDecision::decelerate, SpeedDecision::stop};

/// Long form, e.g. "LEFT_LANE_CHANGE".
std::string_view to_string(PathDecision p);
/// Short alias, e.g. "LEFT_CHANGE".
std::string_view short_name(PathDecision p);
std::string_view to_string(SpeedDecision s);

/// Route-level command handed to planners alongside the scene.
enum class NavigationCommand { follow_lane, turn_left, turn_right };
std::string_view to_string(NavigationCommand c);
/// Throws std::invalid_argument for unknown names.
NavigationCommand navigation_from_string(std::string_view s);

bool is_left(PathDecision p);
bool is_right(PathDecision p);
bool is_change(PathDecision p);
bool is_borrow(PathDecision p);

struct DecisionPair {
  PathDecision path = PathDecision::follow_lane;
  SpeedDecision speed = SpeedDecision::keep;

  bool operator==(const DecisionPair &) const = default;
};

struct DecisionResponse {
  DecisionPair decision;
  std::string explanation;
};

enum class ParseErrorKind { ambiguous_path, ambiguous_speed };

class DecisionParseError : public std::runtime_error {
 public:
  DecisionParseError(ParseErrorKind kind, const std::string & what) : std::runtime_error(what), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

/// Case-insensitive, word-boundary token scan accepting long forms and
/// short aliases. Exactly one distinct path value and one distinct speed
/// value must occur; repeats of the same value are fine.
DecisionPair parse_decision(std::string_view text);
std::optional<DecisionPair> try_parse_decision(std::string_view text) noexcept;

/// Canonical "PATH, SPEED" in long form.
std::string render_decision(const DecisionPair & d);

struct Feasibility {
  bool feasible = true;
  std::string reason;
};

Feasibility validate_feasibility(const DecisionPair & d, const sim::SceneDescription & scene);

struct SystemMessage {
  std::string task;
  std::string rules;
  std::string definitions;
  std::string closing;

  std::string text() const;
};

struct SystemMessageConfig {
  std::optional<std::string> rules_override;
  std::optional<std::string> definitions_override;
};

class SystemMessageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Default message from the bundled asset, with optional section overrides.
/// A definitions override must still name every decision exactly once.
SystemMessage build_system_message(const SystemMessageConfig & cfg = {});

/// Parses the sectioned asset format (format_version 1).
SystemMessage parse_system_message_asset(std::string_view text);
std::string_view default_system_message_asset();

/// Number of word-boundary occurrences of `name` in `text`.
std::size_t count_token(std::string_view text, std::string_view name);

}  // namespace drivebench::decision
