#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "drivebench/decision.hpp"
#include "drivebench/perception.hpp"

namespace drivebench::explain {

/// What in the scene a decision responds to. Shared by the FSM (the rule
/// that fired) and the data engine (inferred from the scene).
enum class Cause {
  clear_road,
  red_light,
  stop_sign,
  emergency_vehicle,
  pedestrian,
  blocked_lane,
  slow_lead,
  following,
  turn_left_prep,
  turn_right_prep,
};

std::string_view to_string(Cause c);

struct Slots {
  std::string side;                // "left" / "right"
  std::string actor;               // e.g. "vehicle", "obstacle"
  std::optional<double> distance;  // meters, rendered rounded
  std::string light;               // light state name
};

struct Explanation {
  std::string text;
  bool fallback = false;
};

/// Fills the template for (cause, decision). Combinations without a
/// template get the generic text, flagged as fallback.
Explanation render_explanation(Cause cause, const decision::DecisionPair & d, const Slots & slots);

/// Generic text naming both decisions.
std::string generic_explanation(const decision::DecisionPair & d);

/// Phrase used for the speed slot, e.g. "accelerate".
std::string_view speed_phrase(decision::SpeedDecision s);

/// Noun for an actor kind, e.g. "emergency vehicle".
std::string actor_noun(sim::ActorKind k);

}  // namespace drivebench::explain
