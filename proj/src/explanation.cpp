#include "drivebench/explanation.hpp"

#include <array>
#include <cmath>

namespace drivebench::explain {

using decision::PathDecision;
using decision::SpeedDecision;

std::string_view to_string(Cause c) {
  switch (c) {
    case Cause::clear_road: return "clear_road";
    case Cause::red_light: return "red_light";
    case Cause::stop_sign: return "stop_sign";
    case Cause::emergency_vehicle: return "emergency_vehicle";
    case Cause::pedestrian: return "pedestrian";
    case Cause::blocked_lane: return "blocked_lane";
    case Cause::slow_lead: return "slow_lead";
    case Cause::following: return "following";
    case Cause::turn_left_prep: return "turn_left_prep";
    case Cause::turn_right_prep: return "turn_right_prep";
  }
  return "clear_road";
}

std::string_view speed_phrase(SpeedDecision s) {
  switch (s) {
    case SpeedDecision::keep: return "keep the current speed";
    case SpeedDecision::accelerate: return "accelerate";
    case SpeedDecision::decelerate: return "slow down";
    case SpeedDecision::stop: return "stop";
  }
  return "keep the current speed";
}

std::string actor_noun(sim::ActorKind k) {
  switch (k) {
    case sim::ActorKind::ego: return "ego vehicle";
    case sim::ActorKind::vehicle: return "vehicle";
    case sim::ActorKind::emergency_vehicle: return "emergency vehicle";
    case sim::ActorKind::pedestrian: return "pedestrian";
    case sim::ActorKind::static_obstacle: return "obstacle";
  }
  return "vehicle";
}

namespace {

enum class PathMatch { follow, change, borrow };

struct Template {
  Cause cause;
  PathMatch path;
  std::optional<SpeedDecision> speed;  // nullopt matches any speed
  const char * text;
};

// {side} {actor} {distance} {light} {speed_phrase}
constexpr std::array kTemplates = {
    Template{Cause::red_light, PathMatch::follow, SpeedDecision::stop,
             "Since the traffic light {distance} meters ahead is {light}, so stop before the stop line."},
    Template{Cause::stop_sign, PathMatch::follow, SpeedDecision::stop,
             "Since there is a stop sign {distance} meters ahead, so stop before the stop line."},
    Template{Cause::emergency_vehicle, PathMatch::change, std::nullopt,
             "Since an emergency vehicle is approaching from behind, change to the {side} lane to yield and allow it "
             "to pass first."},
    Template{Cause::emergency_vehicle, PathMatch::follow, std::nullopt,
             "Since an emergency vehicle is approaching from behind and no adjacent lane is free, follow the lane and "
             "{speed_phrase}."},
    Template{Cause::pedestrian, PathMatch::follow, SpeedDecision::stop,
             "Since a pedestrian is crossing {distance} meters ahead, so stop and wait for the pedestrian to pass."},
    Template{Cause::pedestrian, PathMatch::follow, SpeedDecision::decelerate,
             "Since a pedestrian is close to the lane {distance} meters ahead, so slow down."},
    Template{Cause::blocked_lane, PathMatch::borrow, std::nullopt,
             "Since the {actor} ahead is blocking the lane and the {side} lane is free, temporarily borrow the {side} "
             "lane to pass it and {speed_phrase}."},
    Template{Cause::blocked_lane, PathMatch::follow, SpeedDecision::stop,
             "Since the {actor} ahead is blocking the lane and no adjacent lane is free, so stop behind it."},
    Template{Cause::slow_lead, PathMatch::change, std::nullopt,
             "Since there is no vehicle in the {side} lane, in order to pass the vehicle in front, change lanes to the "
             "{side} and {speed_phrase}."},
    Template{Cause::slow_lead, PathMatch::borrow, std::nullopt,
             "Since there is no vehicle in the {side} lane, in order to pass the vehicle in front, borrow the {side} "
             "lane and {speed_phrase}."},
    Template{Cause::following, PathMatch::follow, SpeedDecision::stop,
             "Since the {actor} in front has stopped {distance} meters ahead, so stop behind it."},
    Template{Cause::following, PathMatch::follow, std::nullopt,
             "Since the {actor} in front is {distance} meters ahead, so {speed_phrase} to keep a safe distance."},
    Template{Cause::turn_right_prep, PathMatch::change, std::nullopt,
             "Since a right turn is required ahead and not in the right turn lane, so change to the right lane."},
    Template{Cause::turn_left_prep, PathMatch::change, std::nullopt,
             "Since a left turn is required ahead and not in the left turn lane, so change to the left lane."},
    Template{Cause::clear_road, PathMatch::follow, SpeedDecision::keep,
             "Since the road ahead is clear, follow the lane and {speed_phrase}."},
    Template{Cause::clear_road, PathMatch::follow, SpeedDecision::accelerate,
             "Since the road ahead is clear, follow the lane and {speed_phrase}."},
    Template{Cause::clear_road, PathMatch::follow, SpeedDecision::decelerate,
             "Since the road ahead is clear, follow the lane and {speed_phrase}."},
};

bool path_matches(PathMatch m, PathDecision p) {
  switch (m) {
    case PathMatch::follow: return p == PathDecision::follow_lane;
    case PathMatch::change: return decision::is_change(p);
    case PathMatch::borrow: return decision::is_borrow(p);
  }
  return false;
}

void replace_all(std::string & s, std::string_view key, std::string_view value) {
  for (std::size_t pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
}

}  // namespace

std::string generic_explanation(const decision::DecisionPair & d) {
  return "Based on the current scene, the decision is " + std::string(decision::to_string(d.path)) + " with " +
         std::string(decision::to_string(d.speed)) + ".";
}

Explanation render_explanation(Cause cause, const decision::DecisionPair & d, const Slots & slots) {
  for (const auto & t : kTemplates) {
    if (t.cause != cause || !path_matches(t.path, d.path)) continue;
    if (t.speed && *t.speed != d.speed) continue;
    std::string text = t.text;
    const bool needs_side = text.find("{side}") != std::string::npos;
    const bool needs_distance = text.find("{distance}") != std::string::npos;
    if ((needs_side && slots.side.empty()) || (needs_distance && !slots.distance)) break;
    // the side in the text must agree with the decision
    if (needs_side && d.path != PathDecision::follow_lane &&
        slots.side != (decision::is_left(d.path) ? "left" : "right")) {
      break;
    }
    if (cause == Cause::turn_right_prep && !decision::is_right(d.path)) break;
    if (cause == Cause::turn_left_prep && !decision::is_left(d.path)) break;
    replace_all(text, "{side}", slots.side);
    replace_all(text, "{actor}", slots.actor.empty() ? "vehicle" : slots.actor);
    if (slots.distance) replace_all(text, "{distance}", std::to_string(std::lround(*slots.distance)));
    replace_all(text, "{light}", slots.light.empty() ? "red" : slots.light);
    replace_all(text, "{speed_phrase}", speed_phrase(d.speed));
    return {text, false};
  }
  return {generic_explanation(d), true};
}

}  // namespace drivebench::explain
