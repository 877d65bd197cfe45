#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>

#include "drivebench/decision.hpp"
#include "drivebench/explanation.hpp"
#include "drivebench/json_io.hpp"
#include "drivebench/perception.hpp"

namespace drivebench::fsm {

struct FsmConfig {
  double cruise_speed = 8.0;
  double decel_limit = 4.0;
  double red_light_min_distance = 20.0;
  double red_light_time_horizon = 4.0;   // s of travel added to the braking distance
  double stop_margin = 1.0;
  double emergency_detect_distance = 30.0;
  double slow_lead_fraction = 0.5;
  double blocked_distance = 40.0;
  double lead_detect_distance = 40.0;
  double pedestrian_distance = 40.0;
  double pedestrian_margin = 2.5;         // lateral reach beyond the lane half width
  double side_rear_gap = 15.0;
  double side_front_gap = 20.0;
  double approach_time = 3.0;             // closing time that makes a side lane unsafe
  double junction_lateral_clearance = 50.0;
  double turn_prepare_distance = 150.0;
  double turn_last_change_distance = 15.0;
  double follow_headway = 1.5;
  double follow_standoff = 5.0;
  double stop_speed = 0.3;
  double latch_timeout = 20.0;
  double completion_lateral = 0.5;
  bool slow_lead_borrow = false;          // overtake slow leads by borrowing instead of changing

  static FsmConfig from_json(const json & j);
};

struct Latch {
  decision::PathDecision path = decision::PathDecision::follow_lane;
  explain::Cause cause = explain::Cause::clear_road;
  double start_time = 0.0;
  std::string source_lane;
  std::string target_lane;
  int moves_out = 0;   // lateral lane transitions toward the maneuver side
  int moves_back = 0;
  explain::Slots slots;
};

struct FsmState {
  decision::DecisionPair current;
  std::optional<Latch> latch;
  std::string last_lane;
  std::optional<std::string> last_left;
  std::optional<std::string> last_right;
  std::set<std::string> signs_cleared;
};

struct FsmOutput {
  decision::DecisionResponse response;
  explain::Cause cause = explain::Cause::clear_road;
  bool continuation = false;  // holds a latched maneuver started earlier
};

/// Priority rules: red light / stop sign, emergency vehicle behind, latched
/// maneuver, pedestrian and lead handling, turn-lane preparation, default.
/// Deterministic and total.
std::pair<FsmState, FsmOutput> fsm_decide(const FsmState & state, const sim::SceneDescription & scene,
                                          decision::NavigationCommand nav, const FsmConfig & cfg = {});

/// Predicate of the red-light rule.
bool red_light_applies(const sim::SceneDescription & scene, const FsmConfig & cfg);

}  // namespace drivebench::fsm
