#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drivebench/decision.hpp"
#include "drivebench/geometry.hpp"
#include "drivebench/json_io.hpp"
#include "drivebench/map.hpp"
#include "drivebench/perception.hpp"
#include "drivebench/world.hpp"

namespace drivebench::motion {

struct PlannerConfig {
  double cruise_speed = 8.0;
  double accel_limit = 2.0;
  double decel_limit = 4.0;
  double lane_change_length = 30.0;
  double lookahead_gain = 0.8;
  double lookahead_min = 4.0;
  double stop_margin = 1.0;
  double steer_max = 0.5;
  double wheelbase = 2.8;
  double speed_gain = 1.0;           // k_v
  double decelerate_fraction = 0.6;  // DECELERATE target relative to the decision-time speed
  double keep_min_speed = 0.5;       // KEEP below this falls back to cruise
  double path_horizon = 80.0;
  double sample_spacing = 1.0;
  double borrow_clearance = 8.0;     // gap past the blocking actor before returning
  double obstacle_standoff = 2.0;
  double pedestrian_margin = 1.5;
  double tracking_limit = 5.0;
  double completion_lateral = 0.5;

  /// Throws std::invalid_argument when a value is out of range.
  void validate() const;
  static PlannerConfig from_json(const json & j);
};

enum class PathKind { follow, change, borrow_out, borrow_return };
std::string to_string(PathKind k);

struct PathPoint {
  geom::Vec2 position;
  double heading = 0.0;
  double s = 0.0;  // arc length from the first point
};

/// Where a lane change or borrow started, kept between replans so the blend
/// stays fixed in space.
struct ManeuverAnchor {
  decision::PathDecision path = decision::PathDecision::follow_lane;
  std::string source_lane;
  std::string target_lane;
  double start_s = 0.0;  // station on the chain starting at source_lane
  std::optional<std::string> blocking_actor;
  double return_s = 0.0;  // borrow only: start of the return blend
};

struct PathPlan {
  std::vector<PathPoint> points;
  std::string source_lane_id;
  std::string target_lane_id;
  PathKind kind = PathKind::follow;
  std::vector<double> joins;  // path stations where blend pieces meet
  std::optional<ManeuverAnchor> anchor;

  geom::Polyline line() const;
  double length() const { return points.empty() ? 0.0 : points.back().s; }
};

struct SpeedSample {
  double s = 0.0;
  double v = 0.0;
};

struct SpeedProfile {
  std::vector<SpeedSample> samples;
  double accel_limit = 2.0;
  double decel_limit = 4.0;
  bool infeasible_stop = false;
  std::optional<double> stop_s;  // station where the profile reaches zero

  double speed_at(double s) const;
  /// Acceleration implied by the profile at s (v dv/ds on the containing interval).
  double accel_at(double s) const;
};

class InfeasibleDecision : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrackingLost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quintic 10u^3 - 15u^4 + 6u^5, clamped to [0, 1].
double quintic_blend(double u);
double quintic_blend_slope(double u);

class MotionPlanner {
 public:
  MotionPlanner(const sim::LaneMap & map, PlannerConfig cfg, std::vector<std::string> route = {});

  const PlannerConfig & config() const { return cfg_; }
  const sim::LaneMap & map() const { return *map_; }

  /// Geometric path for a path decision. With no anchor a change or borrow
  /// starts at the ego and must be feasible; with an anchor the maneuver
  /// continues as recorded. The returned plan carries the updated anchor.
  PathPlan plan_path(decision::PathDecision path, const sim::SceneDescription & scene,
                     const std::optional<ManeuverAnchor> & anchor = std::nullopt) const;

  /// `reference_speed` is the speed when the decision was made (KEEP and
  /// DECELERATE targets); defaults to the current speed.
  SpeedProfile plan_speed(decision::SpeedDecision speed, const sim::SceneDescription & scene, const PathPlan & path,
                          std::optional<double> reference_speed = std::nullopt) const;

  /// World position of an observed actor, inverting the scene's lane-chain frame.
  geom::Vec2 actor_position(const sim::SceneDescription & scene, const sim::ActorObservation & a) const;

 private:
  sim::LaneChain lane_chain(const std::string & lane, double forward) const;

  const sim::LaneMap * map_;
  PlannerConfig cfg_;
  std::vector<std::string> route_;
};

/// Pure pursuit on the path plus feedforward and proportional speed control.
sim::ControlSignal track(const PathPlan & path, const SpeedProfile & profile, const sim::ActorState & ego,
                         const PlannerConfig & cfg);

/// Keeps the active decision, its maneuver anchor and the decision-time
/// speed between simulation steps.
class MotionSession {
 public:
  MotionSession(const sim::LaneMap & map, PlannerConfig cfg, std::vector<std::string> route = {});

  /// A new decision tick. Keeps the running maneuver when the path decision
  /// repeats and the maneuver has not finished.
  void set_decision(const decision::DecisionPair & d, const sim::SceneDescription & scene);

  /// True when `d` would continue the running maneuver rather than start one.
  bool is_continuation(const decision::DecisionPair & d) const;

  /// Replans and tracks for one step. Throws TrackingLost.
  sim::ControlSignal control(const sim::SceneDescription & scene, const sim::ActorState & ego);

  /// Drops the maneuver (after a takeover).
  void reset();

  const decision::DecisionPair & decision() const { return decision_; }
  const std::optional<ManeuverAnchor> & anchor() const { return anchor_; }
  /// The lateral maneuver of the current decision has finished.
  bool maneuver_completed() const { return completed_; }
  const PathPlan & last_path() const { return path_; }
  const SpeedProfile & last_profile() const { return profile_; }
  int infeasible_stops() const { return infeasible_stops_; }
  const MotionPlanner & planner() const { return planner_; }

 private:
  bool maneuver_done(const sim::SceneDescription & scene) const;

  MotionPlanner planner_;
  decision::DecisionPair decision_;
  double reference_speed_ = 0.0;
  std::optional<ManeuverAnchor> anchor_;
  bool completed_ = false;
  bool counted_stop_ = false;
  int infeasible_stops_ = 0;
  PathPlan path_;
  SpeedProfile profile_;
};

}  // namespace drivebench::motion
