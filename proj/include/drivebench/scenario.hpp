#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drivebench/json_io.hpp"
#include "drivebench/map.hpp"
#include "drivebench/world.hpp"

namespace drivebench::sim {

enum class BehaviorKind { idm_follow, constant_speed, scripted_trajectory, stand };

std::string to_string(BehaviorKind k);

struct TrajectoryPoint {
  double t = 0.0;  // seconds after activation
  geom::Vec2 position;
};

struct BehaviorSpec {
  BehaviorKind kind = BehaviorKind::stand;
  double desired_speed = 0.0;
  std::optional<double> time_headway;  // IDM override
  std::optional<double> min_gap;       // IDM override
  std::vector<TrajectoryPoint> trajectory;
  std::vector<std::string> route;  // preferred lanes at branches
  bool start_on_trigger = false;
};

struct ActorSpawn {
  std::string id;
  ActorKind kind = ActorKind::vehicle;
  std::optional<std::string> lane;
  double s = 0.0;
  double lateral = 0.0;
  std::optional<geom::Vec2> position;  // off-lane actors
  double heading = 0.0;
  double speed = 0.0;
  double length = 4.6;
  double width = 2.0;
  BehaviorSpec behavior;
};

struct InstructionEvent {
  std::optional<double> time;           // absolute simulation time
  std::optional<double> after_trigger;  // seconds after the scenario trigger
  std::string text;
};

struct LightOverride {
  std::string light;
  std::vector<LightPhase> schedule;
  double offset = 0.0;
};

struct ScenarioSpec {
  static constexpr int kFormatVersion = 1;

  std::string id;
  std::string name;
  std::string map;
  std::string ego_lane;
  double ego_s = 0.0;
  double ego_speed = 0.0;
  std::vector<std::string> route;
  std::optional<double> route_length;
  geom::Vec2 trigger_point;
  double trigger_radius = 30.0;
  std::vector<ActorSpawn> actors;
  std::vector<InstructionEvent> instruction_events;
  std::vector<LightOverride> light_overrides;
  double spawn_jitter = 0.5;  // meters, uniform along the lane

  static ScenarioSpec from_json(const json & doc);
  static ScenarioSpec load(const std::filesystem::path & path);
};

/// Checks every lane reference and the trigger point against the map.
void validate_scenario(const ScenarioSpec & spec, const LaneMap & map);

/// The map with the scenario's light overrides applied.
LaneMap apply_overrides(LaneMap map, const ScenarioSpec & spec);

}  // namespace drivebench::sim
