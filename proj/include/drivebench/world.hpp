#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drivebench/geometry.hpp"
#include "drivebench/map.hpp"

namespace drivebench::sim {

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // counter-clockwise from +x, in (-pi, pi]

  geom::Vec2 position() const { return {x, y}; }
};

enum class ActorKind { ego, vehicle, emergency_vehicle, pedestrian, static_obstacle };

std::string to_string(ActorKind k);
ActorKind actor_kind_from_string(std::string_view s);

struct ActorState {
  std::string id;
  ActorKind kind = ActorKind::vehicle;
  Pose pose;
  double speed = 0.0;
  double length = 4.6;
  double width = 2.0;
  std::optional<std::string> lane_id;

  geom::OrientedBox box() const { return {pose.position(), pose.heading, length, width}; }
};

/// Actuation command for the ego: steering angle (left positive) and
/// longitudinal acceleration.
struct ControlSignal {
  double steer = 0.0;
  double accel = 0.0;
};

enum class InfractionKind {
  collision_pedestrian,
  collision_vehicle,
  collision_static,
  red_light,
  stop_sign,
  double_solid_crossing,
  failed_yield_emergency,
};

inline constexpr std::array<InfractionKind, 7> kAllInfractionKinds = {
    InfractionKind::collision_pedestrian, InfractionKind::collision_vehicle,
    InfractionKind::collision_static,     InfractionKind::red_light,
    InfractionKind::stop_sign,            InfractionKind::double_solid_crossing,
    InfractionKind::failed_yield_emergency,
};

std::string to_string(InfractionKind k);
InfractionKind infraction_kind_from_string(std::string_view s);

struct Infraction {
  InfractionKind kind = InfractionKind::collision_vehicle;
  double time = 0.0;
  geom::Vec2 position;
  std::string detail;  // other actor, light or sign id
};

/// Simulator-side bookkeeping for one NPC, parallel to WorldState::actors.
struct ActorRuntime {
  std::string lane_id;  // empty for off-lane actors
  double s = 0.0;       // station along lane_id
  double lateral = 0.0;
  bool active = false;
  double activated_at = 0.0;
};

struct WorldState {
  double time = 0.0;
  std::uint64_t step_index = 0;
  ActorState ego;
  std::vector<ActorState> actors;  // sorted by id
  std::map<std::string, LightState> light_states;
  std::optional<std::string> pending_instruction;

  std::vector<ActorRuntime> runtime;
  bool triggered = false;
  double trigger_time = 0.0;
  double instruction_expires = 0.0;
  std::vector<bool> instruction_fired;
  std::map<std::string, double> emergency_behind_since;
  std::set<std::string> signs_stopped_at;

  const ActorState * find_actor(std::string_view id) const;
};

}  // namespace drivebench::sim
