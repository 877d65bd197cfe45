#include "drivebench/world.hpp"

#include "drivebench/json_io.hpp"

namespace drivebench::sim {

std::string to_string(ActorKind k) {
  switch (k) {
    case ActorKind::ego: return "ego";
    case ActorKind::vehicle: return "vehicle";
    case ActorKind::emergency_vehicle: return "emergency_vehicle";
    case ActorKind::pedestrian: return "pedestrian";
    case ActorKind::static_obstacle: return "static_obstacle";
  }
  return "vehicle";
}

ActorKind actor_kind_from_string(std::string_view s) {
  if (s == "ego") return ActorKind::ego;
  if (s == "vehicle") return ActorKind::vehicle;
  if (s == "emergency_vehicle") return ActorKind::emergency_vehicle;
  if (s == "pedestrian") return ActorKind::pedestrian;
  if (s == "static_obstacle") return ActorKind::static_obstacle;
  throw FormatError("unknown actor kind '" + std::string(s) + "'");
}

std::string to_string(InfractionKind k) {
  switch (k) {
    case InfractionKind::collision_pedestrian: return "collision_pedestrian";
    case InfractionKind::collision_vehicle: return "collision_vehicle";
    case InfractionKind::collision_static: return "collision_static";
    case InfractionKind::red_light: return "red_light";
    case InfractionKind::stop_sign: return "stop_sign";
    case InfractionKind::double_solid_crossing: return "double_solid_crossing";
    case InfractionKind::failed_yield_emergency: return "failed_yield_emergency";
  }
  return "collision_vehicle";
}

InfractionKind infraction_kind_from_string(std::string_view s) {
  for (auto k : kAllInfractionKinds) {
    if (to_string(k) == s) return k;
  }
  throw FormatError("unknown infraction kind '" + std::string(s) + "'");
}

const ActorState * WorldState::find_actor(std::string_view id) const {
  for (const auto & a : actors) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

}  // namespace drivebench::sim
