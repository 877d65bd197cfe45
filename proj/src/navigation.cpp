#include "drivebench/navigation.hpp"

#include <cmath>
#include <numbers>

namespace drivebench::decision {

NavigationCommand connector_turn(const sim::Lane & connector) {
  const double len = connector.length();
  double d = connector.centerline.heading_at(len) - connector.centerline.heading_at(0.0);
  while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
  while (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
  const double threshold = std::numbers::pi / 6.0;
  if (d > threshold) return NavigationCommand::turn_left;
  if (d < -threshold) return NavigationCommand::turn_right;
  return NavigationCommand::follow_lane;
}

NavigationCommand navigation_command(const sim::LaneMap & map, std::span<const std::string> route,
                                     const sim::SceneDescription & scene, double horizon) {
  const auto & id = scene.lane.lane_id;
  const sim::Lane * ego = map.find_lane(id);
  if (!ego) return NavigationCommand::follow_lane;
  std::size_t from = route.size();
  for (std::size_t i = 0; i < route.size(); ++i) {
    const bool beside = (ego->left_neighbor && *ego->left_neighbor == route[i]) ||
                        (ego->right_neighbor && *ego->right_neighbor == route[i]);
    if (route[i] == id || beside) {
      from = i;
      break;
    }
  }
  for (std::size_t i = from; i < route.size(); ++i) {
    const sim::Lane & l = map.lane(route[i]);
    if (!l.in_junction) continue;
    const bool near = scene.lane.in_junction ||
                      (scene.lane.distance_to_junction && *scene.lane.distance_to_junction <= horizon);
    return near ? connector_turn(l) : NavigationCommand::follow_lane;
  }
  return NavigationCommand::follow_lane;
}

}  // namespace drivebench::decision
