#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "drivebench/json_io.hpp"
#include "drivebench/map.hpp"
#include "drivebench/world.hpp"

namespace drivebench::sim {

class OffMapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Relation { same, left, right, other };

std::string to_string(Relation r);
Relation relation_from_string(std::string_view s);

struct EgoObservation {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double length = 4.6;
  double width = 2.0;
};

struct LaneContext {
  std::string lane_id;
  double s = 0.0;        // station along the current lane
  double lateral = 0.0;  // ego offset from the lane centerline, left positive
  double width = 3.5;
  double speed_limit = 13.9;
  bool in_junction = false;
  std::optional<std::string> left_neighbor;
  std::optional<std::string> right_neighbor;
  BoundaryKind left_boundary = BoundaryKind::solid;
  BoundaryKind right_boundary = BoundaryKind::solid;
  std::optional<double> distance_to_junction;
};

struct LightObservation {
  std::string id;
  LightState state = LightState::green;
  double stop_line_distance = 0.0;
};

struct StopSignObservation {
  std::string id;
  double stop_line_distance = 0.0;
};

struct ActorObservation {
  std::string id;
  ActorKind kind = ActorKind::vehicle;
  double longitudinal = 0.0;  // along the ego lane chain, relative to the ego
  double lateral = 0.0;       // offset from the ego lane centerline, left positive
  double heading = 0.0;       // relative to the ego lane direction
  double speed = 0.0;
  double length = 4.6;
  double width = 2.0;
  Relation relation = Relation::other;
};

/// Ground-truth scene handed to planners. Floats are quantized to three
/// decimals so wire and in-process planners see identical values.
struct SceneDescription {
  double time = 0.0;
  EgoObservation ego;
  LaneContext lane;
  std::optional<LightObservation> light;
  std::optional<StopSignObservation> stop_sign;
  std::vector<ActorObservation> actors;  // sorted by id
  std::optional<std::string> instruction;

  ordered_json to_json() const;
  static SceneDescription from_json(const json & j);
  bool operator==(const SceneDescription &) const;
};

/// Projects the world onto a SceneDescription. `route` steers lane-chain
/// branch choices. Throws OffMapError when the ego cannot be localized.
SceneDescription perceive(const WorldState & world, const LaneMap & map, double range,
                          std::span<const std::string> route = {});

}  // namespace drivebench::sim
