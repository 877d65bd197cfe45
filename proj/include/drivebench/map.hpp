#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drivebench/geometry.hpp"
#include "drivebench/json_io.hpp"

namespace drivebench::sim {

enum class BoundaryKind { dashed, solid, double_solid };
enum class LightState { red, yellow, green };

std::string to_string(BoundaryKind k);
std::string to_string(LightState s);
BoundaryKind boundary_kind_from_string(std::string_view s);
LightState light_state_from_string(std::string_view s);

struct Lane {
  std::string id;
  geom::Polyline centerline;
  double width = 3.5;
  std::optional<std::string> left_neighbor;
  std::optional<std::string> right_neighbor;
  BoundaryKind left_boundary = BoundaryKind::solid;
  BoundaryKind right_boundary = BoundaryKind::solid;
  std::vector<std::string> successors;
  bool in_junction = false;
  double speed_limit = 13.9;

  double length() const { return centerline.length(); }
};

struct LightPhase {
  LightState state = LightState::green;
  double duration = 1.0;
};

struct TrafficLight {
  std::string id;
  std::vector<std::string> controlled_lanes;
  geom::Vec2 stop_line_a;
  geom::Vec2 stop_line_b;
  std::vector<LightPhase> schedule;
  double offset = 0.0;  // seconds added to simulation time before phase lookup

  LightState state_at(double time) const;
  bool controls(std::string_view lane_id) const;
};

struct StopSign {
  std::string id;
  std::string lane_id;
  geom::Vec2 stop_line_a;
  geom::Vec2 stop_line_b;
};

struct Localization {
  std::string lane_id;
  geom::Projection projection;
};

/// Lanes concatenated along successor links into one reference line.
struct LaneChain {
  std::vector<std::string> lane_ids;
  std::vector<double> lane_start;  // chain station of each lane's first point
  geom::Polyline line;

  /// Chain station of a point given in the coordinates of one member lane.
  std::optional<double> station_of(std::string_view lane_id, double lane_s) const;
  /// Member lane covering chain station `s`.
  std::string_view lane_at(double s) const;
};

class LaneMap {
 public:
  static constexpr int kFormatVersion = 1;

  static LaneMap from_json(const json & doc);
  static LaneMap load(const std::filesystem::path & path);

  const std::string & id() const { return id_; }
  const std::vector<Lane> & lanes() const { return lanes_; }
  const std::vector<TrafficLight> & lights() const { return lights_; }
  const std::vector<StopSign> & stop_signs() const { return stop_signs_; }

  const Lane * find_lane(std::string_view id) const;
  /// Throws std::out_of_range for unknown ids.
  const Lane & lane(std::string_view id) const;
  const TrafficLight * find_light(std::string_view id) const;
  std::vector<std::string> predecessors(std::string_view lane_id) const;

  /// Finds the lane containing `p`. Candidates must contain the point within
  /// half their width and within their station range. The hint lane wins
  /// while it remains a candidate; after that successors of the hint (route
  /// lanes first), then its neighbors, then
  /// preferred lanes, then the smallest lateral offset.
  std::optional<Localization> localize(const geom::Vec2 & p, double heading,
                                       std::optional<std::string_view> hint = std::nullopt,
                                       std::span<const std::string> preferred = {}) const;

  /// Chain starting `back` meters before the start of `lane_id` (following
  /// predecessors) and extending at least `forward` meters past its start.
  /// Branches pick a preferred lane when one is listed, else the first.
  LaneChain chain(std::string_view lane_id, double back, double forward,
                  std::span<const std::string> preferred = {}) const;

  /// Chain through exactly the given lanes, which must be successor-linked.
  LaneChain chain_through(std::span<const std::string> lane_ids) const;

  /// Replaces the schedule of a light (scenario overrides).
  void override_light(std::string_view light_id, std::vector<LightPhase> schedule, double offset);

 private:
  void validate() const;

  std::string id_;
  std::vector<Lane> lanes_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<TrafficLight> lights_;
  std::vector<StopSign> stop_signs_;
};

}  // namespace drivebench::sim
