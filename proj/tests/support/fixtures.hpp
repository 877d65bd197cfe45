#pragma once

#include <filesystem>
#include <string>

#include "drivebench/json_io.hpp"
#include "drivebench/map.hpp"
#include "drivebench/scenario.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return DRIVEBENCH_DATA_DIR; }

inline drivebench::sim::LaneMap load_map(const std::string & id) {
  return drivebench::sim::LaneMap::load(data_dir() / "maps" / (id + ".json"));
}

inline drivebench::sim::ScenarioSpec load_scenario(const std::string & id) {
  return drivebench::sim::ScenarioSpec::load(data_dir() / "scenarios" / (id + ".json"));
}

/// One straight eastbound lane "a" from x = 0 to x = `length`, with an
/// optional traffic light whose stop line sits at x = `light_x`.
inline drivebench::json straight_lane_doc(double length = 500.0, double light_x = -1.0,
                                          const std::string & state = "red") {
  using drivebench::json;
  json lane = {{"id", "a"},
               {"centerline", json::array({json::array({0.0, 0.0}), json::array({length, 0.0})})},
               {"width", 3.5},
               {"left_boundary", "solid"},
               {"right_boundary", "solid"},
               {"successors", json::array()},
               {"in_junction", false},
               {"speed_limit", 13.9}};
  json doc = {{"format_version", 1}, {"id", "straight"}, {"lanes", json::array({lane})}};
  json lights = json::array();
  if (light_x >= 0.0) {
    lights.push_back({{"id", "t"},
                      {"controlled_lanes", json::array({"a"})},
                      {"stop_line", json::array({json::array({light_x, -1.75}), json::array({light_x, 1.75})})},
                      {"schedule", json::array({{{"state", state}, {"duration", 1000.0}}})}});
  }
  doc["lights"] = lights;
  return doc;
}

/// Minimal scenario document on the straight fixture lane.
inline drivebench::json straight_scenario_doc(double ego_s = 10.0, double ego_speed = 0.0) {
  using drivebench::json;
  return {{"format_version", 1},
          {"id", "straight_test"},
          {"map", "straight"},
          {"ego", {{"lane", "a"}, {"s", ego_s}, {"speed", ego_speed}}},
          {"route", json::array({"a"})},
          {"trigger", {{"point", json::array({ego_s + 50.0, 0.0})}, {"radius", 10.0}}},
          {"actors", json::array()}};
}

}  // namespace fixtures
