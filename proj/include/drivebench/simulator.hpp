#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "drivebench/map.hpp"
#include "drivebench/scenario.hpp"
#include "drivebench/world.hpp"

namespace drivebench::sim {

/// Intelligent driver model parameters.
struct IdmParams {
  double max_accel = 0.73;
  double comfort_decel = 1.67;
  double time_headway = 1.6;
  double min_gap = 2.0;
  double exponent = 4.0;
  double max_decel = 9.0;
};

struct SimConfig {
  double dt = 0.05;
  double wheelbase = 2.8;
  double v_max = 20.0;
  double walk_speed_cap = 2.5;
  double yield_distance = 15.0;
  double yield_time = 5.0;
  double instruction_hold = 10.0;
  double stop_sign_speed = 0.3;
  double stop_sign_zone = 6.0;
  IdmParams idm;
};

class StepError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Owns the map, the scenario's behavior scripts and the configuration.
/// All methods are const; world evolution lives entirely in WorldState.
class Simulator {
 public:
  Simulator(LaneMap map, ScenarioSpec spec, SimConfig cfg = {});

  const LaneMap & map() const { return map_; }
  const ScenarioSpec & scenario() const { return spec_; }
  const SimConfig & config() const { return cfg_; }

  WorldState spawn(std::uint64_t seed) const;

  /// Advances the world by dt. Throws StepError for dt outside (0, 0.2] or
  /// a non-finite control.
  WorldState step(const WorldState & world, const ControlSignal & control, double dt) const;

  /// Relocates the ego (takeover) and refreshes lane bookkeeping.
  void place_ego(WorldState & world, const Pose & pose, double speed) const;

  /// Re-localizes the ego after its pose was edited.
  void relocalize_ego(WorldState & world) const;

 private:
  void advance_npcs(const WorldState & prev, WorldState & next, double dt) const;
  void update_bookkeeping(const WorldState & prev, WorldState & next) const;
  double idm_accel(const WorldState & world, std::size_t idx, const IdmParams & p, double desired) const;

  LaneMap map_;
  ScenarioSpec spec_;
  SimConfig cfg_;
};

/// Infractions whose triggering transition lies in (prev.time, next.time].
std::vector<Infraction> detect_infractions(const WorldState & prev, const WorldState & next, const LaneMap & map,
                                           const SimConfig & cfg = {});

}  // namespace drivebench::sim
