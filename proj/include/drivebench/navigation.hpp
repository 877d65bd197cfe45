#pragma once

#include <span>
#include <string>

#include "drivebench/decision.hpp"
#include "drivebench/map.hpp"
#include "drivebench/perception.hpp"

namespace drivebench::decision {

/// Turn direction of a junction connector from its end-to-end heading
/// change: beyond +-30 degrees is a turn.
NavigationCommand connector_turn(const sim::Lane & connector);

/// Command for the next junction connector on the route, once it is within
/// `horizon` meters (or the ego is inside it). follow_lane otherwise, and
/// whenever the ego lane is neither on the route nor beside a route lane.
NavigationCommand navigation_command(const sim::LaneMap & map, std::span<const std::string> route,
                                     const sim::SceneDescription & scene, double horizon = 200.0);

}  // namespace drivebench::decision
