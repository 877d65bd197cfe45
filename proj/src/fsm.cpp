#include "drivebench/fsm.hpp"

#include <cmath>
#include <limits>

namespace drivebench::fsm {

using decision::DecisionPair;
using decision::PathDecision;
using decision::SpeedDecision;
using explain::Cause;
using sim::ActorObservation;
using sim::SceneDescription;

FsmConfig FsmConfig::from_json(const json & j) {
  constexpr std::string_view ctx = "fsm config";
  io::require_known_keys(
      j,
      {"cruise_speed", "decel_limit", "red_light_min_distance", "red_light_time_horizon", "stop_margin",
       "emergency_detect_distance", "slow_lead_fraction", "blocked_distance", "lead_detect_distance",
       "pedestrian_distance", "pedestrian_margin", "side_rear_gap", "side_front_gap", "approach_time",
       "junction_lateral_clearance", "turn_prepare_distance", "turn_last_change_distance", "follow_headway",
       "follow_standoff", "stop_speed", "latch_timeout", "completion_lateral", "slow_lead_borrow"},
      ctx);
  FsmConfig c;
  auto num = [&](const char * key, double & field) {
    field = io::get_or(j, key, field, ctx);
    if (!(field > 0.0) || !std::isfinite(field)) throw FormatError(std::string(ctx) + ": " + key + " must be > 0");
  };
  num("cruise_speed", c.cruise_speed);
  num("decel_limit", c.decel_limit);
  num("red_light_min_distance", c.red_light_min_distance);
  num("red_light_time_horizon", c.red_light_time_horizon);
  num("stop_margin", c.stop_margin);
  num("emergency_detect_distance", c.emergency_detect_distance);
  num("slow_lead_fraction", c.slow_lead_fraction);
  num("blocked_distance", c.blocked_distance);
  num("lead_detect_distance", c.lead_detect_distance);
  num("pedestrian_distance", c.pedestrian_distance);
  num("pedestrian_margin", c.pedestrian_margin);
  num("side_rear_gap", c.side_rear_gap);
  num("side_front_gap", c.side_front_gap);
  num("approach_time", c.approach_time);
  num("junction_lateral_clearance", c.junction_lateral_clearance);
  num("turn_prepare_distance", c.turn_prepare_distance);
  num("turn_last_change_distance", c.turn_last_change_distance);
  num("follow_headway", c.follow_headway);
  num("follow_standoff", c.follow_standoff);
  num("stop_speed", c.stop_speed);
  num("latch_timeout", c.latch_timeout);
  num("completion_lateral", c.completion_lateral);
  c.slow_lead_borrow = io::get_or(j, "slow_lead_borrow", c.slow_lead_borrow, ctx);
  return c;
}

namespace {

double braking_distance(double v, const FsmConfig & cfg) { return v * v / (2.0 * cfg.decel_limit); }

enum class Side { left, right };

std::string side_name(Side s) { return s == Side::left ? "left" : "right"; }

PathDecision change_toward(Side s) {
  return s == Side::left ? PathDecision::left_lane_change : PathDecision::right_lane_change;
}

PathDecision borrow_toward(Side s) {
  return s == Side::left ? PathDecision::left_lane_borrow : PathDecision::right_lane_borrow;
}

bool side_open(const SceneDescription & scene, Side s) {
  const auto & lane = scene.lane;
  if (s == Side::left) return lane.left_neighbor && lane.left_boundary == sim::BoundaryKind::dashed;
  return lane.right_neighbor && lane.right_boundary == sim::BoundaryKind::dashed;
}

bool side_free(const SceneDescription & scene, Side s, double front_gap, const FsmConfig & cfg) {
  const auto rel = s == Side::left ? sim::Relation::left : sim::Relation::right;
  const double v = scene.ego.speed;
  for (const auto & a : scene.actors) {
    if (a.relation != rel) continue;
    if (a.longitudinal >= -cfg.side_rear_gap && a.longitudinal <= front_gap) return false;
    if (a.longitudinal < -cfg.side_rear_gap && a.speed > v && -a.longitudinal / (a.speed - v) < cfg.approach_time) {
      return false;
    }
  }
  return true;
}

bool near_junction(const SceneDescription & scene, const FsmConfig & cfg) {
  return scene.lane.in_junction ||
         (scene.lane.distance_to_junction && *scene.lane.distance_to_junction < cfg.junction_lateral_clearance);
}

}  // namespace

bool red_light_applies(const SceneDescription & scene, const FsmConfig & cfg) {
  if (!scene.light) return false;
  const double v = scene.ego.speed;
  const double d = scene.light->stop_line_distance;
  const double relevant = std::max(cfg.red_light_min_distance, v * cfg.red_light_time_horizon + braking_distance(v, cfg));
  if (d > relevant) return false;
  if (scene.light->state == sim::LightState::red) return true;
  // yellow only when there is still room to stop
  return scene.light->state == sim::LightState::yellow && d >= braking_distance(v, cfg) + cfg.stop_margin;
}

std::pair<FsmState, FsmOutput> fsm_decide(const FsmState & state, const SceneDescription & scene,
                                          decision::NavigationCommand nav, const FsmConfig & cfg) {
  FsmState st = state;
  const auto & lane = scene.lane;
  const double v = scene.ego.speed;
  const double target = std::min(cfg.cruise_speed, lane.speed_limit);
  // accelerate only with headroom below the target speed
  const SpeedDecision pace = v < target - 0.5 ? SpeedDecision::accelerate : SpeedDecision::keep;

  // lateral lane transitions since the previous call
  int moved = 0;
  if (!st.last_lane.empty() && lane.lane_id != st.last_lane) {
    if (st.last_left && *st.last_left == lane.lane_id) moved = 1;
    if (st.last_right && *st.last_right == lane.lane_id) moved = -1;
  }
  st.last_lane = lane.lane_id;
  st.last_left = lane.left_neighbor;
  st.last_right = lane.right_neighbor;

  if (st.latch) {
    auto & l = *st.latch;
    const int out = decision::is_left(l.path) ? 1 : -1;
    if (moved == out) ++l.moves_out;
    if (moved == -out) ++l.moves_back;
    const bool centered = std::abs(lane.lateral) < cfg.completion_lateral;
    const bool done = decision::is_change(l.path) ? (l.moves_out > 0 && centered)
                                                  : (l.moves_out > 0 && l.moves_back > 0 && centered);
    if (done || scene.time - l.start_time > cfg.latch_timeout) st.latch.reset();
  }
  if (scene.stop_sign && v < cfg.stop_speed && scene.stop_sign->stop_line_distance < 8.0) {
    st.signs_cleared.insert(scene.stop_sign->id);
  }

  FsmOutput out;
  auto emit = [&](DecisionPair d, Cause cause, const explain::Slots & slots, bool continuation = false) {
    out.response.decision = d;
    out.response.explanation = explain::render_explanation(cause, d, slots).text;
    out.cause = cause;
    out.continuation = continuation;
    st.current = d;
    return std::make_pair(st, out);
  };
  auto start_latch = [&](PathDecision p, SpeedDecision s, Cause cause, Side side, explain::Slots slots) {
    Latch l;
    l.path = p;
    l.cause = cause;
    l.start_time = scene.time;
    l.source_lane = lane.lane_id;
    l.target_lane = side == Side::left ? *lane.left_neighbor : *lane.right_neighbor;
    slots.side = side_name(side);
    l.slots = slots;
    st.latch = l;
    return emit({p, s}, cause, slots);
  };

  // (1) red light, stop sign
  if (red_light_applies(scene, cfg)) {
    st.latch.reset();
    explain::Slots slots;
    slots.distance = scene.light->stop_line_distance;
    slots.light = sim::to_string(scene.light->state);
    return emit({PathDecision::follow_lane, SpeedDecision::stop}, Cause::red_light, slots);
  }
  if (scene.stop_sign && !st.signs_cleared.count(scene.stop_sign->id) &&
      scene.stop_sign->stop_line_distance <=
          std::max(cfg.red_light_min_distance, v * cfg.red_light_time_horizon + braking_distance(v, cfg))) {
    st.latch.reset();
    explain::Slots slots;
    slots.distance = scene.stop_sign->stop_line_distance;
    return emit({PathDecision::follow_lane, SpeedDecision::stop}, Cause::stop_sign, slots);
  }

  // (2) emergency vehicle behind in the ego lane
  const ActorObservation * ev = nullptr;
  for (const auto & a : scene.actors) {
    if (a.kind == sim::ActorKind::emergency_vehicle && a.relation == sim::Relation::same && a.longitudinal < 0.0 &&
        a.longitudinal >= -cfg.emergency_detect_distance) {
      if (!ev || a.longitudinal > ev->longitudinal) ev = &a;
    }
  }
  if (ev && !(st.latch && st.latch->cause == Cause::emergency_vehicle)) {
    explain::Slots slots;
    slots.actor = explain::actor_noun(ev->kind);
    slots.distance = -ev->longitudinal;
    if (!near_junction(scene, cfg)) {
      for (Side s : {Side::right, Side::left}) {
        if (side_open(scene, s) && side_free(scene, s, cfg.side_front_gap, cfg)) {
          return start_latch(change_toward(s), SpeedDecision::keep, Cause::emergency_vehicle, s, slots);
        }
      }
    }
    st.latch.reset();
    return emit({PathDecision::follow_lane, SpeedDecision::keep}, Cause::emergency_vehicle, slots);
  }

  // latched maneuver in progress
  if (st.latch) {
    const auto & l = *st.latch;
    SpeedDecision s = st.current.path == l.path ? st.current.speed : SpeedDecision::keep;
    if (s == SpeedDecision::accelerate) s = pace;
    return emit({l.path, s}, l.cause, l.slots, true);
  }

  // (3) pedestrian in or stepping into the lane
  const double half = lane.width / 2.0;
  for (const auto & a : scene.actors) {
    if (a.kind != sim::ActorKind::pedestrian || a.longitudinal <= 0.0 || a.longitudinal > cfg.pedestrian_distance) {
      continue;
    }
    const double lat_speed = a.speed * std::sin(a.heading);
    const bool inside = std::abs(a.lateral) < half + 0.5;
    const bool approaching = std::abs(a.lateral) < half + cfg.pedestrian_margin && a.speed > 0.1 &&
                             a.lateral * lat_speed < 0.0;
    if (inside || approaching) {
      explain::Slots slots;
      slots.actor = "pedestrian";
      slots.distance = a.longitudinal;
      return emit({PathDecision::follow_lane, SpeedDecision::stop}, Cause::pedestrian, slots);
    }
  }

  // (3) blocked lane or slow lead
  const ActorObservation * lead = nullptr;
  for (const auto & a : scene.actors) {
    if (a.kind == sim::ActorKind::pedestrian || a.relation != sim::Relation::same || a.longitudinal <= 0.0) continue;
    if (!lead || a.longitudinal < lead->longitudinal) lead = &a;
  }
  if (lead) {
    explain::Slots slots;
    slots.actor = explain::actor_noun(lead->kind);
    const bool lateral_ok = !near_junction(scene, cfg);
    const bool stopped = lead->kind == sim::ActorKind::static_obstacle || lead->speed < cfg.stop_speed;
    const double gap = lead->longitudinal - (lead->length + scene.ego.length) / 2.0;
    if (stopped && lead->longitudinal <= cfg.blocked_distance && lateral_ok) {
      const double front = lead->longitudinal + lead->length + cfg.side_front_gap;
      for (Side s : {Side::left, Side::right}) {
        if (side_open(scene, s) && side_free(scene, s, front, cfg)) {
          return start_latch(borrow_toward(s), pace, Cause::blocked_lane, s, slots);
        }
      }
      if (lead->kind == sim::ActorKind::static_obstacle) {
        slots.distance = gap;
        return emit({PathDecision::follow_lane, SpeedDecision::stop}, Cause::blocked_lane, slots);
      }
    }
    if (!stopped && lead->speed < cfg.slow_lead_fraction * cfg.cruise_speed &&
        lead->longitudinal <= cfg.lead_detect_distance && lateral_ok) {
      for (Side s : {Side::left, Side::right}) {
        if (side_open(scene, s) && side_free(scene, s, cfg.side_front_gap, cfg)) {
          const PathDecision p = cfg.slow_lead_borrow ? borrow_toward(s) : change_toward(s);
          return start_latch(p, pace, Cause::slow_lead, s, slots);
        }
      }
    }
    const double desired = cfg.follow_standoff + v * cfg.follow_headway;
    slots.distance = std::max(0.0, gap);
    if (stopped && gap < desired + v * v / cfg.decel_limit) {
      return emit({PathDecision::follow_lane, SpeedDecision::stop}, Cause::following, slots);
    }
    if (gap < desired && lead->speed < v - 0.5) {
      return emit({PathDecision::follow_lane, SpeedDecision::decelerate}, Cause::following, slots);
    }
    if (gap < desired) return emit({PathDecision::follow_lane, SpeedDecision::keep}, Cause::following, slots);
    // closing band: match the lead instead of pulsing between the two rules above
    if (gap < 2.0 * desired && lead->speed < target && v > lead->speed - 0.5) {
      return emit({PathDecision::follow_lane, SpeedDecision::keep}, Cause::following, slots);
    }
  }

  // (4) get into the turn lane before the junction
  if (nav != decision::NavigationCommand::follow_lane && !lane.in_junction && lane.distance_to_junction &&
      *lane.distance_to_junction <= cfg.turn_prepare_distance &&
      *lane.distance_to_junction > cfg.turn_last_change_distance) {
    const Side s = nav == decision::NavigationCommand::turn_left ? Side::left : Side::right;
    const bool in_turn_lane = s == Side::left ? !lane.left_neighbor : !lane.right_neighbor;
    if (!in_turn_lane && side_open(scene, s) && side_free(scene, s, cfg.side_front_gap, cfg)) {
      const Cause c = s == Side::left ? Cause::turn_left_prep : Cause::turn_right_prep;
      return start_latch(change_toward(s), SpeedDecision::keep, c, s, {});
    }
  }

  // (5) default
  return emit({PathDecision::follow_lane, pace}, Cause::clear_road, {});
}

}  // namespace drivebench::fsm
