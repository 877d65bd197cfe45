#include "drivebench/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace drivebench::sim {

namespace {

constexpr double kLookahead = 120.0;

bool contains(const std::vector<std::string> & v, std::string_view id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

void check_speed(double v, double cap, const std::string & what) {
  if (v > cap + 1e-9) throw FormatError(what + " exceeds its speed cap");
}

}  // namespace

Simulator::Simulator(LaneMap map, ScenarioSpec spec, SimConfig cfg)
    : map_(apply_overrides(std::move(map), spec)), spec_(std::move(spec)), cfg_(cfg) {
  validate_scenario(spec_, map_);
  for (const auto & a : spec_.actors) {
    const double cap = a.kind == ActorKind::pedestrian ? cfg_.walk_speed_cap : cfg_.v_max;
    const std::string what = "actor " + a.id;
    check_speed(a.speed, cap, what);
    check_speed(a.behavior.desired_speed, cap, what);
    const auto & tr = a.behavior.trajectory;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      check_speed(geom::distance(tr[i - 1].position, tr[i].position) / (tr[i].t - tr[i - 1].t), cap, what);
    }
  }
}

WorldState Simulator::spawn(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  WorldState w;
  const Lane & ego_lane = map_.lane(spec_.ego_lane);
  const geom::Vec2 ep = ego_lane.centerline.point_at(spec_.ego_s);
  w.ego.id = "ego";
  w.ego.kind = ActorKind::ego;
  w.ego.pose = {ep.x, ep.y, geom::normalize_angle(ego_lane.centerline.heading_at(spec_.ego_s))};
  w.ego.speed = std::clamp(spec_.ego_speed, 0.0, cfg_.v_max);
  w.ego.lane_id = ego_lane.id;

  for (const auto & a : spec_.actors) {
    ActorState st;
    ActorRuntime rt;
    st.id = a.id;
    st.kind = a.kind;
    st.length = a.length;
    st.width = a.width;
    if (a.behavior.kind == BehaviorKind::scripted_trajectory) {
      const auto & tr = a.behavior.trajectory;
      const geom::Vec2 p = tr.front().position;
      double h = a.heading;
      if (tr.size() > 1) {
        const geom::Vec2 d = tr[1].position - tr[0].position;
        if (d.norm() > 0.0) h = std::atan2(d.y, d.x);
      }
      st.pose = {p.x, p.y, geom::normalize_angle(h)};
    } else if (a.lane) {
      const Lane & l = map_.lane(*a.lane);
      const double jitter = (2.0 * uniform() - 1.0) * spec_.spawn_jitter;
      rt.lane_id = l.id;
      rt.s = std::clamp(a.s + jitter, 0.0, l.length());
      rt.lateral = a.lateral;
      const double h = l.centerline.heading_at(rt.s);
      const geom::Vec2 p = l.centerline.point_at(rt.s) + geom::left_normal(h) * rt.lateral;
      st.pose = {p.x, p.y, geom::normalize_angle(h)};
      st.lane_id = l.id;
    } else {
      st.pose = {a.position->x, a.position->y, geom::normalize_angle(a.heading)};
    }
    rt.active = !a.behavior.start_on_trigger;
    st.speed = rt.active && a.behavior.kind != BehaviorKind::stand ? a.speed : 0.0;
    w.actors.push_back(std::move(st));
    w.runtime.push_back(rt);
  }
  for (const auto & l : map_.lights()) w.light_states[l.id] = l.state_at(0.0);
  w.instruction_fired.assign(spec_.instruction_events.size(), false);
  update_bookkeeping(w, w);
  return w;
}

WorldState Simulator::step(const WorldState & world, const ControlSignal & control, double dt) const {
  if (!(dt > 0.0 && dt <= 0.2)) throw StepError("dt must lie in (0, 0.2]");
  if (!std::isfinite(control.steer) || !std::isfinite(control.accel)) throw StepError("non-finite control");

  WorldState next = world;
  next.time = world.time + dt;
  next.step_index = world.step_index + 1;

  const auto & e = world.ego;
  const double v = e.speed;
  next.ego.pose.x = e.pose.x + v * std::cos(e.pose.heading) * dt;
  next.ego.pose.y = e.pose.y + v * std::sin(e.pose.heading) * dt;
  next.ego.pose.heading = geom::normalize_angle(e.pose.heading + v * std::tan(control.steer) / cfg_.wheelbase * dt);
  next.ego.speed = std::clamp(v + control.accel * dt, 0.0, cfg_.v_max);

  advance_npcs(world, next, dt);
  for (const auto & l : map_.lights()) next.light_states[l.id] = l.state_at(next.time);
  relocalize_ego(next);
  update_bookkeeping(world, next);
  return next;
}

void Simulator::relocalize_ego(WorldState & world) const {
  std::optional<std::string_view> hint;
  if (world.ego.lane_id) hint = *world.ego.lane_id;
  const auto loc = map_.localize(world.ego.pose.position(), world.ego.pose.heading, hint, spec_.route);
  if (loc) {
    world.ego.lane_id = loc->lane_id;
  } else {
    world.ego.lane_id.reset();
  }
}

void Simulator::place_ego(WorldState & world, const Pose & pose, double speed) const {
  world.ego.pose = {pose.x, pose.y, geom::normalize_angle(pose.heading)};
  world.ego.speed = std::clamp(speed, 0.0, cfg_.v_max);
  world.ego.lane_id.reset();
  relocalize_ego(world);
  world.emergency_behind_since.clear();
  world.signs_stopped_at.clear();
}

double Simulator::idm_accel(const WorldState & world, std::size_t idx, const IdmParams & p, double desired) const {
  const ActorState & me = world.actors[idx];
  const ActorRuntime & rt = world.runtime[idx];
  const auto & spawn = spec_.actors[idx];
  const LaneChain chain = map_.chain(rt.lane_id, 0.0, rt.s + kLookahead, spawn.behavior.route);
  const double s0 = rt.s;
  double gap = std::numeric_limits<double>::infinity();
  double lead_v = 0.0;

  auto consider = [&](const ActorState & other) {
    const auto proj = chain.line.project_in_window(other.pose.position(), s0, s0 + kLookahead);
    if (!(proj.s > s0 + 1e-6)) return;
    double corridor = (me.width + other.width) / 2.0 + 0.3;
    if (other.kind == ActorKind::pedestrian) corridor += 0.5;
    if (proj.distance > corridor) return;
    const double g = proj.s - s0 - (me.length + other.length) / 2.0;
    if (g < gap) {
      gap = g;
      const double rel = other.pose.heading - chain.line.heading_at(proj.s);
      lead_v = std::max(0.0, other.speed * std::cos(rel));
    }
  };
  consider(world.ego);
  for (std::size_t j = 0; j < world.actors.size(); ++j) {
    if (j != idx) consider(world.actors[j]);
  }

  for (const auto & light : map_.lights()) {
    const auto state = world.light_states.at(light.id);
    if (state == LightState::green) continue;
    const auto sl = chain.line.intersect_segment(light.stop_line_a, light.stop_line_b);
    if (!sl || !light.controls(chain.lane_at(*sl))) continue;
    const double g = *sl - s0 - me.length / 2.0 - 0.5;
    if (g < -0.5) continue;  // already committed past the line
    if (state == LightState::yellow && g < me.speed * me.speed / (2.0 * 3.0)) continue;
    if (g < gap) {
      gap = g;
      lead_v = 0.0;
    }
  }

  const double v = me.speed;
  if (!(desired > 0.0)) return -p.max_decel;
  double a = p.max_accel * (1.0 - std::pow(v / desired, p.exponent));
  if (std::isfinite(gap)) {
    const double s = std::max(gap, 0.1);
    const double star = p.min_gap + std::max(0.0, v * p.time_headway + v * (v - lead_v) / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    a -= p.max_accel * (star / s) * (star / s);
  }
  return std::clamp(a, -p.max_decel, p.max_accel);
}

void Simulator::advance_npcs(const WorldState & prev, WorldState & next, double dt) const {
  std::vector<double> accel(prev.actors.size(), 0.0);
  for (std::size_t i = 0; i < prev.actors.size(); ++i) {
    const auto & b = spec_.actors[i].behavior;
    if (!prev.runtime[i].active || b.kind != BehaviorKind::idm_follow) continue;
    IdmParams p = cfg_.idm;
    if (b.time_headway) p.time_headway = *b.time_headway;
    if (b.min_gap) p.min_gap = *b.min_gap;
    const double desired = b.desired_speed > 0.0 ? b.desired_speed : map_.lane(prev.runtime[i].lane_id).speed_limit;
    accel[i] = idm_accel(prev, i, p, desired);
  }

  for (std::size_t i = 0; i < prev.actors.size(); ++i) {
    const auto & spawn = spec_.actors[i];
    const auto & b = spawn.behavior;
    ActorState & a = next.actors[i];
    ActorRuntime & rt = next.runtime[i];
    if (!rt.active || b.kind == BehaviorKind::stand) {
      a.speed = 0.0;
      continue;
    }
    if (b.kind == BehaviorKind::scripted_trajectory) {
      const auto & tr = b.trajectory;
      const double tau = next.time - rt.activated_at;
      geom::Vec2 p = tr.front().position;
      double speed = 0.0;
      double heading = a.pose.heading;
      if (tau >= tr.back().t) {
        p = tr.back().position;
      } else if (tau > tr.front().t) {
        std::size_t k = 1;
        while (tr[k].t < tau) ++k;
        const auto & p0 = tr[k - 1];
        const auto & p1 = tr[k];
        const double u = (tau - p0.t) / (p1.t - p0.t);
        const geom::Vec2 d = p1.position - p0.position;
        p = p0.position + d * u;
        speed = d.norm() / (p1.t - p0.t);
        if (d.norm() > 0.0) heading = std::atan2(d.y, d.x);
      }
      a.pose = {p.x, p.y, geom::normalize_angle(heading)};
      a.speed = speed;
      continue;
    }
    const double v0 = prev.actors[i].speed;
    double v1 = v0;
    if (b.kind == BehaviorKind::constant_speed) {
      v1 = b.desired_speed > 0.0 ? b.desired_speed : spawn.speed;
    } else {
      v1 = v0 + accel[i] * dt;
    }
    v1 = std::clamp(v1, 0.0, cfg_.v_max);
    rt.s += 0.5 * (v0 + v1) * dt;
    for (int guard = 0; guard < 8; ++guard) {
      const Lane & l = map_.lane(rt.lane_id);
      if (rt.s <= l.length() || l.successors.empty()) break;
      rt.s -= l.length();
      std::string nxt = l.successors.front();
      for (const auto & s : l.successors) {
        if (contains(b.route, s)) {
          nxt = s;
          break;
        }
      }
      rt.lane_id = nxt;
    }
    const Lane & l = map_.lane(rt.lane_id);
    const double h = l.centerline.heading_at(rt.s);
    const geom::Vec2 p = l.centerline.point_at(rt.s) + geom::left_normal(h) * rt.lateral;
    a.pose = {p.x, p.y, geom::normalize_angle(h)};
    a.speed = v1;
    a.lane_id = rt.lane_id;
  }
}

void Simulator::update_bookkeeping(const WorldState & prev, WorldState & next) const {
  (void)prev;
  const geom::Vec2 ego_p = next.ego.pose.position();
  if (!next.triggered && geom::distance(ego_p, spec_.trigger_point) <= spec_.trigger_radius) {
    next.triggered = true;
    next.trigger_time = next.time;
    for (std::size_t i = 0; i < spec_.actors.size(); ++i) {
      auto & rt = next.runtime[i];
      if (rt.active) continue;
      rt.active = true;
      rt.activated_at = next.time;
      if (spec_.actors[i].behavior.kind != BehaviorKind::stand) next.actors[i].speed = spec_.actors[i].speed;
    }
  }

  if (next.pending_instruction && next.time >= next.instruction_expires - 1e-9) next.pending_instruction.reset();
  for (std::size_t k = 0; k < spec_.instruction_events.size(); ++k) {
    if (next.instruction_fired[k]) continue;
    const auto & ev = spec_.instruction_events[k];
    const bool due = ev.time ? next.time >= *ev.time - 1e-9
                             : next.triggered && next.time >= next.trigger_time + *ev.after_trigger - 1e-9;
    if (!due) continue;
    next.instruction_fired[k] = true;
    next.pending_instruction = ev.text;
    next.instruction_expires = next.time + cfg_.instruction_hold;
  }

  if (!next.ego.lane_id) {
    next.emergency_behind_since.clear();
    return;
  }
  const Lane & ego_lane = map_.lane(*next.ego.lane_id);
  const LaneChain chain = map_.chain(ego_lane.id, 40.0, ego_lane.length(), spec_.route);
  const double ego_s = chain.line.project(ego_p).s;
  for (const auto & a : next.actors) {
    if (a.kind != ActorKind::emergency_vehicle) continue;
    const auto proj = chain.line.project_in_window(a.pose.position(), ego_s - 40.0, ego_s);
    const bool behind = proj.s < ego_s && std::abs(proj.lateral) < ego_lane.width / 2.0 &&
                        geom::distance(a.pose.position(), ego_p) <= cfg_.yield_distance;
    if (behind) {
      next.emergency_behind_since.try_emplace(a.id, next.time);
    } else {
      next.emergency_behind_since.erase(a.id);
    }
  }

  for (const auto & sign : map_.stop_signs()) {
    if (sign.lane_id != ego_lane.id) continue;
    const auto line_s = ego_lane.centerline.intersect_segment(sign.stop_line_a, sign.stop_line_b);
    const double s = ego_lane.centerline.project(ego_p).s;
    if (!line_s) continue;
    const double d = *line_s - s;
    if (d < 0.0) {
      next.signs_stopped_at.erase(sign.id);
    } else if (d <= cfg_.stop_sign_zone && next.ego.speed < cfg_.stop_sign_speed) {
      next.signs_stopped_at.insert(sign.id);
    }
  }
}

std::vector<Infraction> detect_infractions(const WorldState & prev, const WorldState & next, const LaneMap & map,
                                           const SimConfig & cfg) {
  std::vector<Infraction> out;
  const geom::Vec2 p0 = prev.ego.pose.position();
  const geom::Vec2 p1 = next.ego.pose.position();
  const auto ego_box_prev = prev.ego.box();
  const auto ego_box_next = next.ego.box();

  for (const auto & a : next.actors) {
    if (!geom::overlaps(ego_box_next, a.box())) continue;
    const ActorState * before = prev.find_actor(a.id);
    if (before && geom::overlaps(ego_box_prev, before->box())) continue;
    InfractionKind kind = InfractionKind::collision_vehicle;
    if (a.kind == ActorKind::pedestrian) kind = InfractionKind::collision_pedestrian;
    if (a.kind == ActorKind::static_obstacle) kind = InfractionKind::collision_static;
    out.push_back({kind, next.time, p1, a.id});
  }

  if (prev.ego.lane_id) {
    const std::string & lane_id = *prev.ego.lane_id;
    for (const auto & light : map.lights()) {
      if (!light.controls(lane_id)) continue;
      const auto it = prev.light_states.find(light.id);
      if (it == prev.light_states.end() || it->second != LightState::red) continue;
      if (geom::segments_intersect(p0, p1, light.stop_line_a, light.stop_line_b)) {
        out.push_back({InfractionKind::red_light, next.time, p1, light.id});
      }
    }
    for (const auto & sign : map.stop_signs()) {
      if (sign.lane_id != lane_id || prev.signs_stopped_at.count(sign.id)) continue;
      if (geom::segments_intersect(p0, p1, sign.stop_line_a, sign.stop_line_b)) {
        out.push_back({InfractionKind::stop_sign, next.time, p1, sign.id});
      }
    }
    const Lane & lane = map.lane(lane_id);
    const auto a = lane.centerline.project(p0);
    const auto b = lane.centerline.project(p1);
    const double half = lane.width / 2.0;
    if (b.s >= 0.0 && b.s <= lane.length()) {
      const bool left = lane.left_boundary == BoundaryKind::double_solid && a.lateral <= half && b.lateral > half;
      const bool right = lane.right_boundary == BoundaryKind::double_solid && a.lateral >= -half && b.lateral < -half;
      if (left || right) out.push_back({InfractionKind::double_solid_crossing, next.time, p1, lane_id});
    }
  }

  for (const auto & [id, since] : next.emergency_behind_since) {
    const bool now = next.time - since >= cfg.yield_time - 1e-9;
    if (!now) continue;
    const auto it = prev.emergency_behind_since.find(id);
    const bool before = it != prev.emergency_behind_since.end() && it->second == since &&
                        prev.time - since >= cfg.yield_time - 1e-9;
    if (!before) out.push_back({InfractionKind::failed_yield_emergency, next.time, p1, id});
  }
  return out;
}

}  // namespace drivebench::sim
