#include "drivebench/scenario.hpp"

#include <algorithm>
#include <set>

namespace drivebench::sim {

std::string to_string(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::idm_follow: return "idm_follow";
    case BehaviorKind::constant_speed: return "constant_speed";
    case BehaviorKind::scripted_trajectory: return "scripted_trajectory";
    case BehaviorKind::stand: return "stand";
  }
  return "stand";
}

namespace {

BehaviorKind behavior_from_string(std::string_view s) {
  for (auto k : {BehaviorKind::idm_follow, BehaviorKind::constant_speed, BehaviorKind::scripted_trajectory,
                 BehaviorKind::stand}) {
    if (to_string(k) == s) return k;
  }
  throw FormatError("unknown behavior '" + std::string(s) + "'");
}

BehaviorSpec parse_behavior(const json & j, const std::string & ctx) {
  io::require_known_keys(j, {"kind", "desired_speed", "time_headway", "min_gap", "trajectory", "route", "start"}, ctx);
  BehaviorSpec b;
  b.kind = behavior_from_string(io::get_required<std::string>(j, "kind", ctx));
  b.desired_speed = io::get_or<double>(j, "desired_speed", 0.0, ctx);
  if (j.contains("time_headway")) b.time_headway = io::get_required<double>(j, "time_headway", ctx);
  if (j.contains("min_gap")) b.min_gap = io::get_required<double>(j, "min_gap", ctx);
  b.route = io::get_or<std::vector<std::string>>(j, "route", {}, ctx);
  const auto start = io::get_or<std::string>(j, "start", "immediate", ctx);
  if (start != "immediate" && start != "trigger") throw FormatError(ctx + ": start must be immediate or trigger");
  b.start_on_trigger = start == "trigger";
  if (j.contains("trajectory")) {
    for (const auto & p : j["trajectory"]) {
      if (!p.is_array() || p.size() != 3) throw FormatError(ctx + ": trajectory points are [t, x, y]");
      b.trajectory.push_back({p[0].get<double>(), {p[1].get<double>(), p[2].get<double>()}});
    }
  }
  if (b.kind == BehaviorKind::scripted_trajectory) {
    if (b.trajectory.empty()) throw FormatError(ctx + ": scripted_trajectory needs points");
    for (std::size_t i = 1; i < b.trajectory.size(); ++i) {
      if (!(b.trajectory[i].t > b.trajectory[i - 1].t)) throw FormatError(ctx + ": trajectory times must increase");
    }
  }
  if (b.desired_speed < 0.0) throw FormatError(ctx + ": desired_speed must be >= 0");
  return b;
}

std::vector<LightPhase> parse_phases(const json & arr, const std::string & ctx) {
  std::vector<LightPhase> out;
  if (!arr.is_array() || arr.empty()) throw FormatError(ctx + ": schedule must be a non-empty array");
  for (const auto & ph : arr) {
    io::require_known_keys(ph, {"state", "duration"}, ctx);
    LightPhase p{light_state_from_string(io::get_required<std::string>(ph, "state", ctx)),
                 io::get_required<double>(ph, "duration", ctx)};
    if (!(p.duration > 0.0)) throw FormatError(ctx + ": phase duration must be > 0");
    out.push_back(p);
  }
  return out;
}

}  // namespace

ScenarioSpec ScenarioSpec::from_json(const json & doc) {
  io::require_known_keys(doc,
                         {"format_version", "id", "name", "map", "ego", "route", "route_length", "trigger", "actors",
                          "instruction_events", "light_overrides", "spawn_jitter"},
                         "scenario");
  io::require_format_version(doc, kFormatVersion, "scenario");
  ScenarioSpec s;
  s.id = io::get_required<std::string>(doc, "id", "scenario");
  const std::string ctx = "scenario " + s.id;
  s.name = io::get_or<std::string>(doc, "name", s.id, ctx);
  s.map = io::get_required<std::string>(doc, "map", ctx);

  if (!doc.contains("ego")) throw FormatError(ctx + ": missing ego");
  const auto & ego = doc["ego"];
  io::require_known_keys(ego, {"lane", "s", "speed"}, ctx + " ego");
  s.ego_lane = io::get_required<std::string>(ego, "lane", ctx);
  s.ego_s = io::get_required<double>(ego, "s", ctx);
  s.ego_speed = io::get_or<double>(ego, "speed", 0.0, ctx);

  s.route = io::get_required<std::vector<std::string>>(doc, "route", ctx);
  if (s.route.empty()) throw FormatError(ctx + ": route must not be empty");
  if (doc.contains("route_length")) {
    s.route_length = io::get_required<double>(doc, "route_length", ctx);
    if (!(*s.route_length > 0.0)) throw FormatError(ctx + ": route_length must be > 0");
  }

  if (!doc.contains("trigger")) throw FormatError(ctx + ": missing trigger");
  io::require_known_keys(doc["trigger"], {"point", "radius"}, ctx + " trigger");
  s.trigger_point = io::vec2_from_json(doc["trigger"]["point"], ctx + " trigger");
  s.trigger_radius = io::get_or<double>(doc["trigger"], "radius", 30.0, ctx);
  if (!(s.trigger_radius > 0.0)) throw FormatError(ctx + ": trigger radius must be > 0");

  std::set<std::string> ids;
  for (const auto & aj : doc.value("actors", json::array())) {
    io::require_known_keys(aj,
                           {"id", "kind", "lane", "s", "lateral", "position", "heading", "speed", "length", "width",
                            "behavior"},
                           ctx + " actor");
    ActorSpawn a;
    a.id = io::get_required<std::string>(aj, "id", ctx);
    const std::string actx = ctx + " actor " + a.id;
    if (a.id == "ego" || !ids.insert(a.id).second) throw FormatError(actx + ": duplicate or reserved id");
    a.kind = actor_kind_from_string(io::get_required<std::string>(aj, "kind", actx));
    if (a.kind == ActorKind::ego) throw FormatError(actx + ": kind ego is reserved");
    if (aj.contains("lane")) a.lane = io::get_required<std::string>(aj, "lane", actx);
    a.s = io::get_or<double>(aj, "s", 0.0, actx);
    a.lateral = io::get_or<double>(aj, "lateral", 0.0, actx);
    if (aj.contains("position")) a.position = io::vec2_from_json(aj["position"], actx);
    a.heading = io::get_or<double>(aj, "heading", 0.0, actx);
    a.speed = io::get_or<double>(aj, "speed", 0.0, actx);
    const bool small = a.kind == ActorKind::pedestrian;
    a.length = io::get_or<double>(aj, "length", small ? 0.6 : 4.6, actx);
    a.width = io::get_or<double>(aj, "width", small ? 0.6 : 2.0, actx);
    if (!(a.length > 0.0) || !(a.width > 0.0)) throw FormatError(actx + ": bbox dims must be > 0");
    if (a.speed < 0.0) throw FormatError(actx + ": speed must be >= 0");
    if (aj.contains("behavior")) {
      a.behavior = parse_behavior(aj["behavior"], actx);
    }
    if (!a.lane && !a.position && a.behavior.kind != BehaviorKind::scripted_trajectory) {
      throw FormatError(actx + ": needs a lane or a position");
    }
    if (a.kind == ActorKind::static_obstacle && (a.speed != 0.0 || a.behavior.kind != BehaviorKind::stand)) {
      throw FormatError(actx + ": static obstacles stand still");
    }
    if ((a.behavior.kind == BehaviorKind::idm_follow || a.behavior.kind == BehaviorKind::constant_speed) && !a.lane) {
      throw FormatError(actx + ": lane-following behavior needs a lane");
    }
    s.actors.push_back(std::move(a));
  }
  std::sort(s.actors.begin(), s.actors.end(), [](const auto & x, const auto & y) { return x.id < y.id; });

  for (const auto & ej : doc.value("instruction_events", json::array())) {
    io::require_known_keys(ej, {"time", "after_trigger", "text"}, ctx + " instruction");
    InstructionEvent e;
    if (ej.contains("time")) e.time = io::get_required<double>(ej, "time", ctx);
    if (ej.contains("after_trigger")) e.after_trigger = io::get_required<double>(ej, "after_trigger", ctx);
    if (e.time.has_value() == e.after_trigger.has_value()) {
      throw FormatError(ctx + ": instruction event needs exactly one of time / after_trigger");
    }
    e.text = io::get_required<std::string>(ej, "text", ctx);
    if (e.text.empty()) throw FormatError(ctx + ": empty instruction text");
    s.instruction_events.push_back(std::move(e));
  }

  for (const auto & oj : doc.value("light_overrides", json::array())) {
    io::require_known_keys(oj, {"light", "schedule", "offset"}, ctx + " light override");
    LightOverride o;
    o.light = io::get_required<std::string>(oj, "light", ctx);
    o.schedule = parse_phases(oj.at("schedule"), ctx + " light override");
    o.offset = io::get_or<double>(oj, "offset", 0.0, ctx);
    s.light_overrides.push_back(std::move(o));
  }
  s.spawn_jitter = io::get_or<double>(doc, "spawn_jitter", 0.5, ctx);
  if (s.spawn_jitter < 0.0) throw FormatError(ctx + ": spawn_jitter must be >= 0");
  return s;
}

ScenarioSpec ScenarioSpec::load(const std::filesystem::path & path) {
  return from_json(io::read_json_file(path));
}

void validate_scenario(const ScenarioSpec & spec, const LaneMap & map) {
  const std::string ctx = "scenario " + spec.id;
  if (spec.map != map.id()) throw FormatError(ctx + ": expects map " + spec.map + ", got " + map.id());
  auto need_lane = [&](const std::string & id) -> const Lane & {
    const Lane * l = map.find_lane(id);
    if (!l) throw FormatError(ctx + ": unknown lane " + id);
    return *l;
  };
  const Lane & ego_lane = need_lane(spec.ego_lane);
  if (spec.ego_s < 0.0 || spec.ego_s > ego_lane.length()) throw FormatError(ctx + ": ego s outside its lane");
  for (const auto & id : spec.route) need_lane(id);
  LaneChain route;
  try {
    route = map.chain_through(spec.route);
  } catch (const std::invalid_argument & e) {
    throw FormatError(ctx + ": route is not connected: " + e.what());
  }
  const Lane & first = map.lane(spec.route.front());
  if (spec.ego_lane != first.id && spec.ego_lane != first.left_neighbor && spec.ego_lane != first.right_neighbor) {
    throw FormatError(ctx + ": ego must start on the first route lane or its neighbor");
  }
  const auto tp = route.line.project_in_window(spec.trigger_point, 0.0, route.line.length());
  if (tp.distance > first.width * 1.5) throw FormatError(ctx + ": trigger point is not on the route");
  for (const auto & a : spec.actors) {
    if (a.lane) {
      const Lane & l = need_lane(*a.lane);
      if (a.s < 0.0 || a.s > l.length()) throw FormatError(ctx + ": actor " + a.id + " s outside its lane");
    }
    for (const auto & id : a.behavior.route) need_lane(id);
  }
  for (const auto & o : spec.light_overrides) {
    if (!map.find_light(o.light)) throw FormatError(ctx + ": unknown light " + o.light);
  }
}

LaneMap apply_overrides(LaneMap map, const ScenarioSpec & spec) {
  for (const auto & o : spec.light_overrides) map.override_light(o.light, o.schedule, o.offset);
  return map;
}

}  // namespace drivebench::sim
