#include "drivebench/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drivebench::sim {

std::string to_string(Relation r) {
  switch (r) {
    case Relation::same: return "same";
    case Relation::left: return "left";
    case Relation::right: return "right";
    case Relation::other: return "other";
  }
  return "other";
}

Relation relation_from_string(std::string_view s) {
  if (s == "same") return Relation::same;
  if (s == "left") return Relation::left;
  if (s == "right") return Relation::right;
  if (s == "other") return Relation::other;
  throw FormatError("unknown relation '" + std::string(s) + "'");
}

namespace {

double q(double v) { return io::quantize(v, 3); }

template <typename T>
void put_opt(ordered_json & j, const char * key, const std::optional<T> & v) {
  if (v) j[key] = *v;
}

}  // namespace

ordered_json SceneDescription::to_json() const {
  ordered_json j;
  j["time"] = time;
  j["ego"] = {{"x", ego.x}, {"y", ego.y}, {"heading", ego.heading}, {"speed", ego.speed},
              {"length", ego.length}, {"width", ego.width}};
  ordered_json l;
  l["id"] = lane.lane_id;
  l["s"] = lane.s;
  l["lateral"] = lane.lateral;
  l["width"] = lane.width;
  l["speed_limit"] = lane.speed_limit;
  l["in_junction"] = lane.in_junction;
  put_opt(l, "left_neighbor", lane.left_neighbor);
  put_opt(l, "right_neighbor", lane.right_neighbor);
  l["left_boundary"] = sim::to_string(lane.left_boundary);
  l["right_boundary"] = sim::to_string(lane.right_boundary);
  put_opt(l, "distance_to_junction", lane.distance_to_junction);
  j["lane"] = std::move(l);
  if (light) {
    j["light"] = {{"id", light->id}, {"state", sim::to_string(light->state)},
                  {"stop_line_distance", light->stop_line_distance}};
  }
  if (stop_sign) {
    j["stop_sign"] = {{"id", stop_sign->id}, {"stop_line_distance", stop_sign->stop_line_distance}};
  }
  ordered_json arr = ordered_json::array();
  for (const auto & a : actors) {
    arr.push_back({{"id", a.id},
                   {"kind", sim::to_string(a.kind)},
                   {"longitudinal", a.longitudinal},
                   {"lateral", a.lateral},
                   {"heading", a.heading},
                   {"speed", a.speed},
                   {"length", a.length},
                   {"width", a.width},
                   {"relation", sim::to_string(a.relation)}});
  }
  j["actors"] = std::move(arr);
  put_opt(j, "instruction", instruction);
  return j;
}

SceneDescription SceneDescription::from_json(const json & j) {
  const char * ctx = "scene";
  if (!j.is_object()) throw FormatError("scene: expected an object");
  SceneDescription s;
  s.time = io::get_required<double>(j, "time", ctx);
  const auto & e = j.at("ego");
  s.ego = {io::get_required<double>(e, "x", ctx),      io::get_required<double>(e, "y", ctx),
           io::get_required<double>(e, "heading", ctx), io::get_required<double>(e, "speed", ctx),
           io::get_required<double>(e, "length", ctx),  io::get_required<double>(e, "width", ctx)};
  if (!j.contains("lane")) throw FormatError("scene: missing lane");
  const auto & l = j.at("lane");
  s.lane.lane_id = io::get_required<std::string>(l, "id", ctx);
  s.lane.s = io::get_required<double>(l, "s", ctx);
  s.lane.lateral = io::get_required<double>(l, "lateral", ctx);
  s.lane.width = io::get_required<double>(l, "width", ctx);
  s.lane.speed_limit = io::get_required<double>(l, "speed_limit", ctx);
  s.lane.in_junction = io::get_required<bool>(l, "in_junction", ctx);
  if (l.contains("left_neighbor")) s.lane.left_neighbor = io::get_required<std::string>(l, "left_neighbor", ctx);
  if (l.contains("right_neighbor")) s.lane.right_neighbor = io::get_required<std::string>(l, "right_neighbor", ctx);
  s.lane.left_boundary = boundary_kind_from_string(io::get_required<std::string>(l, "left_boundary", ctx));
  s.lane.right_boundary = boundary_kind_from_string(io::get_required<std::string>(l, "right_boundary", ctx));
  if (l.contains("distance_to_junction")) {
    s.lane.distance_to_junction = io::get_required<double>(l, "distance_to_junction", ctx);
  }
  if (j.contains("light")) {
    const auto & t = j.at("light");
    s.light = LightObservation{io::get_required<std::string>(t, "id", ctx),
                               light_state_from_string(io::get_required<std::string>(t, "state", ctx)),
                               io::get_required<double>(t, "stop_line_distance", ctx)};
  }
  if (j.contains("stop_sign")) {
    const auto & t = j.at("stop_sign");
    s.stop_sign = StopSignObservation{io::get_required<std::string>(t, "id", ctx),
                                      io::get_required<double>(t, "stop_line_distance", ctx)};
  }
  if (j.contains("actors")) {
    if (!j.at("actors").is_array()) throw FormatError("scene: actors must be an array");
    for (const auto & a : j.at("actors")) {
      ActorObservation o;
      o.id = io::get_required<std::string>(a, "id", ctx);
      o.kind = actor_kind_from_string(io::get_required<std::string>(a, "kind", ctx));
      o.longitudinal = io::get_required<double>(a, "longitudinal", ctx);
      o.lateral = io::get_required<double>(a, "lateral", ctx);
      o.heading = io::get_required<double>(a, "heading", ctx);
      o.speed = io::get_required<double>(a, "speed", ctx);
      o.length = io::get_required<double>(a, "length", ctx);
      o.width = io::get_required<double>(a, "width", ctx);
      o.relation = relation_from_string(io::get_required<std::string>(a, "relation", ctx));
      s.actors.push_back(std::move(o));
    }
  }
  if (j.contains("instruction")) s.instruction = io::get_required<std::string>(j, "instruction", ctx);
  return s;
}

bool SceneDescription::operator==(const SceneDescription & o) const { return to_json() == o.to_json(); }

SceneDescription perceive(const WorldState & world, const LaneMap & map, double range,
                          std::span<const std::string> route) {
  if (!(range > 0.0)) throw std::invalid_argument("perception range must be > 0");
  if (!world.ego.lane_id) throw OffMapError("ego is off the map");
  const Lane & lane = map.lane(*world.ego.lane_id);
  const geom::Vec2 ego_p = world.ego.pose.position();
  const auto lp = lane.centerline.project(ego_p);

  SceneDescription s;
  s.time = q(world.time);
  s.ego = {q(ego_p.x), q(ego_p.y), q(world.ego.pose.heading), q(world.ego.speed), q(world.ego.length),
           q(world.ego.width)};
  s.lane.lane_id = lane.id;
  s.lane.s = q(lp.s);
  s.lane.lateral = q(lp.lateral);
  s.lane.width = q(lane.width);
  s.lane.speed_limit = q(lane.speed_limit);
  s.lane.in_junction = lane.in_junction;
  s.lane.left_neighbor = lane.left_neighbor;
  s.lane.right_neighbor = lane.right_neighbor;
  s.lane.left_boundary = lane.left_boundary;
  s.lane.right_boundary = lane.right_boundary;

  const LaneChain chain = map.chain(lane.id, range, lp.s + range, route);
  std::size_t ego_idx = 0;
  while (chain.lane_ids[ego_idx] != lane.id) ++ego_idx;
  const double ego_s = chain.lane_start[ego_idx] + lp.s;

  if (lane.in_junction) {
    s.lane.distance_to_junction = 0.0;
  } else {
    for (std::size_t i = ego_idx + 1; i < chain.lane_ids.size(); ++i) {
      if (map.lane(chain.lane_ids[i]).in_junction) {
        s.lane.distance_to_junction = q(chain.lane_start[i] - ego_s);
        break;
      }
    }
  }

  double best_light = std::numeric_limits<double>::infinity();
  for (const auto & light : map.lights()) {
    for (std::size_t i = ego_idx; i < chain.lane_ids.size(); ++i) {
      if (!light.controls(chain.lane_ids[i])) continue;
      const Lane & cl = map.lane(chain.lane_ids[i]);
      const auto at = cl.centerline.intersect_segment(light.stop_line_a, light.stop_line_b);
      if (!at) continue;
      const double d = chain.lane_start[i] + *at - ego_s;
      if (d >= 0.0 && d <= range && d < best_light) {
        best_light = d;
        s.light = LightObservation{light.id, world.light_states.at(light.id), q(d)};
      }
    }
  }
  double best_sign = std::numeric_limits<double>::infinity();
  for (const auto & sign : map.stop_signs()) {
    for (std::size_t i = ego_idx; i < chain.lane_ids.size(); ++i) {
      if (chain.lane_ids[i] != sign.lane_id) continue;
      const auto at = map.lane(sign.lane_id).centerline.intersect_segment(sign.stop_line_a, sign.stop_line_b);
      if (!at) continue;
      const double d = chain.lane_start[i] + *at - ego_s;
      if (d >= 0.0 && d <= range && d < best_sign) {
        best_sign = d;
        s.stop_sign = StopSignObservation{sign.id, q(d)};
      }
    }
  }

  const double w = lane.width;
  for (const auto & a : world.actors) {
    const geom::Vec2 p = a.pose.position();
    if (geom::distance(p, ego_p) > range) continue;
    const auto proj = chain.line.project(p);
    ActorObservation o;
    o.id = a.id;
    o.kind = a.kind;
    o.longitudinal = q(proj.s - ego_s);
    o.lateral = q(proj.lateral);
    o.heading = q(geom::normalize_angle(a.pose.heading - chain.line.heading_at(proj.s)));
    o.speed = q(a.speed);
    o.length = q(a.length);
    o.width = q(a.width);
    if (std::abs(proj.lateral) < w / 2.0) {
      o.relation = Relation::same;
    } else if (proj.lateral > 0.0 && proj.lateral < 1.5 * w) {
      o.relation = Relation::left;
    } else if (proj.lateral < 0.0 && proj.lateral > -1.5 * w) {
      o.relation = Relation::right;
    } else {
      o.relation = Relation::other;
    }
    s.actors.push_back(std::move(o));
  }
  std::sort(s.actors.begin(), s.actors.end(), [](const auto & x, const auto & y) { return x.id < y.id; });
  s.instruction = world.pending_instruction;
  return s;
}

}  // namespace drivebench::sim
