#include "drivebench/map.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace drivebench::sim {

std::string to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::dashed: return "dashed";
    case BoundaryKind::solid: return "solid";
    case BoundaryKind::double_solid: return "double_solid";
  }
  return "solid";
}

std::string to_string(LightState s) {
  switch (s) {
    case LightState::red: return "red";
    case LightState::yellow: return "yellow";
    case LightState::green: return "green";
  }
  return "red";
}

BoundaryKind boundary_kind_from_string(std::string_view s) {
  if (s == "dashed") return BoundaryKind::dashed;
  if (s == "solid") return BoundaryKind::solid;
  if (s == "double_solid") return BoundaryKind::double_solid;
  throw FormatError("unknown boundary kind '" + std::string(s) + "'");
}

LightState light_state_from_string(std::string_view s) {
  if (s == "red") return LightState::red;
  if (s == "yellow") return LightState::yellow;
  if (s == "green") return LightState::green;
  throw FormatError("unknown light state '" + std::string(s) + "'");
}

LightState TrafficLight::state_at(double time) const {
  double cycle = 0.0;
  for (const auto & p : schedule) cycle += p.duration;
  double t = std::fmod(time + offset, cycle);
  if (t < 0.0) t += cycle;
  for (const auto & p : schedule) {
    if (t < p.duration) return p.state;
    t -= p.duration;
  }
  return schedule.back().state;
}

bool TrafficLight::controls(std::string_view lane_id) const {
  return std::find(controlled_lanes.begin(), controlled_lanes.end(), lane_id) != controlled_lanes.end();
}

std::optional<double> LaneChain::station_of(std::string_view lane_id, double lane_s) const {
  for (std::size_t i = 0; i < lane_ids.size(); ++i) {
    if (lane_ids[i] == lane_id) return lane_start[i] + lane_s;
  }
  return std::nullopt;
}

std::string_view LaneChain::lane_at(double s) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < lane_start.size(); ++i) {
    if (lane_start[i] <= s) idx = i;
  }
  return lane_ids[idx];
}

namespace {

std::vector<LightPhase> parse_schedule(const json & arr, std::string_view ctx) {
  if (!arr.is_array() || arr.empty()) throw FormatError(std::string(ctx) + ": schedule must be a non-empty array");
  std::vector<LightPhase> out;
  for (const auto & ph : arr) {
    io::require_known_keys(ph, {"state", "duration"}, ctx);
    LightPhase p;
    p.state = light_state_from_string(io::get_required<std::string>(ph, "state", ctx));
    p.duration = io::get_required<double>(ph, "duration", ctx);
    if (!(p.duration > 0.0)) throw FormatError(std::string(ctx) + ": phase duration must be > 0");
    out.push_back(p);
  }
  return out;
}

}  // namespace

LaneMap LaneMap::from_json(const json & doc) {
  io::require_known_keys(doc, {"format_version", "id", "lanes", "lights", "stop_signs"}, "map");
  io::require_format_version(doc, kFormatVersion, "map");
  LaneMap m;
  m.id_ = io::get_required<std::string>(doc, "id", "map");
  if (!doc.contains("lanes") || !doc["lanes"].is_array()) throw FormatError("map: 'lanes' must be an array");
  for (const auto & lj : doc["lanes"]) {
    io::require_known_keys(lj,
                           {"id", "centerline", "width", "left_neighbor", "right_neighbor", "left_boundary",
                            "right_boundary", "successors", "in_junction", "speed_limit"},
                           "lane");
    Lane lane;
    lane.id = io::get_required<std::string>(lj, "id", "lane");
    const std::string ctx = "lane " + lane.id;
    std::vector<geom::Vec2> pts;
    if (!lj.contains("centerline") || !lj["centerline"].is_array()) throw FormatError(ctx + ": missing centerline");
    for (const auto & p : lj["centerline"]) pts.push_back(io::vec2_from_json(p, ctx));
    try {
      lane.centerline = geom::Polyline(std::move(pts));
    } catch (const std::invalid_argument & e) {
      throw FormatError(ctx + ": " + e.what());
    }
    lane.width = io::get_required<double>(lj, "width", ctx);
    if (lj.contains("left_neighbor")) lane.left_neighbor = io::get_required<std::string>(lj, "left_neighbor", ctx);
    if (lj.contains("right_neighbor")) lane.right_neighbor = io::get_required<std::string>(lj, "right_neighbor", ctx);
    lane.left_boundary = boundary_kind_from_string(io::get_or<std::string>(lj, "left_boundary", "solid", ctx));
    lane.right_boundary = boundary_kind_from_string(io::get_or<std::string>(lj, "right_boundary", "solid", ctx));
    lane.successors = io::get_or<std::vector<std::string>>(lj, "successors", {}, ctx);
    lane.in_junction = io::get_or<bool>(lj, "in_junction", false, ctx);
    lane.speed_limit = io::get_required<double>(lj, "speed_limit", ctx);
    if (m.index_.count(lane.id)) throw FormatError("map: duplicate lane id " + lane.id);
    m.index_.emplace(lane.id, m.lanes_.size());
    m.lanes_.push_back(std::move(lane));
  }
  if (doc.contains("lights")) {
    for (const auto & tj : doc["lights"]) {
      io::require_known_keys(tj, {"id", "controlled_lanes", "stop_line", "schedule", "offset"}, "light");
      TrafficLight l;
      l.id = io::get_required<std::string>(tj, "id", "light");
      const std::string ctx = "light " + l.id;
      l.controlled_lanes = io::get_required<std::vector<std::string>>(tj, "controlled_lanes", ctx);
      if (!tj.contains("stop_line") || !tj["stop_line"].is_array() || tj["stop_line"].size() != 2) {
        throw FormatError(ctx + ": stop_line must be two points");
      }
      l.stop_line_a = io::vec2_from_json(tj["stop_line"][0], ctx);
      l.stop_line_b = io::vec2_from_json(tj["stop_line"][1], ctx);
      if (!tj.contains("schedule")) throw FormatError(ctx + ": missing schedule");
      l.schedule = parse_schedule(tj["schedule"], ctx);
      l.offset = io::get_or<double>(tj, "offset", 0.0, ctx);
      m.lights_.push_back(std::move(l));
    }
  }
  if (doc.contains("stop_signs")) {
    for (const auto & sj : doc["stop_signs"]) {
      io::require_known_keys(sj, {"id", "lane", "stop_line"}, "stop_sign");
      StopSign s;
      s.id = io::get_required<std::string>(sj, "id", "stop_sign");
      s.lane_id = io::get_required<std::string>(sj, "lane", "stop_sign " + s.id);
      if (!sj.contains("stop_line") || sj["stop_line"].size() != 2) {
        throw FormatError("stop_sign " + s.id + ": stop_line must be two points");
      }
      s.stop_line_a = io::vec2_from_json(sj["stop_line"][0], "stop_sign");
      s.stop_line_b = io::vec2_from_json(sj["stop_line"][1], "stop_sign");
      m.stop_signs_.push_back(std::move(s));
    }
  }
  m.validate();
  return m;
}

LaneMap LaneMap::load(const std::filesystem::path & path) { return from_json(io::read_json_file(path)); }

void LaneMap::validate() const {
  for (const auto & lane : lanes_) {
    const std::string ctx = "lane " + lane.id;
    if (!(lane.width > 0.0)) throw FormatError(ctx + ": width must be > 0");
    if (!(lane.speed_limit > 0.0)) throw FormatError(ctx + ": speed_limit must be > 0");
    if (lane.left_neighbor) {
      const Lane * n = find_lane(*lane.left_neighbor);
      if (!n) throw FormatError(ctx + ": unknown left neighbor " + *lane.left_neighbor);
      if (n->right_neighbor != lane.id) throw FormatError(ctx + ": left neighbor relation is not symmetric");
    }
    if (lane.right_neighbor) {
      const Lane * n = find_lane(*lane.right_neighbor);
      if (!n) throw FormatError(ctx + ": unknown right neighbor " + *lane.right_neighbor);
      if (n->left_neighbor != lane.id) throw FormatError(ctx + ": right neighbor relation is not symmetric");
    }
    for (const auto & succ : lane.successors) {
      const Lane * n = find_lane(succ);
      if (!n) throw FormatError(ctx + ": unknown successor " + succ);
      if (geom::distance(lane.centerline.points().back(), n->centerline.points().front()) > 0.5) {
        throw FormatError(ctx + ": successor " + succ + " does not start where the lane ends");
      }
    }
  }
  for (const auto & light : lights_) {
    for (const auto & lid : light.controlled_lanes) {
      const Lane * l = find_lane(lid);
      if (!l) throw FormatError("light " + light.id + ": unknown lane " + lid);
      if (!l->centerline.intersect_segment(light.stop_line_a, light.stop_line_b)) {
        throw FormatError("light " + light.id + ": stop line does not cross lane " + lid);
      }
    }
  }
  for (const auto & sign : stop_signs_) {
    const Lane * l = find_lane(sign.lane_id);
    if (!l) throw FormatError("stop_sign " + sign.id + ": unknown lane " + sign.lane_id);
    if (!l->centerline.intersect_segment(sign.stop_line_a, sign.stop_line_b)) {
      throw FormatError("stop_sign " + sign.id + ": stop line does not cross lane " + sign.lane_id);
    }
  }
}

const Lane * LaneMap::find_lane(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &lanes_[it->second];
}

const Lane & LaneMap::lane(std::string_view id) const {
  const Lane * l = find_lane(id);
  if (!l) throw std::out_of_range("unknown lane " + std::string(id));
  return *l;
}

const TrafficLight * LaneMap::find_light(std::string_view id) const {
  for (const auto & l : lights_) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

std::vector<std::string> LaneMap::predecessors(std::string_view lane_id) const {
  std::vector<std::string> out;
  for (const auto & l : lanes_) {
    if (std::find(l.successors.begin(), l.successors.end(), lane_id) != l.successors.end()) out.push_back(l.id);
  }
  return out;
}

namespace {

bool contains(std::span<const std::string> ids, std::string_view id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::string pick_branch(const std::vector<std::string> & options, std::span<const std::string> preferred) {
  for (const auto & o : options) {
    if (contains(preferred, o)) return o;
  }
  return options.front();
}

}  // namespace

std::optional<Localization> LaneMap::localize(const geom::Vec2 & p, double heading,
                                              std::optional<std::string_view> hint,
                                              std::span<const std::string> preferred) const {
  struct Candidate {
    const Lane * lane;
    geom::Projection proj;
    double score;
  };
  std::vector<Candidate> cands;
  for (const auto & lane : lanes_) {
    const auto proj = lane.centerline.project(p);
    if (proj.s < -1e-6 || proj.s > lane.length() + 1e-6) continue;
    if (std::abs(proj.lateral) > lane.width / 2.0 + 1e-9) continue;
    const double dh = std::abs(geom::normalize_angle(lane.centerline.heading_at(proj.s) - heading));
    if (dh > geom::kPi / 2.0) continue;
    cands.push_back({&lane, proj, std::abs(proj.lateral) + dh});
  }
  if (cands.empty()) return std::nullopt;

  auto choose = [&](auto && pred) -> const Candidate * {
    const Candidate * best = nullptr;
    for (const auto & c : cands) {
      if (!pred(c)) continue;
      if (!best || c.score < best->score || (c.score == best->score && c.lane->id < best->lane->id)) best = &c;
    }
    return best;
  };

  const Candidate * pick = nullptr;
  if (hint) {
    pick = choose([&](const Candidate & c) { return c.lane->id == *hint; });
    if (!pick) {
      if (const Lane * h = find_lane(*hint)) {
        pick = choose([&](const Candidate & c) {
          return contains(h->successors, c.lane->id) && contains(preferred, c.lane->id);
        });
        if (!pick) pick = choose([&](const Candidate & c) { return contains(h->successors, c.lane->id); });
        if (!pick) {
          pick = choose([&](const Candidate & c) {
            return c.lane->id == h->left_neighbor || c.lane->id == h->right_neighbor;
          });
        }
      }
    }
  }
  if (!pick && !preferred.empty()) {
    pick = choose([&](const Candidate & c) { return contains(preferred, c.lane->id); });
  }
  if (!pick) pick = choose([](const Candidate &) { return true; });
  return Localization{pick->lane->id, pick->proj};
}

LaneChain LaneMap::chain(std::string_view lane_id, double back, double forward,
                         std::span<const std::string> preferred) const {
  constexpr std::size_t kMaxLanes = 64;
  std::vector<std::string> behind;
  double acc = 0.0;
  std::string cur(lane_id);
  while (acc < back && behind.size() < kMaxLanes) {
    const auto preds = predecessors(cur);
    if (preds.empty()) break;
    cur = pick_branch(preds, preferred);
    behind.push_back(cur);
    acc += lane(cur).length();
  }
  std::vector<std::string> ids(behind.rbegin(), behind.rend());
  ids.emplace_back(lane_id);
  acc = lane(lane_id).length();
  cur = std::string(lane_id);
  while (acc < forward && ids.size() < kMaxLanes) {
    const auto & succ = lane(cur).successors;
    if (succ.empty()) break;
    cur = pick_branch(succ, preferred);
    ids.push_back(cur);
    acc += lane(cur).length();
  }
  return chain_through(ids);
}

LaneChain LaneMap::chain_through(std::span<const std::string> lane_ids) const {
  if (lane_ids.empty()) throw std::invalid_argument("empty lane chain");
  LaneChain out;
  std::vector<geom::Vec2> pts;
  for (std::size_t i = 0; i < lane_ids.size(); ++i) {
    const Lane & l = lane(lane_ids[i]);
    if (i > 0) {
      const Lane & prev = lane(lane_ids[i - 1]);
      if (!contains(prev.successors, l.id)) {
        throw std::invalid_argument("lane " + l.id + " does not succeed " + prev.id);
      }
    }
    const auto & lp = l.centerline.points();
    std::size_t first = 0;
    if (!pts.empty() && geom::distance(pts.back(), lp.front()) < 1e-6) first = 1;
    double start = 0.0;
    if (!pts.empty()) {
      // station of the lane's first point on the chain built so far
      double acc = 0.0;
      for (std::size_t k = 1; k < pts.size(); ++k) acc += geom::distance(pts[k - 1], pts[k]);
      start = acc + (first == 1 ? 0.0 : geom::distance(pts.back(), lp.front()));
    }
    out.lane_start.push_back(start);
    pts.insert(pts.end(), lp.begin() + static_cast<std::ptrdiff_t>(first), lp.end());
    out.lane_ids.push_back(l.id);
  }
  out.line = geom::Polyline(std::move(pts));
  return out;
}

void LaneMap::override_light(std::string_view light_id, std::vector<LightPhase> schedule, double offset) {
  for (auto & l : lights_) {
    if (l.id == light_id) {
      if (schedule.empty()) throw FormatError("light override needs a schedule");
      l.schedule = std::move(schedule);
      l.offset = offset;
      return;
    }
  }
  throw FormatError("light override references unknown light " + std::string(light_id));
}

}  // namespace drivebench::sim
