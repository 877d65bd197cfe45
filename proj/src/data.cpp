#include "drivebench/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "drivebench/navigation.hpp"

namespace drivebench::data {

using decision::DecisionPair;
using decision::NavigationCommand;
using decision::PathDecision;
using decision::SpeedDecision;
using explain::Cause;

// ---- logs ----

namespace {

ordered_json actor_json(const sim::ActorState & a) {
  ordered_json j;
  j["id"] = a.id;
  j["kind"] = sim::to_string(a.kind);
  j["x"] = a.pose.x;
  j["y"] = a.pose.y;
  j["heading"] = a.pose.heading;
  j["speed"] = a.speed;
  j["length"] = a.length;
  j["width"] = a.width;
  if (a.lane_id) j["lane"] = *a.lane_id;
  return j;
}

sim::ActorState actor_from_json(const json & j) {
  constexpr std::string_view ctx = "log actor";
  io::require_known_keys(j, {"id", "kind", "x", "y", "heading", "speed", "length", "width", "lane"}, ctx);
  sim::ActorState a;
  a.id = io::get_required<std::string>(j, "id", ctx);
  try {
    a.kind = sim::actor_kind_from_string(io::get_required<std::string>(j, "kind", ctx));
  } catch (const std::invalid_argument & e) {
    throw FormatError(std::string(ctx) + ": " + e.what());
  }
  a.pose = {io::get_required<double>(j, "x", ctx), io::get_required<double>(j, "y", ctx),
            io::get_required<double>(j, "heading", ctx)};
  a.speed = io::get_required<double>(j, "speed", ctx);
  a.length = io::get_required<double>(j, "length", ctx);
  a.width = io::get_required<double>(j, "width", ctx);
  if (j.contains("lane")) a.lane_id = io::get_required<std::string>(j, "lane", ctx);
  return a;
}

}  // namespace

void DrivingLog::validate() const {
  if (frames.size() < 2) throw FormatError("driving log '" + episode_id + "': needs at least 2 frames");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].time > frames[i - 1].time)) {
      throw FormatError("driving log '" + episode_id + "': frame times must strictly increase");
    }
  }
}

std::string DrivingLog::to_jsonl() const {
  std::string out;
  ordered_json h;
  h["format_version"] = kFormatVersion;
  h["type"] = "log";
  h["scenario_id"] = scenario_id;
  h["episode_id"] = episode_id;
  h["map"] = map_id;
  h["route"] = route;
  out += h.dump() + "\n";
  for (const auto & f : frames) {
    ordered_json j;
    j["t"] = f.time;
    j["ego"] = actor_json(f.ego);
    ordered_json actors = ordered_json::array();
    for (const auto & a : f.actors) actors.push_back(actor_json(a));
    j["actors"] = std::move(actors);
    ordered_json lights = ordered_json::object();
    for (const auto & [id, st] : f.lights) lights[id] = sim::to_string(st);
    j["lights"] = std::move(lights);
    if (f.instruction) j["instruction"] = *f.instruction;
    out += j.dump() + "\n";
  }
  return out;
}

DrivingLog DrivingLog::from_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  DrivingLog log;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception & e) {
      throw FormatError("driving log line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!header) {
      constexpr std::string_view ctx = "driving log header";
      io::require_known_keys(j, {"format_version", "type", "scenario_id", "episode_id", "map", "route"}, ctx);
      io::require_format_version(j, kFormatVersion, ctx);
      if (io::get_required<std::string>(j, "type", ctx) != "log") throw FormatError("driving log: bad header type");
      log.scenario_id = io::get_required<std::string>(j, "scenario_id", ctx);
      log.episode_id = io::get_required<std::string>(j, "episode_id", ctx);
      log.map_id = io::get_required<std::string>(j, "map", ctx);
      log.route = io::get_required<std::vector<std::string>>(j, "route", ctx);
      header = true;
      continue;
    }
    constexpr std::string_view ctx = "driving log frame";
    io::require_known_keys(j, {"t", "ego", "actors", "lights", "instruction"}, ctx);
    LogFrame f;
    f.time = io::get_required<double>(j, "t", ctx);
    f.ego = actor_from_json(io::get_required<json>(j, "ego", ctx));
    for (const auto & a : io::get_required<json>(j, "actors", ctx)) f.actors.push_back(actor_from_json(a));
    for (const auto & [id, st] : io::get_required<json>(j, "lights", ctx).items()) {
      try {
        f.lights[id] = sim::light_state_from_string(st.get<std::string>());
      } catch (const std::exception & e) {
        throw FormatError(std::string(ctx) + ": bad light state: " + e.what());
      }
    }
    if (j.contains("instruction")) f.instruction = io::get_required<std::string>(j, "instruction", ctx);
    log.frames.push_back(std::move(f));
  }
  if (!header) throw FormatError("driving log: missing header");
  log.validate();
  return log;
}

void DrivingLog::save(const std::filesystem::path & path) const { io::write_text_file(path, to_jsonl()); }

DrivingLog DrivingLog::load(const std::filesystem::path & path) { return from_jsonl(io::read_text_file(path)); }

LogFrame frame_of(const sim::WorldState & world) {
  LogFrame f;
  f.time = world.time;
  f.ego = world.ego;
  f.actors = world.actors;
  f.lights = world.light_states;
  f.instruction = world.pending_instruction;
  return f;
}

sim::WorldState world_of(const LogFrame & frame) {
  sim::WorldState w;
  w.time = frame.time;
  w.ego = frame.ego;
  w.actors = frame.actors;
  std::sort(w.actors.begin(), w.actors.end(), [](const auto & a, const auto & b) { return a.id < b.id; });
  w.light_states = frame.lights;
  w.pending_instruction = frame.instruction;
  return w;
}

// ---- annotation ----

void AnnotationConfig::validate() const {
  if (!(accel_threshold > 0.0) || !(stop_speed > 0.0) || !(lateral_threshold > 0.0) ||
      !(lateral_speed_threshold > 0.0) || smoothing_window <= 0 || !(perception_range > 0.0)) {
    throw std::invalid_argument("annotation config: all thresholds must be positive");
  }
}

AnnotationConfig AnnotationConfig::from_json(const json & j) {
  constexpr std::string_view ctx = "annotation config";
  io::require_known_keys(j,
                         {"accel_threshold", "stop_speed", "lateral_threshold", "lateral_speed_threshold",
                          "smoothing_window", "perception_range"},
                         ctx);
  AnnotationConfig c;
  c.accel_threshold = io::get_or(j, "accel_threshold", c.accel_threshold, ctx);
  c.stop_speed = io::get_or(j, "stop_speed", c.stop_speed, ctx);
  c.lateral_threshold = io::get_or(j, "lateral_threshold", c.lateral_threshold, ctx);
  c.lateral_speed_threshold = io::get_or(j, "lateral_speed_threshold", c.lateral_speed_threshold, ctx);
  c.smoothing_window = io::get_or(j, "smoothing_window", c.smoothing_window, ctx);
  c.perception_range = io::get_or(j, "perception_range", c.perception_range, ctx);
  try {
    c.validate();
  } catch (const std::invalid_argument & e) {
    throw FormatError(e.what());
  }
  return c;
}

std::vector<SpeedDecision> label_speeds(std::span<const double> times, std::span<const double> speeds,
                                        const AnnotationConfig & cfg) {
  const std::size_t n = speeds.size();
  std::vector<double> raw(n, 0.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == n ? n - 1 : i + 1;
    raw[i] = (speeds[b] - speeds[a]) / (times[b] - times[a]);
  }
  const int h = cfg.smoothing_window / 2;
  std::vector<SpeedDecision> out(n, SpeedDecision::keep);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= static_cast<std::size_t>(h) ? i - h : 0;
    const std::size_t hi = std::min(n - 1, i + h);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += raw[k];
    const double a = sum / static_cast<double>(hi - lo + 1);
    if (speeds[i] < cfg.stop_speed) {
      out[i] = SpeedDecision::stop;
    } else if (a > cfg.accel_threshold) {
      out[i] = SpeedDecision::accelerate;
    } else if (a < -cfg.accel_threshold) {
      out[i] = SpeedDecision::decelerate;
    }
  }
  // braking that ends at a standstill is the stop itself
  for (std::size_t i = 0; i < n;) {
    if (out[i] != SpeedDecision::decelerate) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && out[j] == SpeedDecision::decelerate) ++j;
    if (j < n && out[j] == SpeedDecision::stop) std::fill(out.begin() + i, out.begin() + j, SpeedDecision::stop);
    i = j;
  }
  return out;
}

namespace {

PathDecision change_of(int side) { return side > 0 ? PathDecision::left_lane_change : PathDecision::right_lane_change; }
PathDecision borrow_of(int side) { return side > 0 ? PathDecision::left_lane_borrow : PathDecision::right_lane_borrow; }

struct Transition {
  std::size_t frame;  // first frame in the new lane
  int side;           // +1 left, -1 right
  std::size_t start = 0;
  std::size_t end = 0;
};

}  // namespace

AnnotationResult annotate_decisions(const DrivingLog & log, const sim::LaneMap & map, const AnnotationConfig & cfg) {
  log.validate();
  cfg.validate();
  const std::size_t n = log.frames.size();
  std::vector<std::optional<sim::SceneDescription>> scenes(n);
  std::vector<double> lat(n, 0.0), latv(n, 0.0), times(n), speeds(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto & f = log.frames[i];
    times[i] = f.time;
    speeds[i] = f.ego.speed;
    if (!f.ego.lane_id || !map.find_lane(*f.ego.lane_id)) continue;
    try {
      scenes[i] = sim::perceive(world_of(f), map, cfg.perception_range, log.route);
    } catch (const sim::OffMapError &) {
      continue;
    }
    const auto & lane = map.lane(*f.ego.lane_id);
    const auto p = lane.centerline.project(f.ego.pose.position());
    lat[i] = p.lateral;
    latv[i] = f.ego.speed * std::sin(f.ego.pose.heading - lane.centerline.heading_at(p.s));
  }

  const auto speed_labels = label_speeds(times, speeds, cfg);
  std::vector<PathDecision> path(n, PathDecision::follow_lane);

  std::vector<Transition> moves;
  for (std::size_t i = 1; i < n; ++i) {
    if (!scenes[i] || !scenes[i - 1]) continue;
    const auto & prev = map.lane(scenes[i - 1]->lane.lane_id);
    const auto & cur = scenes[i]->lane.lane_id;
    if (cur == prev.id) continue;
    int side = 0;
    if (prev.left_neighbor && *prev.left_neighbor == cur) side = 1;
    if (prev.right_neighbor && *prev.right_neighbor == cur) side = -1;
    if (side == 0) continue;  // longitudinal successor
    Transition t{i, side};
    std::size_t j = i;
    while (j > 0 && scenes[j - 1] &&
           (lat[j - 1] * side > cfg.lateral_threshold || latv[j - 1] * side > cfg.lateral_speed_threshold)) {
      --j;
    }
    t.start = j;
    j = i;
    while (j + 1 < n && scenes[j + 1] && lat[j + 1] * side < -cfg.lateral_threshold) ++j;
    t.end = j;
    moves.push_back(t);
  }
  for (std::size_t k = 0; k < moves.size();) {
    const auto & m = moves[k];
    if (k + 1 < moves.size() && moves[k + 1].side == -m.side) {
      // out and back again: a borrow over the whole excursion
      for (std::size_t i = m.start; i <= moves[k + 1].end; ++i) path[i] = borrow_of(m.side);
      k += 2;
    } else {
      for (std::size_t i = m.start; i <= m.end; ++i) path[i] = change_of(m.side);
      k += 1;
    }
  }

  AnnotationResult res;
  for (std::size_t i = 0; i < n; ++i) {
    if (!scenes[i]) {
      ++res.unlabelable;
      continue;
    }
    AnnotatedFrame f;
    f.scenario_id = log.scenario_id;
    f.episode_id = log.episode_id;
    f.time = log.frames[i].time;
    f.decision = {path[i], speed_labels[i]};
    f.scene = *scenes[i];
    f.navigation = decision::navigation_command(map, log.route, f.scene);
    f.instruction = log.frames[i].instruction;
    const auto e = generate_explanation(f, {log.scenario_id, f.navigation, f.instruction});
    f.cause = infer_cause(f.scene, f.decision, f.navigation);
    f.explanation = e.text;
    f.explanation_fallback = e.fallback;
    if (e.fallback) ++res.explanation_fallbacks;
    res.frames.push_back(std::move(f));
  }
  return res;
}

// ---- explanations ----

namespace {

struct SceneFacts {
  const sim::ActorObservation * lead = nullptr;        // nearest non-pedestrian ahead in the ego lane
  const sim::ActorObservation * pedestrian = nullptr;  // nearest pedestrian near the ego path
  const sim::ActorObservation * emergency = nullptr;   // emergency vehicle behind, any nearby lane
  const sim::ActorObservation * obstacle = nullptr;    // static obstacle around the ego
};

SceneFacts facts_of(const sim::SceneDescription & s) {
  SceneFacts f;
  const double reach = s.lane.width / 2.0 + 2.5;
  for (const auto & a : s.actors) {
    if (a.kind == sim::ActorKind::pedestrian) {
      if (a.longitudinal > 0.0 && a.longitudinal <= 40.0 && std::abs(a.lateral) < reach &&
          (!f.pedestrian || a.longitudinal < f.pedestrian->longitudinal)) {
        f.pedestrian = &a;
      }
      continue;
    }
    if (a.relation == sim::Relation::same && a.longitudinal > 0.0 &&
        (!f.lead || a.longitudinal < f.lead->longitudinal)) {
      f.lead = &a;
    }
    if (a.kind == sim::ActorKind::emergency_vehicle && a.relation != sim::Relation::other && a.longitudinal < 0.0 &&
        a.longitudinal >= -40.0) {
      f.emergency = &a;
    }
    if (a.kind == sim::ActorKind::static_obstacle && a.relation != sim::Relation::other && a.longitudinal > -30.0 &&
        a.longitudinal <= 60.0 && (!f.obstacle || std::abs(a.longitudinal) < std::abs(f.obstacle->longitudinal))) {
      f.obstacle = &a;
    }
  }
  return f;
}

double gap_to(const sim::SceneDescription & s, const sim::ActorObservation & a) {
  return std::max(0.0, a.longitudinal - (a.length + s.ego.length) / 2.0);
}

}  // namespace

Cause infer_cause(const sim::SceneDescription & s, const DecisionPair & d, NavigationCommand nav) {
  const auto f = facts_of(s);
  const bool lead_near = f.lead && f.lead->longitudinal <= 40.0;
  if (d.speed == SpeedDecision::stop && d.path == PathDecision::follow_lane) {
    if (s.light && s.light->state != sim::LightState::green && s.light->stop_line_distance <= 40.0) {
      return Cause::red_light;
    }
    if (s.stop_sign && s.stop_sign->stop_line_distance <= 30.0) return Cause::stop_sign;
    if (f.pedestrian) return Cause::pedestrian;
    if (lead_near) return f.lead->kind == sim::ActorKind::static_obstacle ? Cause::blocked_lane : Cause::following;
    return Cause::clear_road;
  }
  if (decision::is_change(d.path)) {
    if (f.emergency) return Cause::emergency_vehicle;
    if (nav == NavigationCommand::turn_left && decision::is_left(d.path)) return Cause::turn_left_prep;
    if (nav == NavigationCommand::turn_right && decision::is_right(d.path)) return Cause::turn_right_prep;
    if (f.lead && f.lead->longitudinal <= 60.0) return Cause::slow_lead;
    return Cause::clear_road;
  }
  if (decision::is_borrow(d.path)) {
    if (f.obstacle || (f.lead && f.lead->speed < 0.3 && f.lead->longitudinal <= 60.0)) return Cause::blocked_lane;
    if (f.lead && f.lead->longitudinal <= 60.0) return Cause::slow_lead;
    return Cause::clear_road;
  }
  if (f.emergency && d.speed == SpeedDecision::keep) return Cause::emergency_vehicle;
  if (f.pedestrian && d.speed == SpeedDecision::decelerate) return Cause::pedestrian;
  if (lead_near) return Cause::following;
  return Cause::clear_road;
}

explain::Explanation generate_explanation(const AnnotatedFrame & frame, const ExplanationContext & ctx) {
  const auto & s = frame.scene;
  const auto & d = frame.decision;
  const Cause cause = infer_cause(s, d, ctx.navigation);
  const auto f = facts_of(s);
  explain::Slots slots;
  if (d.path != PathDecision::follow_lane) slots.side = decision::is_left(d.path) ? "left" : "right";
  switch (cause) {
    case Cause::red_light:
      slots.distance = s.light->stop_line_distance;
      slots.light = sim::to_string(s.light->state);
      break;
    case Cause::stop_sign: slots.distance = s.stop_sign->stop_line_distance; break;
    case Cause::pedestrian:
      slots.actor = "pedestrian";
      slots.distance = f.pedestrian->longitudinal;
      break;
    case Cause::emergency_vehicle:
      slots.actor = explain::actor_noun(f.emergency->kind);
      slots.distance = -f.emergency->longitudinal;
      break;
    case Cause::blocked_lane: {
      const auto * a = f.obstacle ? f.obstacle : f.lead;
      slots.actor = explain::actor_noun(a->kind);
      slots.distance = gap_to(s, *a);
      break;
    }
    case Cause::slow_lead:
    case Cause::following:
      slots.actor = explain::actor_noun(f.lead->kind);
      slots.distance = gap_to(s, *f.lead);
      break;
    case Cause::turn_left_prep:
    case Cause::turn_right_prep:
    case Cause::clear_road: break;
  }
  return explain::render_explanation(cause, d, slots);
}

// ---- export ----

void SplitConfig::validate() const {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw std::invalid_argument("split: train_fraction must be in [0, 1]");
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ordered_json record_json(const AnnotatedFrame & f) {
  ordered_json j;
  j["scenario_id"] = f.scenario_id;
  j["episode_id"] = f.episode_id;
  j["time"] = io::quantize(f.time, 3);
  j["scene"] = f.scene.to_json();
  j["navigation_command"] = std::string(decision::to_string(f.navigation));
  if (f.instruction) j["instruction"] = *f.instruction;
  j["decision"] = decision::render_decision(f.decision);
  j["explanation"] = f.explanation;
  return j;
}

ExportSummary export_dataset(std::span<const AnnotatedFrame> frames, const SplitConfig & split,
                             const std::filesystem::path & dir) {
  split.validate();
  if (frames.empty()) throw std::invalid_argument("export: no frames");
  std::map<std::string, std::size_t> per_scenario;
  for (const auto & f : frames) ++per_scenario[f.scenario_id];
  std::vector<std::string> order;
  for (const auto & [id, count] : per_scenario) order.push_back(id);
  std::sort(order.begin(), order.end(), [](const std::string & a, const std::string & b) {
    const auto ha = fnv1a(a), hb = fnv1a(b);
    return ha != hb ? ha < hb : a < b;
  });
  const double target = split.train_fraction * static_cast<double>(frames.size());
  std::set<std::string> train;
  double taken = 0.0;
  for (const auto & id : order) {
    const double with = taken + static_cast<double>(per_scenario[id]);
    if (std::abs(with - target) < std::abs(taken - target)) {
      train.insert(id);
      taken = with;
    } else {
      break;
    }
  }

  std::vector<const AnnotatedFrame *> sorted;
  for (const auto & f : frames) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(), [](const AnnotatedFrame * a, const AnnotatedFrame * b) {
    return std::tie(a->scenario_id, a->episode_id, a->time) < std::tie(b->scenario_id, b->episode_id, b->time);
  });
  std::string train_text, val_text;
  ExportSummary sum;
  for (const auto * f : sorted) {
    const std::string line = record_json(*f).dump() + "\n";
    if (train.count(f->scenario_id)) {
      train_text += line;
      ++sum.train_records;
    } else {
      val_text += line;
      ++sum.val_records;
    }
  }
  for (const auto & [id, count] : per_scenario) (train.count(id) ? sum.train_scenarios : sum.val_scenarios).push_back(id);

  ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["train_fraction"] = split.train_fraction;
  manifest["train"] = {{"records", sum.train_records}, {"scenarios", sum.train_scenarios}};
  manifest["val"] = {{"records", sum.val_records}, {"scenarios", sum.val_scenarios}};
  try {
    std::filesystem::create_directories(dir);
    io::write_text_file(dir / "train.jsonl", train_text);
    io::write_text_file(dir / "val.jsonl", val_text);
    io::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception & e) {
    throw std::runtime_error("export: cannot write dataset to " + dir.string() + ": " + e.what());
  }
  return sum;
}

}  // namespace drivebench::data
