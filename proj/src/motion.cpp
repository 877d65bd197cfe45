#include "drivebench/motion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace drivebench::motion {

using decision::PathDecision;
using decision::SpeedDecision;

void PlannerConfig::validate() const {
  const std::pair<const char *, double> positive[] = {
      {"cruise_speed", cruise_speed},       {"accel_limit", accel_limit},
      {"decel_limit", decel_limit},         {"lane_change_length", lane_change_length},
      {"lookahead_gain", lookahead_gain},   {"lookahead_min", lookahead_min},
      {"stop_margin", stop_margin},         {"steer_max", steer_max},
      {"wheelbase", wheelbase},             {"speed_gain", speed_gain},
      {"decelerate_fraction", decelerate_fraction}, {"keep_min_speed", keep_min_speed},
      {"path_horizon", path_horizon},       {"sample_spacing", sample_spacing},
      {"borrow_clearance", borrow_clearance}, {"obstacle_standoff", obstacle_standoff},
      {"pedestrian_margin", pedestrian_margin}, {"tracking_limit", tracking_limit},
      {"completion_lateral", completion_lateral}};
  for (const auto & [name, v] : positive) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("planner config: ") + name + " must be > 0");
  }
  if (stop_margin >= lane_change_length) throw std::invalid_argument("planner config: stop_margin must be < lane_change_length");
  if (decelerate_fraction >= 1.0) throw std::invalid_argument("planner config: decelerate_fraction must be < 1");
  if (steer_max >= geom::kPi / 2) throw std::invalid_argument("planner config: steer_max must be < pi/2");
}

PlannerConfig PlannerConfig::from_json(const json & j) {
  constexpr std::string_view ctx = "planner config";
  io::require_known_keys(j,
                         {"cruise_speed", "accel_limit", "decel_limit", "lane_change_length", "lookahead_gain",
                          "lookahead_min", "stop_margin", "steer_max", "wheelbase", "speed_gain",
                          "decelerate_fraction", "keep_min_speed", "path_horizon", "sample_spacing",
                          "borrow_clearance", "obstacle_standoff", "pedestrian_margin", "tracking_limit",
                          "completion_lateral"},
                         ctx);
  PlannerConfig c;
  c.cruise_speed = io::get_or(j, "cruise_speed", c.cruise_speed, ctx);
  c.accel_limit = io::get_or(j, "accel_limit", c.accel_limit, ctx);
  c.decel_limit = io::get_or(j, "decel_limit", c.decel_limit, ctx);
  c.lane_change_length = io::get_or(j, "lane_change_length", c.lane_change_length, ctx);
  c.lookahead_gain = io::get_or(j, "lookahead_gain", c.lookahead_gain, ctx);
  c.lookahead_min = io::get_or(j, "lookahead_min", c.lookahead_min, ctx);
  c.stop_margin = io::get_or(j, "stop_margin", c.stop_margin, ctx);
  c.steer_max = io::get_or(j, "steer_max", c.steer_max, ctx);
  c.wheelbase = io::get_or(j, "wheelbase", c.wheelbase, ctx);
  c.speed_gain = io::get_or(j, "speed_gain", c.speed_gain, ctx);
  c.decelerate_fraction = io::get_or(j, "decelerate_fraction", c.decelerate_fraction, ctx);
  c.keep_min_speed = io::get_or(j, "keep_min_speed", c.keep_min_speed, ctx);
  c.path_horizon = io::get_or(j, "path_horizon", c.path_horizon, ctx);
  c.sample_spacing = io::get_or(j, "sample_spacing", c.sample_spacing, ctx);
  c.borrow_clearance = io::get_or(j, "borrow_clearance", c.borrow_clearance, ctx);
  c.obstacle_standoff = io::get_or(j, "obstacle_standoff", c.obstacle_standoff, ctx);
  c.pedestrian_margin = io::get_or(j, "pedestrian_margin", c.pedestrian_margin, ctx);
  c.tracking_limit = io::get_or(j, "tracking_limit", c.tracking_limit, ctx);
  c.completion_lateral = io::get_or(j, "completion_lateral", c.completion_lateral, ctx);
  try {
    c.validate();
  } catch (const std::invalid_argument & e) {
    throw FormatError(e.what());
  }
  return c;
}

std::string to_string(PathKind k) {
  switch (k) {
    case PathKind::follow: return "follow";
    case PathKind::change: return "change";
    case PathKind::borrow_out: return "borrow_out";
    case PathKind::borrow_return: return "borrow_return";
  }
  return "follow";
}

geom::Polyline PathPlan::line() const {
  std::vector<geom::Vec2> pts;
  pts.reserve(points.size());
  for (const auto & p : points) pts.push_back(p.position);
  return geom::Polyline(std::move(pts));
}

namespace {

std::size_t interval_of(const std::vector<SpeedSample> & xs, double s) {
  auto it = std::upper_bound(xs.begin(), xs.end(), s, [](double v, const SpeedSample & x) { return v < x.s; });
  std::size_t i = static_cast<std::size_t>(it - xs.begin());
  if (i == 0) return 0;
  return std::min(i - 1, xs.size() - 2);
}

}  // namespace

double SpeedProfile::speed_at(double s) const {
  if (samples.empty()) return 0.0;
  if (samples.size() == 1 || s <= samples.front().s) return samples.front().v;
  if (s >= samples.back().s) return samples.back().v;
  const std::size_t i = interval_of(samples, s);
  const auto & a = samples[i];
  const auto & b = samples[i + 1];
  // v^2 is linear in s under constant acceleration
  const double u = (s - a.s) / (b.s - a.s);
  const double v2 = a.v * a.v + u * (b.v * b.v - a.v * a.v);
  return std::sqrt(std::max(0.0, v2));
}

double SpeedProfile::accel_at(double s) const {
  if (samples.size() < 2 || s >= samples.back().s) return 0.0;
  const std::size_t i = interval_of(samples, s);
  const auto & a = samples[i];
  const auto & b = samples[i + 1];
  return (b.v * b.v - a.v * a.v) / (2.0 * (b.s - a.s));
}

double quintic_blend(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

double quintic_blend_slope(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

MotionPlanner::MotionPlanner(const sim::LaneMap & map, PlannerConfig cfg, std::vector<std::string> route)
    : map_(&map), cfg_(cfg), route_(std::move(route)) {
  cfg_.validate();
}

sim::LaneChain MotionPlanner::lane_chain(const std::string & lane, double forward) const {
  return map_->chain(lane, 0.0, forward, route_);
}

geom::Vec2 MotionPlanner::actor_position(const sim::SceneDescription & scene, const sim::ActorObservation & a) const {
  const auto chain = map_->chain(scene.lane.lane_id, 100.0, scene.lane.s + 300.0, route_);
  const double st = chain.station_of(scene.lane.lane_id, scene.lane.s).value_or(0.0) + a.longitudinal;
  return chain.line.point_at(st) + geom::left_normal(chain.line.heading_at(st)) * a.lateral;
}

namespace {

// Stations of a sampled range with the given knots inserted.
std::vector<double> station_grid(double from, double to, double spacing, std::vector<double> knots) {
  std::vector<double> out;
  for (double s = from; s < to; s += spacing) out.push_back(s);
  out.push_back(to);
  for (double k : knots) {
    if (k > from && k < to) out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  std::vector<double> dedup;
  for (double s : out) {
    if (dedup.empty() || s - dedup.back() > 1e-6) dedup.push_back(s);
  }
  return dedup;
}

void assign_stations(PathPlan & plan) {
  double acc = 0.0;
  for (std::size_t i = 0; i < plan.points.size(); ++i) {
    if (i > 0) acc += geom::distance(plan.points[i].position, plan.points[i - 1].position);
    plan.points[i].s = acc;
  }
}

}  // namespace

PathPlan MotionPlanner::plan_path(PathDecision path, const sim::SceneDescription & scene,
                                  const std::optional<ManeuverAnchor> & anchor) const {
  const geom::Vec2 ego{scene.ego.x, scene.ego.y};
  const double horizon = std::max(cfg_.path_horizon, 2.0 * cfg_.sample_spacing);
  PathPlan plan;

  if (path == PathDecision::follow_lane) {
    const auto chain = lane_chain(scene.lane.lane_id, scene.lane.s + horizon + 10.0);
    const double s_e = chain.station_of(scene.lane.lane_id, scene.lane.s).value_or(scene.lane.s);
    for (double s : station_grid(s_e, s_e + horizon, cfg_.sample_spacing, {})) {
      plan.points.push_back({chain.line.point_at(s), chain.line.heading_at(s), 0.0});
    }
    assign_stations(plan);
    plan.source_lane_id = plan.target_lane_id = scene.lane.lane_id;
    plan.kind = PathKind::follow;
    return plan;
  }

  const bool borrow = decision::is_borrow(path);
  const double L = cfg_.lane_change_length;
  ManeuverAnchor a;
  if (anchor && anchor->path == path) {
    a = *anchor;
  } else {
    const auto f = decision::validate_feasibility({path, SpeedDecision::keep}, scene);
    if (!f.feasible) throw InfeasibleDecision(std::string(decision::to_string(path)) + ": " + f.reason);
    a.path = path;
    a.source_lane = scene.lane.lane_id;
    a.target_lane = decision::is_left(path) ? *scene.lane.left_neighbor : *scene.lane.right_neighbor;
    a.start_s = scene.lane.s;
    a.return_s = a.start_s + L;
    if (borrow) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto & o : scene.actors) {
        if (o.relation == sim::Relation::same && o.longitudinal > 0.0 && o.longitudinal < best) {
          best = o.longitudinal;
          a.blocking_actor = o.id;
        }
      }
    }
  }

  double reach = a.start_s + L + horizon + 50.0;
  if (borrow) reach = std::max(reach, a.return_s + 2.0 * L + horizon + 50.0);
  auto src = lane_chain(a.source_lane, reach);
  const double s_e = src.line.project_in_window(ego, a.start_s - 20.0, src.line.length()).s;

  if (borrow && a.blocking_actor) {
    for (const auto & o : scene.actors) {
      if (o.id != *a.blocking_actor) continue;
      const double st = src.line.project_in_window(actor_position(scene, o), s_e - 50.0, src.line.length()).s;
      a.return_s = std::max(a.return_s, st + o.length / 2.0 + scene.ego.length / 2.0 + cfg_.borrow_clearance);
    }
  }
  a.return_s = std::max(a.return_s, a.start_s + L);

  double s_end = s_e + horizon;
  if (borrow) s_end = std::max(s_end, a.return_s + L + 10.0);
  if (s_end + 10.0 > src.line.length()) src = lane_chain(a.source_lane, s_end + 50.0);
  const auto tgt = lane_chain(a.target_lane, s_end + 50.0);

  std::vector<double> knots{a.start_s, a.start_s + L};
  if (borrow) {
    knots.push_back(a.return_s);
    knots.push_back(a.return_s + L);
  }
  const auto weight = [&](double s, double & slope) {
    slope = 0.0;
    if (s <= a.start_s) return 0.0;
    if (s < a.start_s + L) {
      slope = quintic_blend_slope((s - a.start_s) / L) / L;
      return quintic_blend((s - a.start_s) / L);
    }
    if (!borrow || s <= a.return_s) return 1.0;
    if (s < a.return_s + L) {
      slope = -quintic_blend_slope((s - a.return_s) / L) / L;
      return 1.0 - quintic_blend((s - a.return_s) / L);
    }
    return 0.0;
  };

  const auto grid = station_grid(s_e, s_end, cfg_.sample_spacing, knots);
  for (double s : grid) {
    double slope = 0.0;
    const double w = weight(s, slope);
    const geom::Vec2 sp = src.line.point_at(s);
    const double sh = src.line.heading_at(s);
    if (w == 0.0) {
      plan.points.push_back({sp, sh, 0.0});
      continue;
    }
    const double ts = tgt.line.project(sp).s;
    const geom::Vec2 tp = tgt.line.point_at(ts);
    const double th = tgt.line.heading_at(ts);
    if (w == 1.0) {
      plan.points.push_back({tp, th, 0.0});
      continue;
    }
    const geom::Vec2 d = tp - sp;
    const geom::Vec2 dir = geom::heading_vector(sh) * (1.0 - w) + geom::heading_vector(th) * w + d * slope;
    plan.points.push_back({sp + d * w, std::atan2(dir.y, dir.x), 0.0});
  }
  assign_stations(plan);
  for (double k : knots) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(grid[i] - k) < 1e-6) plan.joins.push_back(plan.points[i].s);
    }
  }
  std::sort(plan.joins.begin(), plan.joins.end());

  plan.source_lane_id = a.source_lane;
  plan.target_lane_id = a.target_lane;
  if (!borrow) {
    plan.kind = PathKind::change;
  } else {
    plan.kind = s_e < a.return_s ? PathKind::borrow_out : PathKind::borrow_return;
    if (plan.kind == PathKind::borrow_return) plan.target_lane_id = a.source_lane;
  }
  plan.anchor = a;
  return plan;
}

SpeedProfile MotionPlanner::plan_speed(SpeedDecision speed, const sim::SceneDescription & scene, const PathPlan & path,
                                       std::optional<double> reference_speed) const {
  SpeedProfile prof;
  prof.accel_limit = cfg_.accel_limit;
  prof.decel_limit = cfg_.decel_limit;
  const double v0 = std::max(0.0, scene.ego.speed);
  const double ref = std::max(0.0, reference_speed.value_or(v0));
  const double H = std::max(path.length(), cfg_.sample_spacing);

  // v(s) for a constant acceleration a starting at v0, clamped at `bound`
  std::vector<double> knots;
  std::function<double(double)> v_of;

  switch (speed) {
    case SpeedDecision::keep: {
      const double vk = ref >= cfg_.keep_min_speed ? ref : cfg_.cruise_speed;
      v_of = [vk](double) { return vk; };
      break;
    }
    case SpeedDecision::accelerate: {
      const double vf = std::min(cfg_.cruise_speed, scene.lane.speed_limit);
      if (v0 <= vf) {
        const double a = cfg_.accel_limit;
        knots.push_back((vf * vf - v0 * v0) / (2.0 * a));
        v_of = [=](double s) { return std::min(vf, std::sqrt(v0 * v0 + 2.0 * a * s)); };
      } else {
        const double d = cfg_.decel_limit;
        knots.push_back((v0 * v0 - vf * vf) / (2.0 * d));
        v_of = [=](double s) { return std::max(vf, std::sqrt(std::max(0.0, v0 * v0 - 2.0 * d * s))); };
      }
      break;
    }
    case SpeedDecision::decelerate: {
      const double vt = cfg_.decelerate_fraction * ref;
      if (v0 <= vt) {
        v_of = [v0](double) { return v0; };
      } else {
        const double d = cfg_.decel_limit;
        knots.push_back((v0 * v0 - vt * vt) / (2.0 * d));
        v_of = [=](double s) { return std::max(vt, std::sqrt(std::max(0.0, v0 * v0 - 2.0 * d * s))); };
      }
      break;
    }
    case SpeedDecision::stop: {
      double stop_point = std::numeric_limits<double>::infinity();
      if (scene.light && scene.light->state != sim::LightState::green && scene.light->stop_line_distance > 0.0) {
        stop_point = std::min(stop_point, scene.light->stop_line_distance);
      }
      if (scene.stop_sign && scene.stop_sign->stop_line_distance > 0.0) {
        stop_point = std::min(stop_point, scene.stop_sign->stop_line_distance);
      }
      const auto line = path.line();
      for (const auto & o : scene.actors) {
        const auto pr = line.project(actor_position(scene, o));
        double corridor = (scene.ego.width + o.width) / 2.0 + 0.3;
        if (o.kind == sim::ActorKind::pedestrian) corridor += cfg_.pedestrian_margin;
        if (pr.s <= 0.0 || pr.s > H || std::abs(pr.lateral) >= corridor) continue;
        stop_point = std::min(stop_point, pr.s - o.length / 2.0 - scene.ego.length / 2.0 - cfg_.obstacle_standoff);
      }
      double target = 0.0;
      if (std::isfinite(stop_point)) {
        target = std::min(stop_point, H) - cfg_.stop_margin;
      } else {
        target = std::min(v0 * v0 / cfg_.decel_limit, H - cfg_.stop_margin);
      }
      if (v0 < cfg_.keep_min_speed) {
        // already crawling: halt in place
        prof.stop_s = 0.0;
        v_of = [](double) { return 0.0; };
        break;
      }
      const double comfort = 0.5 * cfg_.decel_limit;
      if (target <= 0.0 || v0 * v0 / (2.0 * target) > cfg_.decel_limit) {
        prof.infeasible_stop = true;
        const double a = cfg_.decel_limit;
        const double zero_at = v0 * v0 / (2.0 * a);
        prof.stop_s = zero_at;
        knots.push_back(zero_at);
        v_of = [=](double s) { return s >= zero_at ? 0.0 : std::sqrt(std::max(0.0, v0 * v0 - 2.0 * a * s)); };
      } else if (v0 * v0 / (2.0 * target) > comfort) {
        // constant deceleration landing exactly on the target
        const double a = v0 * v0 / (2.0 * target);
        prof.stop_s = target;
        knots.push_back(target);
        v_of = [=](double s) { return s >= target ? 0.0 : std::sqrt(std::max(0.0, v0 * v0 - 2.0 * a * s)); };
      } else {
        // hold speed, then brake comfortably into the target
        prof.stop_s = target;
        knots.push_back(target - v0 * v0 / (2.0 * comfort));
        knots.push_back(target);
        v_of = [=](double s) { return s >= target ? 0.0 : std::min(v0, std::sqrt(2.0 * comfort * (target - s))); };
      }
      break;
    }
  }

  double end = H;
  if (prof.stop_s) end = std::max(end, *prof.stop_s + cfg_.sample_spacing);
  for (double s : station_grid(0.0, end, cfg_.sample_spacing, knots)) prof.samples.push_back({s, v_of(s)});
  return prof;
}

sim::ControlSignal track(const PathPlan & path, const SpeedProfile & profile, const sim::ActorState & ego,
                         const PlannerConfig & cfg) {
  if (path.points.size() < 2) throw std::invalid_argument("path needs at least two points");
  const auto line = path.line();
  const geom::Vec2 p = ego.pose.position();
  const auto pr = line.project(p);
  if (pr.distance > cfg.tracking_limit) throw TrackingLost("ego is " + std::to_string(pr.distance) + " m from the path");

  const double v = std::max(0.0, ego.speed);
  const double ld = std::max(cfg.lookahead_min, cfg.lookahead_gain * v);
  const geom::Vec2 target = line.point_at(pr.s + ld);
  const geom::Vec2 to = target - p;
  const double chord = to.norm();
  double steer = 0.0;
  if (chord > 1e-9) {
    const double alpha = geom::normalize_angle(std::atan2(to.y, to.x) - ego.pose.heading);
    steer = std::atan(2.0 * cfg.wheelbase * std::sin(alpha) / chord);
  }
  steer = std::clamp(steer, -cfg.steer_max, cfg.steer_max);

  const double v_target = profile.speed_at(pr.s);
  // hold the brake once the profile has come to rest; a profile starting
  // from rest (accelerate at v = 0) still pulls away
  if (v_target <= 0.0 && profile.accel_at(pr.s) <= 0.0) return {steer, -cfg.decel_limit};
  const double accel = profile.accel_at(pr.s) + cfg.speed_gain * (v_target - v);
  return {steer, std::clamp(accel, -cfg.decel_limit, cfg.accel_limit)};
}

MotionSession::MotionSession(const sim::LaneMap & map, PlannerConfig cfg, std::vector<std::string> route)
    : planner_(map, cfg, std::move(route)) {}

bool MotionSession::is_continuation(const decision::DecisionPair & d) const {
  return anchor_ && !completed_ && anchor_->path == d.path;
}

void MotionSession::set_decision(const decision::DecisionPair & d, const sim::SceneDescription & scene) {
  if (!is_continuation(d)) anchor_.reset();
  completed_ = false;
  counted_stop_ = false;
  decision_ = d;
  reference_speed_ = scene.ego.speed;
}

void MotionSession::reset() {
  anchor_.reset();
  completed_ = false;
  decision_ = {};
}

namespace {

bool lane_on_chain(const sim::LaneMap & map, const std::string & start, const std::string & lane) {
  if (start == lane) return true;
  const auto chain = map.chain(start, 0.0, 2000.0);
  return std::find(chain.lane_ids.begin(), chain.lane_ids.end(), lane) != chain.lane_ids.end();
}

}  // namespace

bool MotionSession::maneuver_done(const sim::SceneDescription & scene) const {
  const auto & a = *anchor_;
  if (std::abs(scene.lane.lateral) >= planner_.config().completion_lateral) return false;
  const auto & map = planner_.map();
  if (decision::is_change(a.path)) return lane_on_chain(map, a.target_lane, scene.lane.lane_id);
  return path_.kind == PathKind::borrow_return && lane_on_chain(map, a.source_lane, scene.lane.lane_id) &&
         !lane_on_chain(map, a.target_lane, scene.lane.lane_id);
}

sim::ControlSignal MotionSession::control(const sim::SceneDescription & scene, const sim::ActorState & ego) {
  if (anchor_ && !completed_ && maneuver_done(scene)) {
    completed_ = true;
    anchor_.reset();
  }
  const PathDecision p = completed_ ? PathDecision::follow_lane : decision_.path;
  path_ = planner_.plan_path(p, scene, anchor_);
  if (p != PathDecision::follow_lane) anchor_ = path_.anchor;
  profile_ = planner_.plan_speed(decision_.speed, scene, path_, reference_speed_);
  if (profile_.infeasible_stop && !counted_stop_) {
    ++infeasible_stops_;
    counted_stop_ = true;
  }
  return track(path_, profile_, ego, planner_.config());
}

}  // namespace drivebench::motion
