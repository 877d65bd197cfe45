#pragma once

// Driving logs synthesized by executing known decisions through motion
// control. The commanded decision at every log frame is the oracle for the
// annotator.

#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "drivebench/data.hpp"
#include "drivebench/motion.hpp"
#include "drivebench/simulator.hpp"

namespace fixtures {

using namespace drivebench;

inline json highway_doc(double ego_s, double speed, json actors = json::array()) {
  return {{"format_version", 1},
          {"id", "hw"},
          {"map", "highway_3lane"},
          {"ego", {{"lane", "M"}, {"s", ego_s}, {"speed", speed}}},
          {"route", json::array({"M"})},
          {"trigger", {{"point", json::array({ego_s + 50.0, 3.5})}, {"radius", 10.0}}},
          {"actors", actors}};
}

struct Segment {
  decision::DecisionPair decision;
  // segment ends once this holds; `elapsed` is time in the segment
  std::function<bool(const sim::SceneDescription &, const motion::MotionSession &, double elapsed)> done;
};

struct Synth {
  data::DrivingLog log;
  std::vector<decision::DecisionPair> commanded;  // per log frame
};

// Drives the segments closed loop and records a 10 Hz log together with the
// decision in force at each frame.
inline Synth synthesize(const sim::Simulator & sim, const std::vector<Segment> & segments,
                        motion::PlannerConfig pc = {}, double dt = 0.05) {
  Synth out;
  out.log.scenario_id = sim.scenario().id;
  out.log.episode_id = sim.scenario().id + "/seed1";
  out.log.map_id = sim.scenario().map;
  out.log.route = sim.scenario().route;
  motion::MotionSession session(sim.map(), pc, sim.scenario().route);
  auto w = sim.spawn(1);
  std::size_t seg = 0;
  double seg_start = 0.0;
  bool fresh = true;
  for (int step = 0; seg < segments.size() && step < 20000; ++step) {
    const auto scene = sim::perceive(w, sim.map(), 150.0, sim.scenario().route);
    if (!fresh && segments[seg].done(scene, session, w.time - seg_start)) {
      ++seg;
      seg_start = w.time;
      fresh = true;
      if (seg == segments.size()) break;
    }
    if (fresh || step % 10 == 0) session.set_decision(segments[seg].decision, scene);
    fresh = false;
    if (step % 2 == 0) {
      out.log.frames.push_back(data::frame_of(w));
      out.commanded.push_back(segments[seg].decision);
    }
    w = sim.step(w, session.control(scene, w.ego), dt);
  }
  return out;
}

inline auto after(double seconds) {
  return [seconds](const sim::SceneDescription &, const motion::MotionSession &, double t) { return t >= seconds; };
}
inline auto speed_at_least(double v) {
  return [v](const sim::SceneDescription & s, const motion::MotionSession &, double) { return s.ego.speed >= v; };
}
inline auto speed_at_most(double v) {
  return [v](const sim::SceneDescription & s, const motion::MotionSession &, double) { return s.ego.speed <= v; };
}
inline auto maneuver_done() {
  return [](const sim::SceneDescription &, const motion::MotionSession & m, double) { return m.maneuver_completed(); };
}
inline auto station_at_least(double s) {
  return [s](const sim::SceneDescription & sc, const motion::MotionSession &, double) { return sc.lane.s >= s; };
}

struct Agreement {
  std::size_t total = 0;
  std::size_t same = 0;
  double share() const { return total ? static_cast<double>(same) / static_cast<double>(total) : 0.0; }
};

// Frames whose label equals the command, skipping frames within `margin` of a
// commanded switch.
inline Agreement agreement(const Synth & s, const data::AnnotationResult & r, int margin = 2) {
  const auto & c = s.commanded;
  if (r.frames.size() != c.size()) throw std::logic_error("annotation and command lengths differ");
  Agreement a;
  for (std::size_t i = 0; i < c.size(); ++i) {
    bool near = false;
    for (int k = -margin; k <= margin; ++k) {
      const auto j = static_cast<long>(i) + k;
      if (j > 0 && j < static_cast<long>(c.size()) && !(c[j] == c[j - 1])) near = true;
    }
    if (near) continue;
    ++a.total;
    if (r.frames[i].decision == c[i]) ++a.same;
  }
  return a;
}

// Random segment plan on the three-lane highway, starting in lane
// `start_lane` (-1 right, 0 middle, 1 left) at `v0`. Lane changes all go one
// way: out and back again is a borrow by definition, not two changes.
inline std::vector<Segment> random_highway_plan(std::mt19937_64 & rng, int start_lane, double v0, double cruise) {
  using decision::PathDecision;
  using decision::SpeedDecision;
  std::uniform_real_distribution<double> hold(2.5, 4.5);
  std::uniform_int_distribution<int> pick(0, 3);
  const int dir = start_lane != 0 ? -start_lane : (std::bernoulli_distribution(0.5)(rng) ? 1 : -1);
  std::vector<Segment> plan;
  int lane = start_lane;
  double v = v0;
  auto speed_change = [&] {
    if (v < cruise - 1.5 && (v <= 5.0 || std::bernoulli_distribution(0.5)(rng))) {
      plan.push_back({{PathDecision::follow_lane, SpeedDecision::accelerate}, speed_at_least(cruise - 0.05)});
      v = cruise;
    } else {
      plan.push_back({{PathDecision::follow_lane, SpeedDecision::decelerate}, speed_at_most(0.6 * v + 0.05)});
      v = 0.6 * v;
    }
  };
  plan.push_back({{PathDecision::follow_lane, SpeedDecision::keep}, after(hold(rng))});
  const int n = std::uniform_int_distribution<int>(3, 5)(rng);
  for (int i = 0; i < n; ++i) {
    if (pick(rng) >= 2 && std::abs(lane + dir) <= 1) {
      plan.push_back({{dir > 0 ? PathDecision::left_lane_change : PathDecision::right_lane_change, SpeedDecision::keep},
                      maneuver_done()});
      lane += dir;
    } else {
      speed_change();
    }
    plan.push_back({{PathDecision::follow_lane, SpeedDecision::keep}, after(hold(rng))});
  }
  if (std::bernoulli_distribution(0.4)(rng)) {
    plan.push_back({{PathDecision::follow_lane, SpeedDecision::stop}, after(8.0)});
  }
  return plan;
}

}  // namespace fixtures
