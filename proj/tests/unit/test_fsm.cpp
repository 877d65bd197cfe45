#include <gtest/gtest.h>

#include <random>

#include "drivebench/fsm.hpp"
#include "drivebench/motion.hpp"
#include "drivebench/simulator.hpp"
#include "fixtures.hpp"

using namespace drivebench;
using namespace drivebench::fsm;
using decision::DecisionPair;
using decision::NavigationCommand;
using decision::PathDecision;
using decision::SpeedDecision;
using explain::Cause;
using sim::BoundaryKind;

namespace {

// Ego in the middle of three dashed lanes at 8 m/s, nothing around.
sim::SceneDescription open_road() {
  sim::SceneDescription s;
  s.time = 10.0;
  s.ego.speed = 8.0;
  s.lane.lane_id = "M";
  s.lane.s = 100.0;
  s.lane.left_neighbor = "L";
  s.lane.right_neighbor = "R";
  s.lane.left_boundary = BoundaryKind::dashed;
  s.lane.right_boundary = BoundaryKind::dashed;
  return s;
}

sim::ActorObservation actor(const std::string & id, sim::ActorKind kind, sim::Relation rel, double lon, double speed) {
  sim::ActorObservation a;
  a.id = id;
  a.kind = kind;
  a.relation = rel;
  a.longitudinal = lon;
  a.lateral = rel == sim::Relation::left ? 3.5 : rel == sim::Relation::right ? -3.5 : 0.0;
  a.speed = speed;
  return a;
}

FsmOutput decide(const sim::SceneDescription & s, NavigationCommand nav = NavigationCommand::follow_lane,
                 const FsmConfig & cfg = {}) {
  return fsm_decide(FsmState{}, s, nav, cfg).second;
}

sim::SceneDescription random_scene(std::mt19937_64 & rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto pick = [&](int n) { return static_cast<int>(u(rng) * n) % n; };
  sim::SceneDescription s;
  s.time = 50.0 * u(rng);
  s.ego.speed = 15.0 * u(rng);
  s.lane.lane_id = "c";
  s.lane.lateral = u(rng) - 0.5;
  s.lane.speed_limit = 5.0 + 10.0 * u(rng);
  s.lane.in_junction = u(rng) < 0.1;
  const BoundaryKind kinds[] = {BoundaryKind::dashed, BoundaryKind::solid, BoundaryKind::double_solid};
  if (u(rng) < 0.6) s.lane.left_neighbor = "l";
  if (u(rng) < 0.6) s.lane.right_neighbor = "r";
  s.lane.left_boundary = kinds[pick(3)];
  s.lane.right_boundary = kinds[pick(3)];
  if (u(rng) < 0.5) s.lane.distance_to_junction = 200.0 * u(rng);
  if (u(rng) < 0.3) {
    const sim::LightState st[] = {sim::LightState::red, sim::LightState::yellow, sim::LightState::green};
    s.light = sim::LightObservation{"t", st[pick(3)], 60.0 * u(rng)};
  }
  if (u(rng) < 0.1) s.stop_sign = sim::StopSignObservation{"ss", 40.0 * u(rng)};
  const sim::ActorKind ak[] = {sim::ActorKind::vehicle, sim::ActorKind::emergency_vehicle,
                               sim::ActorKind::pedestrian, sim::ActorKind::static_obstacle};
  const sim::Relation rel[] = {sim::Relation::same, sim::Relation::left, sim::Relation::right, sim::Relation::other};
  const int n = pick(6);
  for (int i = 0; i < n; ++i) {
    auto a = actor("a" + std::to_string(i), ak[pick(4)], rel[pick(4)], 120.0 * u(rng) - 50.0, 15.0 * u(rng));
    a.lateral += u(rng) * 2.0 - 1.0;
    a.heading = u(rng) * 6.28 - 3.14;
    s.actors.push_back(a);
  }
  return s;
}

}  // namespace

TEST(Fsm, RedLightAheadStops) {
  auto s = open_road();
  s.light = sim::LightObservation{"t", sim::LightState::red, 25.0};
  const auto out = decide(s);
  EXPECT_EQ(out.response.decision, (DecisionPair{PathDecision::follow_lane, SpeedDecision::stop}));
  EXPECT_EQ(out.cause, Cause::red_light);
  EXPECT_NE(out.response.explanation.find("red"), std::string::npos);
}

TEST(Fsm, GreenOrDistantRedDoesNotStop) {
  auto s = open_road();
  s.light = sim::LightObservation{"t", sim::LightState::green, 25.0};
  EXPECT_NE(decide(s).response.decision.speed, SpeedDecision::stop);
  s.light = sim::LightObservation{"t", sim::LightState::red, 200.0};
  EXPECT_NE(decide(s).response.decision.speed, SpeedDecision::stop);
  // yellow too close to stop comfortably: proceed
  s.light = sim::LightObservation{"t", sim::LightState::yellow, 5.0};
  EXPECT_FALSE(red_light_applies(s, {}));
}

TEST(Fsm, YieldsToEmergencyVehicleBehind) {
  auto s = open_road();
  s.actors.push_back(actor("firetruck", sim::ActorKind::emergency_vehicle, sim::Relation::same, -10.0, 14.0));
  const auto out = decide(s);
  EXPECT_EQ(out.response.decision, (DecisionPair{PathDecision::right_lane_change, SpeedDecision::keep}));
  EXPECT_NE(out.response.explanation.find("yield and allow it to pass first"), std::string::npos);

  // right lane occupied: go left
  s.actors.push_back(actor("r", sim::ActorKind::vehicle, sim::Relation::right, 2.0, 8.0));
  EXPECT_EQ(decide(s).response.decision.path, PathDecision::left_lane_change);
}

TEST(Fsm, SlowLeadOvertakenOnTheLeft) {
  auto s = open_road();
  s.actors.push_back(actor("lead", sim::ActorKind::vehicle, sim::Relation::same, 30.0, 2.0));
  // already at cruise speed: pass without speeding up
  EXPECT_EQ(decide(s).response.decision, (DecisionPair{PathDecision::left_lane_change, SpeedDecision::keep}));
  s.ego.speed = 5.0;
  const auto out = decide(s);
  EXPECT_EQ(out.response.decision, (DecisionPair{PathDecision::left_lane_change, SpeedDecision::accelerate}));
  EXPECT_EQ(out.response.explanation,
            "Since there is no vehicle in the left lane, in order to pass the vehicle in front, change lanes to the left "
            "and accelerate.");

  FsmConfig cfg;
  cfg.slow_lead_borrow = true;
  EXPECT_EQ(decide(s, NavigationCommand::follow_lane, cfg).response.decision,
            (DecisionPair{PathDecision::left_lane_borrow, SpeedDecision::accelerate}));

  // left blocked by a solid line: right
  s.lane.left_boundary = BoundaryKind::solid;
  EXPECT_EQ(decide(s).response.decision.path, PathDecision::right_lane_change);
}

TEST(Fsm, BlockedLaneBorrowsOrStops) {
  auto s = open_road();
  s.actors.push_back(actor("box", sim::ActorKind::static_obstacle, sim::Relation::same, 30.0, 0.0));
  EXPECT_EQ(decide(s).response.decision, (DecisionPair{PathDecision::left_lane_borrow, SpeedDecision::keep}));
  s.ego.speed = 3.0;
  EXPECT_EQ(decide(s).response.decision, (DecisionPair{PathDecision::left_lane_borrow, SpeedDecision::accelerate}));
  s.lane.left_boundary = BoundaryKind::double_solid;
  s.lane.right_boundary = BoundaryKind::double_solid;
  const auto out = decide(s);
  EXPECT_EQ(out.response.decision, (DecisionPair{PathDecision::follow_lane, SpeedDecision::stop}));
  EXPECT_EQ(out.cause, Cause::blocked_lane);
}

TEST(Fsm, TurnPreparationChangesTowardTurnLane) {
  auto s = open_road();
  s.lane.distance_to_junction = 100.0;
  const auto out = decide(s, NavigationCommand::turn_right);
  EXPECT_EQ(out.response.decision.path, PathDecision::right_lane_change);
  EXPECT_EQ(out.response.explanation,
            "Since a right turn is required ahead and not in the right turn lane, so change to the right lane.");
  // already in the rightmost lane
  s.lane.right_neighbor.reset();
  EXPECT_EQ(decide(s, NavigationCommand::turn_right).response.decision.path, PathDecision::follow_lane);
  // too close to change
  auto t = open_road();
  t.lane.distance_to_junction = 10.0;
  EXPECT_EQ(decide(t, NavigationCommand::turn_left).response.decision.path, PathDecision::follow_lane);
}

TEST(Fsm, DefaultFollowsLane) {
  auto s = open_road();
  auto out = decide(s);
  EXPECT_EQ(out.response.decision, (DecisionPair{PathDecision::follow_lane, SpeedDecision::keep}));
  EXPECT_EQ(out.cause, Cause::clear_road);
  s.ego.speed = 2.0;
  EXPECT_EQ(decide(s).response.decision, (DecisionPair{PathDecision::follow_lane, SpeedDecision::accelerate}));
}

TEST(Fsm, PedestrianInLaneStops) {
  auto s = open_road();
  auto p = actor("p", sim::ActorKind::pedestrian, sim::Relation::same, 20.0, 1.2);
  p.lateral = 0.5;
  s.actors.push_back(p);
  EXPECT_EQ(decide(s).response.decision, (DecisionPair{PathDecision::follow_lane, SpeedDecision::stop}));
  // on the sidewalk walking away: ignore
  s.actors[0].lateral = 4.0;
  s.actors[0].heading = 1.57;
  EXPECT_NE(decide(s).response.decision.speed, SpeedDecision::stop);
}

TEST(Fsm, LatchHoldsManeuverUntilComplete) {
  auto s = open_road();
  s.actors.push_back(actor("lead", sim::ActorKind::vehicle, sim::Relation::same, 30.0, 2.0));
  auto [st, out] = fsm_decide(FsmState{}, s, NavigationCommand::follow_lane);
  ASSERT_TRUE(st.latch);
  // the lead disappears mid-maneuver; the change is still held
  auto s2 = open_road();
  s2.time += 1.0;
  s2.lane.lateral = 1.0;
  auto [st2, out2] = fsm_decide(st, s2, NavigationCommand::follow_lane);
  EXPECT_TRUE(out2.continuation);
  EXPECT_EQ(out2.response.decision.path, PathDecision::left_lane_change);
  EXPECT_EQ(out2.response.explanation, out.response.explanation);
  // now on the left lane and centered
  auto s3 = open_road();
  s3.time += 3.0;
  s3.lane.lane_id = "L";
  s3.lane.left_neighbor.reset();
  s3.lane.right_neighbor = "M";
  auto [st3, out3] = fsm_decide(st2, s3, NavigationCommand::follow_lane);
  EXPECT_FALSE(st3.latch);
  EXPECT_EQ(out3.response.decision.path, PathDecision::follow_lane);
  // a red light preempts the latch
  auto [st4, o4] = fsm_decide(FsmState{}, s, NavigationCommand::follow_lane);
  auto s5 = s2;
  s5.light = sim::LightObservation{"t", sim::LightState::red, 20.0};
  auto [st5, o5] = fsm_decide(st4, s5, NavigationCommand::follow_lane);
  EXPECT_EQ(o5.response.decision, (DecisionPair{PathDecision::follow_lane, SpeedDecision::stop}));
  EXPECT_FALSE(st5.latch);
}

TEST(Fsm, ExplanationFallsBackWhenSlotsMissing) {
  const auto e = explain::render_explanation(Cause::slow_lead, {PathDecision::left_lane_change, SpeedDecision::keep}, {});
  EXPECT_TRUE(e.fallback);
  EXPECT_EQ(e.text, "Based on the current scene, the decision is LEFT_LANE_CHANGE with KEEP.");
  explain::Slots wrong;
  wrong.side = "right";
  EXPECT_TRUE(
      explain::render_explanation(Cause::slow_lead, {PathDecision::left_lane_change, SpeedDecision::keep}, wrong)
          .fallback);
  EXPECT_TRUE(
      explain::render_explanation(Cause::turn_right_prep, {PathDecision::left_lane_change, SpeedDecision::keep}, {})
          .fallback);
}

TEST(FsmProperty, TotalAndFeasibleOnRandomScenes) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 3000; ++i) {
    const auto s = random_scene(rng);
    for (auto nav : {NavigationCommand::follow_lane, NavigationCommand::turn_left, NavigationCommand::turn_right}) {
      const auto out = decide(s, nav);
      EXPECT_FALSE(out.response.explanation.empty());
      if (!out.continuation) {
        EXPECT_TRUE(decision::validate_feasibility(out.response.decision, s).feasible)
            << decision::to_string(out.response.decision.path) << " " << s.to_json().dump();
      }
    }
  }
}

TEST(FsmProperty, RedLightDominates) {
  std::mt19937_64 rng(11);
  int hits = 0;
  for (int i = 0; i < 5000; ++i) {
    auto s = random_scene(rng);
    if (!s.light) continue;
    // also from a state holding a latch
    FsmState st;
    st.latch = Latch{PathDecision::left_lane_borrow, Cause::blocked_lane, s.time, "c", "l", 0, 0, {}};
    if (!red_light_applies(s, {})) continue;
    ++hits;
    EXPECT_EQ(decide(s).response.decision.speed, SpeedDecision::stop);
    EXPECT_EQ(fsm_decide(st, s, NavigationCommand::turn_left).second.response.decision.speed, SpeedDecision::stop);
  }
  EXPECT_GT(hits, 50);
}

TEST(FsmProperty, DeterministicForEqualInputs) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto s = random_scene(rng);
    const auto a = decide(s);
    const auto b = decide(s);
    EXPECT_EQ(a.response.decision, b.response.decision);
    EXPECT_EQ(a.response.explanation, b.response.explanation);
  }
}

// FSM + motion closed loop over each fixture scenario; records the sequence
// of lane-change starts and checks no L-R-L (or R-L-R) inside a latch window.
class FsmFixture : public ::testing::TestWithParam<std::string> {};

TEST_P(FsmFixture, NoOscillation) {
  const auto spec = fixtures::load_scenario(GetParam());
  const sim::Simulator sim(sim::apply_overrides(fixtures::load_map(spec.map), spec), spec);
  auto w = sim.spawn(1);
  motion::MotionSession session(sim.map(), {}, spec.route);
  FsmState st;
  std::vector<std::pair<double, int>> starts;  // time, side
  const FsmConfig cfg;
  for (int step = 0; step < 1200; ++step) {
    sim::SceneDescription scene;
    try {
      scene = sim::perceive(w, sim.map(), 150.0, spec.route);
    } catch (const sim::OffMapError &) {
      break;  // ran off the end of the route
    }
    if (step % 10 == 0) {
      auto [next, out] = fsm_decide(st, scene, NavigationCommand::follow_lane, cfg);
      const auto p = out.response.decision.path;
      if (!out.continuation && p != PathDecision::follow_lane) starts.push_back({scene.time, decision::is_left(p) ? 1 : -1});
      st = next;
      try {
        session.set_decision(out.response.decision, scene);
      } catch (const motion::InfeasibleDecision &) {
        session.set_decision({PathDecision::follow_lane, out.response.decision.speed}, scene);
      }
    }
    sim::ControlSignal u;
    try {
      u = session.control(scene, w.ego);
    } catch (const motion::TrackingLost &) {
      break;
    }
    w = sim.step(w, u, 0.05);
  }
  EXPECT_GT(w.time, 20.0);
  for (std::size_t i = 2; i < starts.size(); ++i) {
    const bool alternating = starts[i].second == starts[i - 2].second && starts[i].second != starts[i - 1].second;
    EXPECT_FALSE(alternating && starts[i].first - starts[i - 2].first < cfg.latch_timeout)
        << "oscillation at t=" << starts[i].first;
  }
}

INSTANTIATE_TEST_SUITE_P(Scenarios, FsmFixture,
                         ::testing::Values("borrow_obstacle_two_lane", "junction_left_change", "junction_pedestrian",
                                           "junction_right_change", "junction_straight_red", "overtake_left_highway",
                                           "right_change_in_route", "yield_emergency_highway"));

TEST(FsmConfigFile, StrictKeys) {
  EXPECT_THROW(FsmConfig::from_json({{"cruise", 3}}), FormatError);
  EXPECT_THROW(FsmConfig::from_json({{"cruise_speed", -1}}), FormatError);
  EXPECT_DOUBLE_EQ(FsmConfig::from_json({{"cruise_speed", 10}}).cruise_speed, 10.0);
}
