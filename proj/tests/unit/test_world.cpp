#include <gtest/gtest.h>

#include <cmath>

#include "drivebench/perception.hpp"
#include "drivebench/simulator.hpp"
#include "fixtures.hpp"

using namespace drivebench;
using namespace drivebench::sim;

namespace {

Simulator straight_sim(double ego_s = 10.0, double ego_speed = 0.0, json actors = json::array(),
                       double light_x = -1.0) {
  auto sdoc = fixtures::straight_scenario_doc(ego_s, ego_speed);
  sdoc["actors"] = actors;
  return Simulator(LaneMap::from_json(fixtures::straight_lane_doc(500.0, light_x)), ScenarioSpec::from_json(sdoc));
}

// Kasa algebraic circle fit; returns the radius.
double fit_radius(const std::vector<geom::Vec2> & pts) {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, sxz = 0, syz = 0, sz = 0;
  const double n = static_cast<double>(pts.size());
  for (const auto & p : pts) {
    const double z = p.x * p.x + p.y * p.y;
    sx += p.x, sy += p.y, sxx += p.x * p.x, syy += p.y * p.y, sxy += p.x * p.y;
    sxz += p.x * z, syz += p.y * z, sz += z;
  }
  // solve [sxx sxy sx; sxy syy sy; sx sy n] [a b c]^T = -[sxz syz sz]^T for x^2+y^2+ax+by+c=0
  double m[3][4] = {{sxx, sxy, sx, -sxz}, {sxy, syy, sy, -syz}, {sx, sy, n, -sz}};
  for (int i = 0; i < 3; ++i) {
    for (int k = i + 1; k < 3; ++k) {
      const double f = m[k][i] / m[i][i];
      for (int j = i; j < 4; ++j) m[k][j] -= f * m[i][j];
    }
  }
  double sol[3];
  for (int i = 2; i >= 0; --i) {
    double acc = m[i][3];
    for (int j = i + 1; j < 3; ++j) acc -= m[i][j] * sol[j];
    sol[i] = acc / m[i][i];
  }
  const double cx = -sol[0] / 2, cy = -sol[1] / 2;
  return std::sqrt(cx * cx + cy * cy - sol[2]);
}

}  // namespace

TEST(LaneMapFile, FixtureMapsLoad) {
  for (const char * id : {"highway_3lane", "two_lane_road", "junction_4way"}) {
    EXPECT_NO_THROW(fixtures::load_map(id)) << id;
  }
  const auto j = fixtures::load_map("junction_4way");
  EXPECT_EQ(j.lanes().size(), 32u);
  EXPECT_EQ(j.lights().size(), 4u);
}

TEST(LaneMapFile, RejectsSchemaViolations) {
  auto doc = fixtures::straight_lane_doc();
  doc["extra"] = 1;
  EXPECT_THROW(LaneMap::from_json(doc), FormatError);

  doc = fixtures::straight_lane_doc();
  doc["format_version"] = 2;
  EXPECT_THROW(LaneMap::from_json(doc), FormatError);

  doc = fixtures::straight_lane_doc();
  doc["lanes"][0]["left_neighbor"] = "ghost";
  EXPECT_THROW(LaneMap::from_json(doc), FormatError);

  doc = fixtures::straight_lane_doc();
  doc["lanes"][0]["centerline"] = json::array({json::array({0.0, 0.0})});
  EXPECT_THROW(LaneMap::from_json(doc), FormatError);

  doc = fixtures::straight_lane_doc(500.0, 100.0);
  doc["lights"][0]["schedule"][0]["duration"] = 0.0;
  EXPECT_THROW(LaneMap::from_json(doc), FormatError);

  doc = fixtures::straight_lane_doc(500.0, 100.0);
  doc["lights"][0]["stop_line"] = json::array({json::array({100.0, 5.0}), json::array({100.0, 8.0})});
  EXPECT_THROW(LaneMap::from_json(doc), FormatError);
}

TEST(LaneMapFile, RejectsAsymmetricNeighbors) {
  auto doc = fixtures::straight_lane_doc();
  json b = doc["lanes"][0];
  b["id"] = "b";
  b["centerline"] = json::array({json::array({0.0, 3.5}), json::array({500.0, 3.5})});
  doc["lanes"][0]["left_neighbor"] = "b";
  doc["lanes"].push_back(b);
  EXPECT_THROW(LaneMap::from_json(doc), FormatError);
  doc["lanes"][1]["right_neighbor"] = "a";
  EXPECT_NO_THROW(LaneMap::from_json(doc));
}

TEST(LaneMapFile, LightScheduleCycles) {
  const auto m = fixtures::load_map("junction_4way");
  const auto & s = *m.find_light("S_light");
  EXPECT_EQ(s.state_at(0.0), LightState::green);
  EXPECT_EQ(s.state_at(31.0), LightState::yellow);
  EXPECT_EQ(s.state_at(40.0), LightState::red);
  EXPECT_EQ(s.state_at(66.5), LightState::green);
  const auto & e = *m.find_light("E_light");
  EXPECT_EQ(e.state_at(0.0), LightState::red);
  EXPECT_EQ(e.state_at(34.0), LightState::green);
}

TEST(LaneMapLocalize, HintAndPreferenceResolveOverlaps) {
  const auto m = fixtures::load_map("junction_4way");
  // start of the junction: both connectors of S_in_0 contain this point
  const geom::Vec2 p{1.75, -13.5};
  const std::vector<std::string> left_route = {"S_in_0", "S_0_left", "W_out_0"};
  auto loc = m.localize(p, geom::kPi / 2, std::string_view("S_in_0"), left_route);
  ASSERT_TRUE(loc);
  EXPECT_EQ(loc->lane_id, "S_0_left");
  const std::vector<std::string> straight_route = {"S_in_0", "S_0_straight", "N_out_0"};
  loc = m.localize(p, geom::kPi / 2, std::string_view("S_in_0"), straight_route);
  EXPECT_EQ(loc->lane_id, "S_0_straight");
  // opposing lanes are filtered by heading
  loc = m.localize({-1.75, -100.0}, geom::kPi / 2);
  EXPECT_FALSE(loc.has_value());
  EXPECT_FALSE(m.localize({50.0, -100.0}, 0.0).has_value());
}

TEST(LaneMapChain, StationsAcrossSuccessors) {
  const auto m = fixtures::load_map("two_lane_road");
  const auto c = m.chain("a_r", 0.0, 800.0);
  ASSERT_EQ(c.lane_ids.size(), 2u);
  EXPECT_DOUBLE_EQ(c.lane_start[1], 600.0);
  EXPECT_DOUBLE_EQ(c.line.length(), 1000.0);
  EXPECT_EQ(c.lane_at(650.0), "b_r");
  EXPECT_DOUBLE_EQ(*c.station_of("b_r", 10.0), 610.0);
  const auto back = m.chain("b_r", 100.0, 10.0);
  EXPECT_EQ(back.lane_ids.front(), "a_r");
  const std::vector<std::string> broken = {"a_r", "b_l"};
  EXPECT_THROW(m.chain_through(broken), std::invalid_argument);
}

TEST(SimStep, StraightMotionMatchesModel) {
  const auto sim = straight_sim(10.0, 10.0);
  auto w = sim.spawn(1);
  w.ego.pose = {0.0, 0.0, 0.0};
  const auto n = sim.step(w, {0.0, 0.0}, 0.1);
  EXPECT_DOUBLE_EQ(n.ego.pose.x, 1.0);
  EXPECT_DOUBLE_EQ(n.ego.pose.y, 0.0);
  EXPECT_DOUBLE_EQ(n.ego.speed, 10.0);
  EXPECT_DOUBLE_EQ(n.time, w.time + 0.1);
}

TEST(SimStep, NoReverse) {
  const auto sim = straight_sim(10.0, 0.0);
  auto w = sim.spawn(1);
  for (int i = 0; i < 10; ++i) w = sim.step(w, {0.0, -3.0}, 0.05);
  EXPECT_EQ(w.ego.speed, 0.0);
  EXPECT_DOUBLE_EQ(w.ego.pose.x, 10.0);
}

TEST(SimStep, RejectsBadInput) {
  const auto sim = straight_sim();
  const auto w = sim.spawn(1);
  EXPECT_THROW(sim.step(w, {0.0, 0.0}, 0.0), StepError);
  EXPECT_THROW(sim.step(w, {0.0, 0.0}, 0.25), StepError);
  EXPECT_THROW(sim.step(w, {std::nan(""), 0.0}, 0.05), StepError);
  EXPECT_THROW(sim.step(w, {0.0, INFINITY}, 0.05), StepError);
}

TEST(SimStep, ConstantSteerTracesExpectedCircle) {
  const auto sim = straight_sim(10.0, 5.0);
  auto w = sim.spawn(1);
  std::vector<geom::Vec2> pts;
  for (int i = 0; i < 1000; ++i) {
    w = sim.step(w, {0.1, 0.0}, 0.01);
    pts.push_back(w.ego.pose.position());
  }
  const double expected = 2.8 / std::tan(0.1);
  EXPECT_NEAR(expected, 27.91, 0.01);
  EXPECT_NEAR(fit_radius(pts), expected, 0.01 * expected);
}

TEST(SimSpawn, SeedDeterminesWorld) {
  const auto spec = fixtures::load_scenario("yield_emergency_highway");
  const Simulator sim(fixtures::load_map(spec.map), spec);
  const auto a = sim.spawn(7);
  const auto b = sim.spawn(7);
  const auto c = sim.spawn(8);
  ASSERT_EQ(a.actors.size(), b.actors.size());
  for (std::size_t i = 0; i < a.actors.size(); ++i) {
    EXPECT_EQ(a.actors[i].pose.x, b.actors[i].pose.x);
    EXPECT_EQ(a.actors[i].pose.y, b.actors[i].pose.y);
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.actors.size(); ++i) differs |= a.actors[i].pose.x != c.actors[i].pose.x;
  EXPECT_TRUE(differs);
}

TEST(SimSpawn, EmergencyVehicleBehindAndFaster) {
  const auto spec = fixtures::load_scenario("yield_emergency_highway");
  const Simulator sim(fixtures::load_map(spec.map), spec);
  const auto w = sim.spawn(1);
  int evs = 0;
  for (const auto & a : w.actors) {
    if (a.kind != ActorKind::emergency_vehicle) continue;
    ++evs;
    EXPECT_EQ(a.lane_id, w.ego.lane_id);
    EXPECT_LT(a.pose.x, w.ego.pose.x);
    EXPECT_GT(a.speed, w.ego.speed);
  }
  EXPECT_EQ(evs, 1);
}

TEST(SimSpawn, SlowVehicleAheadWhenOvertaking) {
  const auto spec = fixtures::load_scenario("overtake_left_highway");
  const Simulator sim(fixtures::load_map(spec.map), spec);
  const auto w = sim.spawn(1);
  bool found = false;
  for (const auto & a : w.actors) {
    if (a.kind == ActorKind::vehicle && a.lane_id == w.ego.lane_id && a.pose.x > w.ego.pose.x) {
      found = true;
      EXPECT_LT(a.speed, 8.0 * 0.5);
    }
  }
  EXPECT_TRUE(found);
}

TEST(SimSpawn, EmptyActorListGivesEgoOnly) {
  const auto w = straight_sim().spawn(3);
  EXPECT_TRUE(w.actors.empty());
  EXPECT_EQ(w.ego.kind, ActorKind::ego);
}

TEST(SimSpawn, UnknownLaneRejected) {
  auto sdoc = fixtures::straight_scenario_doc();
  sdoc["actors"] = json::array({{{"id", "v"}, {"kind", "vehicle"}, {"lane", "zzz"}, {"s", 5.0}}});
  EXPECT_THROW(Simulator(LaneMap::from_json(fixtures::straight_lane_doc()), ScenarioSpec::from_json(sdoc)),
               FormatError);
  sdoc = fixtures::straight_scenario_doc();
  sdoc["ego"]["lane"] = "zzz";
  EXPECT_THROW(Simulator(LaneMap::from_json(fixtures::straight_lane_doc()), ScenarioSpec::from_json(sdoc)),
               FormatError);
}

TEST(SimProperties, DeterministicAndKinematicallyBounded) {
  for (const char * id : {"yield_emergency_highway", "overtake_left_highway", "junction_pedestrian"}) {
    const auto spec = fixtures::load_scenario(id);
    const Simulator sim(fixtures::load_map(spec.map), spec);
    auto a = sim.spawn(11);
    auto b = sim.spawn(11);
    for (int i = 0; i < 600; ++i) {
      const ControlSignal u{0.02 * std::sin(i * 0.01), i < 200 ? 1.0 : -0.5};
      auto na = sim.step(a, u, 0.05);
      const auto nb = sim.step(b, u, 0.05);
      const double bound = sim.config().v_max * 0.05 + 1e-9;
      EXPECT_LE(geom::distance(na.ego.pose.position(), a.ego.pose.position()), bound);
      for (std::size_t k = 0; k < na.actors.size(); ++k) {
        EXPECT_LE(geom::distance(na.actors[k].pose.position(), a.actors[k].pose.position()), bound) << id;
        ASSERT_EQ(na.actors[k].pose.x, nb.actors[k].pose.x);
        ASSERT_EQ(na.actors[k].pose.y, nb.actors[k].pose.y);
      }
      ASSERT_EQ(na.ego.pose.x, nb.ego.pose.x);
      ASSERT_GE(na.time, a.time);
      a = std::move(na);
      b = nb;
    }
  }
}

TEST(Infractions, CollisionReportedOncePerOverlap) {
  const auto sim = straight_sim(10.0, 5.0,
                                json::array({{{"id", "box"}, {"kind", "static_obstacle"}, {"lane", "a"}, {"s", 30.0}}}));
  auto w = sim.spawn(1);
  int collisions = 0;
  for (int i = 0; i < 200; ++i) {
    const auto n = sim.step(w, {0.0, 0.0}, 0.05);
    for (const auto & inf : detect_infractions(w, n, sim.map())) {
      EXPECT_EQ(inf.kind, InfractionKind::collision_static);
      ++collisions;
    }
    w = n;
  }
  EXPECT_EQ(collisions, 1);
}

TEST(Infractions, PedestrianOverlapIsPedestrianCollision) {
  const auto sim = straight_sim(10.0, 0.0,
                                json::array({{{"id", "p"}, {"kind", "pedestrian"}, {"position", {12.0, 0.0}}}}));
  auto w = sim.spawn(1);
  WorldState before = w;
  before.actors[0].pose.x = 40.0;
  const auto inf = detect_infractions(before, w, sim.map());
  ASSERT_EQ(inf.size(), 1u);
  EXPECT_EQ(inf[0].kind, InfractionKind::collision_pedestrian);
}

TEST(Infractions, RedLightCrossing) {
  const auto sim = straight_sim(10.0, 8.0, json::array(), 30.0);
  auto w = sim.spawn(1);
  int red = 0;
  for (int i = 0; i < 100; ++i) {
    const auto n = sim.step(w, {0.0, 0.0}, 0.05);
    for (const auto & inf : detect_infractions(w, n, sim.map())) red += inf.kind == InfractionKind::red_light;
    w = n;
  }
  EXPECT_EQ(red, 1);
}

TEST(Infractions, BoundaryCrossings) {
  const auto m = fixtures::load_map("two_lane_road");
  auto doc = fixtures::straight_scenario_doc(10.0, 10.0);
  doc["map"] = "two_lane_road";
  doc["ego"]["lane"] = "a_r";
  doc["route"] = json::array({"a_r", "b_r"});
  const Simulator sim(m, ScenarioSpec::from_json(doc));

  auto run = [&](double start_x) {
    auto w = sim.spawn(1);
    sim.place_ego(w, {start_x, 0.0, 0.3}, 10.0);
    std::vector<Infraction> all;
    for (int i = 0; i < 40; ++i) {
      const auto n = sim.step(w, {0.0, 0.0}, 0.05);
      for (const auto & inf : detect_infractions(w, n, m)) all.push_back(inf);
      w = n;
    }
    return all;
  };
  EXPECT_TRUE(run(100.0).empty());  // dashed section
  const auto solid = run(700.0);
  ASSERT_EQ(solid.size(), 1u);
  EXPECT_EQ(solid[0].kind, InfractionKind::double_solid_crossing);
}

TEST(Infractions, FailedYieldAfterHoldTime) {
  const auto m = fixtures::load_map("highway_3lane");
  auto doc = fixtures::straight_scenario_doc(100.0, 8.0);
  doc["map"] = "highway_3lane";
  doc["ego"]["lane"] = "M";
  doc["route"] = json::array({"M"});
  doc["spawn_jitter"] = 0.0;
  doc["actors"] = json::array({{{"id", "ev"},
                                {"kind", "emergency_vehicle"},
                                {"lane", "M"},
                                {"s", 90.0},
                                {"speed", 8.0},
                                {"behavior", {{"kind", "constant_speed"}, {"desired_speed", 8.0}}}}});
  const Simulator sim(m, ScenarioSpec::from_json(doc));
  auto w = sim.spawn(1);
  std::vector<double> times;
  for (int i = 0; i < 300; ++i) {
    const auto n = sim.step(w, {0.0, 0.0}, 0.05);
    for (const auto & inf : detect_infractions(w, n, m)) {
      if (inf.kind == InfractionKind::failed_yield_emergency) times.push_back(inf.time);
    }
    w = n;
  }
  ASSERT_EQ(times.size(), 1u);
  EXPECT_NEAR(times[0], 5.0, 0.051);
}

TEST(Infractions, StopSignRequiresFullStop) {
  const auto m = fixtures::load_map("two_lane_road");
  auto doc = fixtures::straight_scenario_doc(940.0 - 600.0, 6.0);
  doc["map"] = "two_lane_road";
  doc["ego"]["lane"] = "b_r";
  doc["route"] = json::array({"b_r"});
  doc["trigger"]["point"] = json::array({990.0, 0.0});
  const Simulator sim(m, ScenarioSpec::from_json(doc));

  auto count = [&](bool stop_first) {
    auto w = sim.spawn(1);
    int n_inf = 0;
    for (int i = 0; i < 400; ++i) {
      double a = 0.0;
      const double to_line = 960.0 - w.ego.pose.x;
      if (stop_first && to_line > 1.0 && w.time < 9.0) a = -w.ego.speed * w.ego.speed / (2.0 * (to_line - 1.0)) - 0.05;
      if (stop_first && w.time >= 9.0) a = 1.0;
      const auto n = sim.step(w, {0.0, a}, 0.05);
      for (const auto & inf : detect_infractions(w, n, m)) n_inf += inf.kind == InfractionKind::stop_sign;
      w = n;
    }
    return n_inf;
  };
  EXPECT_EQ(count(false), 1);
  EXPECT_EQ(count(true), 0);
}

TEST(Perception, RangeFilterAndLaneContext) {
  const auto m = fixtures::load_map("highway_3lane");
  auto doc = fixtures::straight_scenario_doc(100.0, 5.0);
  doc["map"] = "highway_3lane";
  doc["ego"]["lane"] = "R";
  doc["route"] = json::array({"R"});
  doc["spawn_jitter"] = 0.0;
  doc["actors"] = json::array({{{"id", "far"}, {"kind", "vehicle"}, {"lane", "R"}, {"s", 300.0}},
                               {{"id", "near"}, {"kind", "vehicle"}, {"lane", "M"}, {"s", 120.0}}});
  const Simulator sim(m, ScenarioSpec::from_json(doc));
  const auto w = sim.spawn(1);
  const auto scene = perceive(w, m, 100.0);
  ASSERT_EQ(scene.actors.size(), 1u);
  EXPECT_EQ(scene.actors[0].id, "near");
  EXPECT_EQ(scene.actors[0].relation, Relation::left);
  EXPECT_DOUBLE_EQ(scene.actors[0].longitudinal, 20.0);
  EXPECT_FALSE(scene.lane.right_neighbor.has_value());
  EXPECT_EQ(scene.lane.left_neighbor, std::optional<std::string>("M"));
  EXPECT_EQ(scene.lane.left_boundary, BoundaryKind::dashed);
}

TEST(Perception, RedLightStopLineDistance) {
  const auto sim = straight_sim(100.0, 0.0, json::array(), 130.0);
  const auto scene = perceive(sim.spawn(1), sim.map(), 100.0);
  ASSERT_TRUE(scene.light.has_value());
  EXPECT_EQ(scene.light->state, LightState::red);
  EXPECT_NEAR(scene.light->stop_line_distance, 30.0, 0.1);
}

TEST(Perception, StopLineDistanceFollowsCenterline) {
  auto doc = fixtures::straight_lane_doc(500.0, 130.0);
  doc["lanes"][0]["centerline"] =
      json::array({json::array({0.0, 0.0}), json::array({110.0, 0.0}), json::array({200.0, 9.0})});
  doc["lights"][0]["stop_line"] = json::array({json::array({129.8, -1.0}), json::array({130.2, 4.0})});
  const Simulator sim(LaneMap::from_json(doc), ScenarioSpec::from_json(fixtures::straight_scenario_doc(100.0)));
  const auto scene = perceive(sim.spawn(1), sim.map(), 100.0);
  ASSERT_TRUE(scene.light.has_value());
  // oracle: second segment (110 + 90t, 9t) meets x = 129.8 + 0.08 (y + 1)
  const double t = (129.8 + 0.08 - 110.0) / (90.0 - 0.08 * 9.0);
  const double expected = 10.0 + t * std::hypot(90.0, 9.0);
  EXPECT_NEAR(scene.light->stop_line_distance, expected, 1e-3);
}

TEST(Perception, IsPureAndOffMapThrows) {
  const auto spec = fixtures::load_scenario("overtake_left_highway");
  const Simulator sim(fixtures::load_map(spec.map), spec);
  auto w = sim.spawn(2);
  const auto before = w.ego.pose.x;
  const auto s1 = perceive(w, sim.map(), 100.0, spec.route);
  const auto s2 = perceive(w, sim.map(), 100.0, spec.route);
  EXPECT_EQ(s1, s2);
  EXPECT_EQ(w.ego.pose.x, before);
  EXPECT_EQ(SceneDescription::from_json(s1.to_json()), s1);
  sim.place_ego(w, {50.0, 40.0, 0.0}, 0.0);
  EXPECT_THROW(perceive(w, sim.map(), 100.0), OffMapError);
  EXPECT_THROW(perceive(sim.spawn(2), sim.map(), 0.0), std::invalid_argument);
}
