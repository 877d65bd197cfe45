// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit
// code is the number of failures.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "drivebench/data.hpp"
#include "drivebench/decision.hpp"
#include "drivebench/harness.hpp"
#include "drivebench/metrics.hpp"
#include "drivebench/motion.hpp"
#include "drivebench/simulator.hpp"
#include "fixtures.hpp"
#include "synth.hpp"

using namespace drivebench;
using decision::DecisionPair;
using decision::PathDecision;
using decision::SpeedDecision;
namespace fs = std::filesystem;

namespace {

constexpr double kDt = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream o;
  o << std::setprecision(digits) << v;
  return o.str();
}

fs::path scratch(const std::string & tag) {
  const auto p = fs::temp_directory_path() / ("drivebench_acceptance_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path scenario_file(const std::string & id) { return fixtures::data_dir() / "scenarios" / (id + ".json"); }
fs::path script_file(const std::string & id) { return fixtures::data_dir() / "scripts" / (id + ".json"); }

harness::RunConfig run_config(std::vector<fs::path> scenarios, std::string planner) {
  harness::RunConfig c;
  c.maps_dir = fixtures::data_dir() / "maps";
  c.scenarios = std::move(scenarios);
  c.planner = std::move(planner);
  return c;
}

sim::SceneDescription scene_of(const sim::Simulator & s, const sim::WorldState & w) {
  return sim::perceive(w, s.map(), 150.0, s.scenario().route);
}

// ---- criteria ----

Outcome decision_grammar() {
  int pairs = 0, round_trips = 0;
  for (auto p : decision::kAllPaths) {
    for (auto s : decision::kAllSpeeds) {
      const DecisionPair d{p, s};
      ++pairs;
      const std::string short_text = std::string(decision::short_name(p)) + ", " + std::string(decision::to_string(s));
      if (decision::parse_decision(decision::render_decision(d)) == d && decision::parse_decision(short_text) == d) {
        ++round_trips;
      }
    }
  }
  // arbitrary bytes: either a pair or a DecisionParseError, nothing else
  std::mt19937_64 rng(2024);
  int parsed = 0, rejected = 0, other = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string text(rng() % 96, '\0');
    for (auto & c : text) c = static_cast<char>(rng() & 0xff);
    if (i % 4 == 0) text += i % 8 == 0 ? " LEFT_CHANGE keep" : " follow_lane, STOP";
    try {
      const auto d = decision::parse_decision(text);
      if (decision::try_parse_decision(text) != std::optional<DecisionPair>(d)) ++other;
      ++parsed;
    } catch (const decision::DecisionParseError &) {
      if (decision::try_parse_decision(text)) ++other;
      ++rejected;
    } catch (...) {
      ++other;
    }
  }
  return {pairs == 20 && round_trips == 20 && other == 0,
          std::to_string(round_trips) + "/20 pairs, fuzz 1e5: " + std::to_string(parsed) + " parsed " +
              std::to_string(rejected) + " rejected " + std::to_string(other) + " other"};
}

Outcome metric_identities() {
  const auto table = metrics::PenaltyTable::defaults();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> len(50.0, 2000.0), frac(0.0, 1.0);
  std::uniform_int_distribution<int> nk(0, 4), kind(0, static_cast<int>(sim::kAllInfractionKinds.size()) - 1);
  double worst_ds = 0.0, worst_is = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<metrics::RouteResult> routes(1 + rng() % 12);
    double sum = 0.0;
    for (std::size_t i = 0; i < routes.size(); ++i) {
      auto & r = routes[i];
      r.route_id = "r" + std::to_string(i);
      r.length = len(rng);
      r.completed = r.length * frac(rng);
      double is = 1.0;
      for (int k = nk(rng); k > 0; --k) {
        sim::Infraction inf;
        inf.kind = sim::kAllInfractionKinds[kind(rng)];
        r.infractions.push_back(inf);
        is *= table.coefficient(inf.kind);
      }
      sum += (100.0 * r.completed / r.length) * is;
    }
    const auto m = metrics::driving_score(routes, table);
    worst_ds = std::max(worst_ds, std::abs(m.ds - sum / static_cast<double>(routes.size())));

    // IS of a union equals the product over the parts
    std::vector<sim::InfractionKind> a, b;
    for (int k = nk(rng); k > 0; --k) a.push_back(sim::kAllInfractionKinds[kind(rng)]);
    for (int k = nk(rng); k > 0; --k) b.push_back(sim::kAllInfractionKinds[kind(rng)]);
    auto ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    worst_is = std::max(worst_is, std::abs(metrics::infraction_score(ab, table) -
                                           metrics::infraction_score(a, table) * metrics::infraction_score(b, table)));
  }
  // ten miles over two takeovers
  std::vector<metrics::RouteResult> ten(1);
  ten[0].route_id = "ten";
  ten[0].length = 10.0 / metrics::kMilesPerMeter;
  ten[0].completed = ten[0].length;
  ten[0].takeovers = 2;
  const auto five = metrics::mpi(ten);
  ten[0].takeovers = 0;
  ten[0].length = ten[0].completed = 3.0 / metrics::kMilesPerMeter;
  const auto three = metrics::mpi(ten);
  const bool pass = worst_ds <= 1e-12 && worst_is <= 1e-12 && five.value == 5.0 && !five.no_intervention &&
                    std::abs(three.value - 3.0) < 1e-12 && three.no_intervention;
  return {pass, "max |DS - oracle| " + num(worst_ds) + ", max IS gap " + num(worst_is) + ", MPI " +
                    num(five.value, 17) + " and " + num(three.value, 17) + (three.no_intervention ? " (flag)" : "")};
}

Outcome physics_envelope() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> vd(0.0, 15.0), extra(0.0, 30.0);
  const motion::PlannerConfig cfg;
  int halted = 0;
  double closest = 1e9;
  std::string worst;
  for (int trial = 0; trial < 200; ++trial) {
    const double v = vd(rng);
    const double d = v * v / 8.0 + 1.0 + extra(rng);
    const double ego_s = 20.0;
    const double line = ego_s + d;
    const sim::Simulator s(sim::LaneMap::from_json(fixtures::straight_lane_doc(500.0, line)),
                           sim::ScenarioSpec::from_json(fixtures::straight_scenario_doc(ego_s, v)));
    auto w = s.spawn(1);
    motion::MotionSession session(s.map(), cfg, {"a"});
    session.set_decision({PathDecision::follow_lane, SpeedDecision::stop}, scene_of(s, w));
    bool infraction = false;
    for (int i = 0; i < 4000 && !(i > 0 && w.ego.speed == 0.0); ++i) {
      auto next = s.step(w, session.control(scene_of(s, w), w.ego), kDt);
      infraction = infraction || !sim::detect_infractions(w, next, s.map()).empty();
      w = std::move(next);
      if (i % 10 == 9) session.set_decision({PathDecision::follow_lane, SpeedDecision::stop}, scene_of(s, w));
    }
    const double front = w.ego.pose.x + w.ego.length / 2.0;
    closest = std::min(closest, line - w.ego.pose.x);
    if (w.ego.speed == 0.0 && w.ego.pose.x < line && !infraction) {
      ++halted;
    } else if (worst.empty()) {
      worst = " first miss v=" + num(v) + " d=" + num(d) + " front " + num(front);
    }
  }
  return {halted == 200, std::to_string(halted) + "/200 halted before the line, min center gap " + num(closest) + " m" +
                             worst};
}

Outcome lane_change_geometry() {
  const auto map = fixtures::load_map("highway_3lane");
  const sim::Simulator s(map, sim::ScenarioSpec::from_json(fixtures::highway_doc(100.0, 8.0)));
  const motion::PlannerConfig cfg;
  const double L = cfg.lane_change_length;
  double mid_err = 0.0, worst_track = 0.0, final_err = 0.0;
  bool ok = true;
  for (auto p : {PathDecision::left_lane_change, PathDecision::right_lane_change}) {
    const double side = p == PathDecision::left_lane_change ? 1.0 : -1.0;
    auto w = s.spawn(1);
    const auto scene = scene_of(s, w);
    const motion::MotionPlanner mp(s.map(), cfg, {"M"});
    const auto plan = mp.plan_path(p, scene);
    if (!plan.anchor) return {false, "lane change plan has no anchor"};
    const double start = plan.anchor->start_s;
    bool found = false;
    for (const auto & pt : plan.points) {
      if (std::abs(pt.position.x - (start + L / 2.0)) < 1e-9) {
        mid_err = std::max(mid_err, std::abs(std::abs(pt.position.y - 3.5) - 1.75));
        found = true;
      }
    }
    ok = ok && found;
    // closed loop against the quintic reference y(x)
    motion::MotionSession session(s.map(), cfg, {"M"});
    session.set_decision({p, SpeedDecision::keep}, scene);
    const double x0 = w.ego.pose.x;
    for (int i = 0; w.ego.pose.x < x0 + 3.0 * L; ++i) {
      if (i % 10 == 9 && !session.maneuver_completed()) session.set_decision({p, SpeedDecision::keep}, scene_of(s, w));
      w = s.step(w, session.control(scene_of(s, w), w.ego), kDt);
      const double u = (w.ego.pose.x - start) / L;
      const double ref = 3.5 + side * 3.5 * motion::quintic_blend(u);
      worst_track = std::max(worst_track, std::abs(w.ego.pose.y - ref));
    }
    final_err = std::max(final_err, std::abs(w.ego.pose.y - (3.5 + side * 3.5)));
    ok = ok && w.ego.lane_id == std::optional<std::string>(side > 0 ? "L" : "R");
  }
  ok = ok && mid_err <= 1e-9 && worst_track < 0.2 && final_err < 0.2;
  return {ok, "midpoint error " + num(mid_err) + " m, max closed-loop lateral error " + num(worst_track) +
                  " m, final offset " + num(final_err) + " m"};
}

Outcome annotation_oracle() {
  std::size_t total = 0, same = 0;
  double worst = 1.0;
  motion::PlannerConfig pc;
  pc.cruise_speed = 12.0;
  const auto highway = fixtures::load_map("highway_3lane");
  std::mt19937_64 rng(77);
  for (int i = 0; i < 16; ++i) {
    const double v0 = 6.0 + 2.0 * static_cast<double>(i % 3);
    const int start_lane = i % 4 == 3 ? 0 : i % 4 - 1;
    auto doc = fixtures::highway_doc(100.0, v0);
    doc["id"] = "oracle_hw_" + std::to_string(i);
    doc["ego"]["lane"] = start_lane < 0 ? "R" : start_lane > 0 ? "L" : "M";
    const sim::Simulator sim(highway, sim::ScenarioSpec::from_json(doc));
    const auto syn =
        fixtures::synthesize(sim, fixtures::random_highway_plan(rng, start_lane, v0, pc.cruise_speed), pc);
    const auto a = fixtures::agreement(syn, data::annotate_decisions(syn.log, sim.map()));
    total += a.total;
    same += a.same;
    worst = std::min(worst, a.share());
  }
  const auto borrow_map = fixtures::load_map("two_lane_road");
  auto borrow_doc = io::read_json_file(scenario_file("borrow_obstacle_two_lane"));
  for (int i = 0; i < 4; ++i) {
    borrow_doc["id"] = "oracle_borrow_" + std::to_string(i);
    borrow_doc["ego"]["speed"] = 5.0 + 1.5 * i;
    const sim::Simulator sim(borrow_map, sim::ScenarioSpec::from_json(borrow_doc));
    const auto syn = fixtures::synthesize(
        sim, {{{PathDecision::follow_lane, SpeedDecision::keep}, fixtures::station_at_least(140.0 + 5.0 * i)},
              {{PathDecision::left_lane_borrow, SpeedDecision::keep}, fixtures::maneuver_done()},
              {{PathDecision::follow_lane, SpeedDecision::keep}, fixtures::after(3.0)}});
    const auto a = fixtures::agreement(syn, data::annotate_decisions(syn.log, sim.map()));
    total += a.total;
    same += a.same;
    worst = std::min(worst, a.share());
  }
  const double share = total ? static_cast<double>(same) / static_cast<double>(total) : 0.0;
  return {share >= 0.95, "20 logs, " + std::to_string(same) + "/" + std::to_string(total) + " frames = " + num(share) +
                             " (worst log " + num(worst) + ")"};
}

std::vector<fs::path> archetypes() {
  return {scenario_file("yield_emergency_highway"), scenario_file("overtake_left_highway"),
          scenario_file("junction_pedestrian"), scenario_file("junction_straight_red"),
          scenario_file("borrow_obstacle_two_lane")};
}

Outcome baseline_closed_loop() {
  auto c = run_config(archetypes(), "fsm");
  c.routes_per_scenario = 2;
  const auto fsm = harness::run_closed_loop(harness::RunContext::load(c), {false});
  c.planner = "mock:" + script_file("always_follow_keep").string();
  const auto crippled = harness::run_closed_loop(harness::RunContext::load(c), {false});
  const auto & m = fsm.metrics;
  const bool pass = fsm.routes.size() == 10 && m.rc == 100.0 && m.is == 1.0 && m.ds == 100.0 &&
                    crippled.metrics.ds < m.ds;
  return {pass, "fsm over " + std::to_string(fsm.routes.size()) + " routes: DS " + num(m.ds) + " RC " + num(m.rc) +
                    " IS " + num(m.is) + "; always FOLLOW_LANE/KEEP: DS " + num(crippled.metrics.ds)};
}

Outcome text_metrics() {
  struct Pair {
    std::string cand, ref;
    double bleu;
  };
  const std::vector<Pair> pairs = {
      {"a b c d z w", "a b c d z w", 1.0},
      {"a b c d x y", "a b c d z w", std::pow(4.0 / 6 * 3.0 / 5 * 2.0 / 4 * 1.0 / 3, 0.25)},
      {"a b c d", "a b c d z w", std::exp(1.0 - 6.0 / 4.0)},
      {"a x b y", "a b c d", std::pow(0.5 * (1e-9 / 3) * (1e-9 / 2) * (1e-9 / 1), 0.25)},
      {"stop", "stop now", std::exp(-1.0)},
  };
  double worst = 0.0;
  for (const auto & p : pairs) {
    const std::vector<std::string> ref = {p.ref};
    worst = std::max(worst, std::abs(metrics::bleu4(p.cand, ref) - p.bleu));
  }
  // self score over random sentences
  std::mt19937_64 rng(3);
  const std::vector<std::string> words = {"since", "the", "light", "is", "red", "stop", "change", "lanes", "left"};
  double self_gap = 0.0;
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (std::size_t k = 1 + rng() % 20; k > 0; --k) s += words[rng() % words.size()] + " ";
    const std::vector<std::string> ref = {s};
    self_gap = std::max(self_gap, std::abs(metrics::bleu4(s, ref) - 1.0));
  }
  // CIDEr on a toy corpus: df(a) = 2, everything else 1, three documents
  const std::vector<std::vector<std::string>> refs = {{"a b"}, {"a c"}, {"d e"}};
  const std::vector<std::string> cands = {"a b", "a b", "x y"};
  const auto c = metrics::cider_scores(cands, refs);
  const double la = std::log(1.5), lb = std::log(3.0);
  const double cider_gap = std::max({std::abs(c[0] - 5.0), std::abs(c[1] - 10.0 * (la * la / (la * la + lb * lb)) / 4.0),
                                     std::abs(c[2])});
  const bool pass = worst <= 1e-6 && self_gap <= 1e-12 && cider_gap <= 1e-6;
  return {pass, "BLEU max error " + num(worst) + " on 5 pairs, self-score gap " + num(self_gap) + ", CIDEr max error " +
                    num(cider_gap)};
}

Outcome protocol_matrix() {
  const auto dir = scratch("protocol");
  auto doc = io::read_json_file(scenario_file("overtake_left_highway"));
  doc["id"] = "protocol_road";
  doc["actors"] = json::array();
  doc["route_length"] = 150.0;
  const auto scen = dir / "road.json";
  io::write_text_file(scen, doc.dump());
  const auto garbage = dir / "garbage.json";
  io::write_text_file(garbage, R"({"format_version": 1, "entries": [{"when": "always", "decision": "hmm, no idea"}]})");
  const auto slow = dir / "slow.json";
  io::write_text_file(slow,
                      R"({"format_version": 1, "entries": [{"when": "always", "decision": "FOLLOW_LANE, KEEP", "delay": 0.2}]})");
  const std::string mock = DRIVEBENCH_MOCK_PLANNER;
  const std::string good = script_file("overtake_on_request").string();

  struct Case {
    std::string name;
    std::string planner;
    double timeout;
  };
  const std::vector<Case> cases = {
      {"happy", "external:stdio:" + mock + " --script " + good, 2.0},
      {"garbage", "external:stdio:" + mock + " --script " + garbage.string(), 2.0},
      {"timeout", "external:stdio:" + mock + " --script " + slow.string(), 0.05},
      {"disconnect", "external:stdio:" + mock + " --exit-after 3 --script " + good, 2.0},
  };
  bool pass = true;
  std::string detail;
  for (const auto & cs : cases) {
    auto c = run_config({scen}, cs.planner);
    c.planner_timeout = cs.timeout;
    const auto rep = harness::run_closed_loop(harness::RunContext::load(c));
    const auto & run = rep.routes.at(0);
    const auto & st = run.stats;
    bool ok = st.ok + st.parse_failures + st.timeouts == st.requests && st.fallbacks == st.parse_failures + st.timeouts;
    // a decision in force at every tick
    std::istringstream rows(run.trace);
    std::size_t steps = 0;
    for (std::string line; std::getline(rows, line);) {
      const auto row = json::parse(line);
      if (!row.contains("step")) continue;
      ++steps;
      ok = ok && decision::try_parse_decision(row.at("decision").get<std::string>()).has_value();
    }
    ok = ok && steps == run.steps;
    const auto ticks = (run.steps + 9) / 10;
    if (cs.name == "happy") ok = ok && st.ok == st.requests && st.requests == ticks;
    if (cs.name == "garbage") ok = ok && st.parse_failures == st.requests && st.requests == ticks;
    if (cs.name == "timeout") ok = ok && st.timeouts == st.requests && st.requests == ticks;
    if (cs.name == "disconnect") {
      ok = ok && run.result.termination == "connection_lost" && run.result.terminated_early &&
           run.result.takeovers == 1 && st.requests == 3 && st.ok == 3;
    } else {
      ok = ok && run.result.termination == "completed" && run.result.infractions.empty();
    }
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + cs.name + (ok ? " ok" : " BAD") + " (req " + std::to_string(st.requests) +
              " ok " + std::to_string(st.ok) + " parse " + std::to_string(st.parse_failures) + " timeout " +
              std::to_string(st.timeouts) + " fallback " + std::to_string(st.fallbacks) + ", " +
              run.result.termination + ")";
  }
  fs::remove_all(dir);
  return {pass, detail};
}

Outcome determinism() {
  const auto dir = scratch("determinism");
  auto c = run_config(archetypes(), "fsm");
  c.routes_per_scenario = 2;
  c.jobs = 1;
  harness::write_closed_loop(harness::run_closed_loop(harness::RunContext::load(c)), dir / "a");
  c.jobs = 4;
  harness::write_closed_loop(harness::run_closed_loop(harness::RunContext::load(c)), dir / "b");
  std::size_t files = 0, identical = 0;
  for (const auto & e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto other = dir / "b" / fs::relative(e.path(), dir / "a");
    if (fs::exists(other) && io::read_text_file(e.path()) == io::read_text_file(other)) ++identical;
  }
  fs::remove_all(dir);
  return {files > 10 && identical == files,
          std::to_string(identical) + "/" + std::to_string(files) + " files byte-identical (jobs 1 vs 4)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"decision grammar", decision_grammar},
      {"metric identities", metric_identities},
      {"physics envelope", physics_envelope},
      {"lane-change geometry", lane_change_geometry},
      {"annotation oracle", annotation_oracle},
      {"baseline closed loop", baseline_closed_loop},
      {"text metrics", text_metrics},
      {"protocol robustness", protocol_matrix},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto & [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << " [" << num(secs, 3) << " s]"
              << std::endl;
  }
  return failures;
}
