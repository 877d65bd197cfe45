#include "drivebench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "drivebench/navigation.hpp"
#include "drivebench/perception.hpp"
#include "drivebench/protocol.hpp"

namespace drivebench::harness {

using decision::DecisionPair;
using decision::PathDecision;

std::string_view to_string(Regime r) { return r == Regime::ds ? "ds" : "mpi"; }

Regime regime_from_string(std::string_view s) {
  if (s == "ds") return Regime::ds;
  if (s == "mpi") return Regime::mpi;
  throw ConfigError("unknown regime '" + std::string(s) + "' (expected ds or mpi)");
}

// ---- config ----

void RunConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("no scenarios given");
  if (routes_per_scenario < 1) throw ConfigError("routes per scenario must be at least 1");
  if (decision_period < 1) throw ConfigError("decision period must be at least 1 step");
  if (!(dt > 0.0 && dt <= 0.2)) throw ConfigError("dt must be in (0, 0.2]");
  if (!(planner_timeout > 0.0)) throw ConfigError("planner timeout must be positive");
  if (!(blocked_limit > 0.0)) throw ConfigError("blocked limit must be positive");
  if (!(relocation_ahead > 0.0)) throw ConfigError("relocation distance must be positive");
  if (!(perception_range > 0.0)) throw ConfigError("perception range must be positive");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (planner.empty()) throw ConfigError("empty planner spec");
}

ordered_json RunConfig::to_json() const {
  // output_dir, jobs and write_traces do not change results and stay out,
  // so equal runs give equal reports wherever they are written
  ordered_json j;
  j["maps_dir"] = maps_dir.string();
  j["scenarios"] = ordered_json::array();
  for (const auto & s : scenarios) j["scenarios"].push_back(s.string());
  j["routes_per_scenario"] = routes_per_scenario;
  j["planner"] = planner;
  j["seed"] = seed;
  j["decision_period"] = decision_period;
  j["dt"] = dt;
  j["penalty_table"] = penalty_table ? ordered_json(penalty_table->string()) : ordered_json(nullptr);
  j["fsm_config"] = fsm_config ? ordered_json(fsm_config->string()) : ordered_json(nullptr);
  j["motion_config"] = motion_config ? ordered_json(motion_config->string()) : ordered_json(nullptr);
  j["regime"] = to_string(regime);
  j["planner_timeout"] = planner_timeout;
  j["fallback"] = fallback == protocol::FallbackPolicy::fsm ? "fsm" : "stop";
  j["blocked_limit"] = blocked_limit;
  j["relocation_ahead"] = relocation_ahead;
  j["perception_range"] = perception_range;
  return j;
}

RunConfig RunConfig::from_json(const json & j, RunConfig base, const std::filesystem::path & base_dir) {
  constexpr std::string_view ctx = "run config";
  if (!j.is_object()) throw ConfigError("run config: expected an object");
  try {
    io::require_known_keys(j,
                           {"format_version", "maps_dir", "scenarios", "routes_per_scenario", "planner", "seed",
                            "decision_period", "dt", "penalty_table", "fsm_config", "motion_config", "output_dir",
                            "regime", "planner_timeout", "fallback", "blocked_limit", "relocation_ahead",
                            "perception_range", "jobs"},
                           ctx);
    io::require_format_version(j, 1, ctx);
    auto path = [&](const char * key) {
      std::filesystem::path p = io::get_required<std::string>(j, key, ctx);
      return p.is_relative() ? base_dir / p : p;
    };
    if (j.contains("maps_dir")) base.maps_dir = path("maps_dir");
    if (j.contains("scenarios")) {
      base.scenarios.clear();
      for (const auto & s : io::get_required<std::vector<std::string>>(j, "scenarios", ctx)) {
        const std::filesystem::path p = s;
        base.scenarios.push_back(p.is_relative() ? base_dir / p : p);
      }
    }
    if (j.contains("routes_per_scenario")) base.routes_per_scenario = io::get_required<int>(j, "routes_per_scenario", ctx);
    if (j.contains("planner")) base.planner = io::get_required<std::string>(j, "planner", ctx);
    if (j.contains("seed")) base.seed = io::get_required<std::uint64_t>(j, "seed", ctx);
    if (j.contains("decision_period")) base.decision_period = io::get_required<int>(j, "decision_period", ctx);
    if (j.contains("dt")) base.dt = io::get_required<double>(j, "dt", ctx);
    if (j.contains("penalty_table")) base.penalty_table = path("penalty_table");
    if (j.contains("fsm_config")) base.fsm_config = path("fsm_config");
    if (j.contains("motion_config")) base.motion_config = path("motion_config");
    if (j.contains("output_dir")) base.output_dir = path("output_dir");
    if (j.contains("regime")) base.regime = regime_from_string(io::get_required<std::string>(j, "regime", ctx));
    if (j.contains("planner_timeout")) base.planner_timeout = io::get_required<double>(j, "planner_timeout", ctx);
    if (j.contains("fallback")) {
      try {
        base.fallback = protocol::fallback_from_string(io::get_required<std::string>(j, "fallback", ctx));
      } catch (const std::invalid_argument & e) {
        throw ConfigError(e.what());
      }
    }
    if (j.contains("blocked_limit")) base.blocked_limit = io::get_required<double>(j, "blocked_limit", ctx);
    if (j.contains("relocation_ahead")) base.relocation_ahead = io::get_required<double>(j, "relocation_ahead", ctx);
    if (j.contains("perception_range")) base.perception_range = io::get_required<double>(j, "perception_range", ctx);
    if (j.contains("jobs")) base.jobs = io::get_required<int>(j, "jobs", ctx);
  } catch (const FormatError & e) {
    throw ConfigError(e.what());
  }
  return base;
}

std::uint64_t route_seed(std::uint64_t seed, std::string_view scenario_id, int index) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed ^ data::fnv1a(scenario_id) ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<std::string> shell_argv(const std::string & command) { return {"/bin/sh", "-c", "exec " + command}; }

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

std::unique_ptr<protocol::Planner> make_planner(const RunConfig & cfg) {
  fsm::FsmConfig fc;
  if (cfg.fsm_config) {
    try {
      fc = fsm::FsmConfig::from_json(io::read_json_file(*cfg.fsm_config));
    } catch (const std::exception & e) {
      throw ConfigError(e.what());
    }
  }
  const std::string & spec = cfg.planner;
  if (spec == "fsm") return std::make_unique<protocol::FsmPlanner>(fc);
  if (starts_with(spec, "mock:")) {
    protocol::MockScript script;
    try {
      script = protocol::MockScript::load(spec.substr(5));
    } catch (const std::exception & e) {
      throw ConfigError(std::string("mock script: ") + e.what());
    }
    return std::make_unique<protocol::MockPlanner>(std::move(script), cfg.planner_timeout,
                                                   protocol::make_fallback(cfg.fallback, fc));
  }
  if (starts_with(spec, "external:stdio:")) {
    const std::string command = spec.substr(15);
    if (command.empty()) throw ConfigError("external:stdio: needs a command");
    return std::make_unique<protocol::ExternalPlanner>(
        [command]() -> std::unique_ptr<protocol::Connection> {
          return protocol::SubprocessConnection::spawn(shell_argv(command));
        },
        cfg.planner_timeout, protocol::make_fallback(cfg.fallback, fc), spec);
  }
  if (starts_with(spec, "external:socket:")) {
    const std::string path = spec.substr(16);
    if (path.empty()) throw ConfigError("external:socket: needs a path");
    return std::make_unique<protocol::ExternalPlanner>(
        [path]() -> std::unique_ptr<protocol::Connection> { return protocol::connect_unix(path); },
        cfg.planner_timeout, protocol::make_fallback(cfg.fallback, fc), spec);
  }
  throw ConfigError("unknown planner spec '" + spec +
                    "' (expected fsm, mock:FILE, external:stdio:CMD or external:socket:PATH)");
}

RunContext RunContext::load(const RunConfig & cfg) {
  cfg.validate();
  RunContext ctx;
  ctx.cfg = cfg;
  try {
    std::map<std::string, sim::LaneMap> maps;
    for (const auto & path : cfg.scenarios) {
      auto spec = sim::ScenarioSpec::load(path);
      if (!maps.count(spec.map)) maps.emplace(spec.map, sim::LaneMap::load(cfg.maps_dir / (spec.map + ".json")));
      sim::validate_scenario(spec, maps.at(spec.map));
      ctx.maps.push_back(sim::apply_overrides(maps.at(spec.map), spec));
      ctx.scenarios.push_back(std::move(spec));
    }
    std::set<std::string> ids;
    for (const auto & s : ctx.scenarios) {
      if (!ids.insert(s.id).second) throw ConfigError("scenario id '" + s.id + "' given twice");
    }
    if (cfg.penalty_table) ctx.penalties = metrics::PenaltyTable::load(*cfg.penalty_table);
    if (cfg.fsm_config) ctx.fsm = fsm::FsmConfig::from_json(io::read_json_file(*cfg.fsm_config));
    if (cfg.motion_config) ctx.motion = motion::PlannerConfig::from_json(io::read_json_file(*cfg.motion_config));
    ctx.system_message = decision::build_system_message().text();
    // fail early on a bad planner spec or script
    make_planner(cfg);
  } catch (const ConfigError &) {
    throw;
  } catch (const std::exception & e) {
    throw ConfigError(e.what());
  }
  return ctx;
}

// ---- closed loop ----

namespace {

ordered_json infraction_row(const sim::Infraction & i) {
  ordered_json j;
  j["kind"] = sim::to_string(i.kind);
  j["time"] = io::quantize(i.time);
  j["x"] = io::quantize(i.position.x);
  j["y"] = io::quantize(i.position.y);
  j["detail"] = i.detail;
  return j;
}

bool is_collision(sim::InfractionKind k) {
  return k == sim::InfractionKind::collision_pedestrian || k == sim::InfractionKind::collision_vehicle ||
         k == sim::InfractionKind::collision_static;
}

/// First pose on the route at least `ahead` past the progress whose ego box
/// (grown by a meter each way) touches no actor.
void relocate(const sim::Simulator & sim, sim::WorldState & w, const metrics::RouteProgress & progress, double ahead) {
  sim::Pose pose;
  for (double extra = 0.0; extra <= 100.0; extra += 2.0) {
    const auto p = progress.point_ahead(ahead + extra);
    pose = {p.x, p.y, progress.heading_ahead(ahead + extra)};
    const geom::OrientedBox box{p, pose.heading, w.ego.length + 2.0, w.ego.width + 2.0};
    bool clear = true;
    for (const auto & a : w.actors) {
      if (geom::overlaps(box, a.box())) {
        clear = false;
        break;
      }
    }
    if (clear) break;
  }
  sim.place_ego(w, pose, 0.0);
}

}  // namespace

RouteRun run_route(const RunContext & ctx, std::size_t scenario, int index, protocol::Planner & planner,
                   const RouteOptions & opt) {
  const auto & cfg = ctx.cfg;
  const auto & spec = ctx.scenarios.at(scenario);
  sim::SimConfig sc = ctx.sim;
  sc.dt = cfg.dt;
  const sim::Simulator sim(ctx.maps.at(scenario), spec, sc);
  const auto & map = sim.map();

  RouteRun run;
  run.scenario_id = spec.id;
  run.route_id = spec.id + "/" + std::to_string(index);
  run.seed = route_seed(cfg.seed, spec.id, index);
  run.result.route_id = run.route_id;

  auto w = sim.spawn(run.seed);
  motion::MotionSession session(map, ctx.motion, spec.route);
  metrics::RouteProgress progress(map, spec.route, w.ego.pose.position(), spec.route_length);
  run.result.length = progress.length();
  const double timeout = 2.0 * progress.length() / ctx.motion.cruise_speed + 60.0;
  planner.reset();

  std::ostringstream trace;
  if (opt.trace) {
    ordered_json h;
    h["format_version"] = kTraceVersion;
    h["type"] = "trace";
    h["route_id"] = run.route_id;
    h["scenario_id"] = spec.id;
    h["seed"] = run.seed;
    h["dt"] = cfg.dt;
    h["decision_period"] = cfg.decision_period;
    h["regime"] = to_string(cfg.regime);
    h["route_length"] = io::quantize(progress.length());
    h["penalty_table"] = ctx.penalties.to_json();
    trace << h.dump() << "\n";
  }
  if (opt.log) {
    data::DrivingLog log;
    log.scenario_id = spec.id;
    log.episode_id = run.route_id;
    log.map_id = spec.map;
    log.route = spec.route;
    run.log = std::move(log);
  }

  std::uint64_t request_id = 0;
  bool force_decision = true;
  double stopped_for = 0.0;
  std::string termination;

  auto takeover = [&](sim::WorldState & world) {
    ++run.result.takeovers;
    relocate(sim, world, progress, cfg.relocation_ahead);
    progress.update(world.ego.pose.position());
    session.reset();
    force_decision = true;
    stopped_for = 0.0;
  };

  for (std::uint64_t step = 0;; ++step) {
    sim::SceneDescription scene;
    try {
      scene = sim::perceive(w, map, cfg.perception_range, spec.route);
    } catch (const sim::OffMapError &) {
      if (cfg.regime == Regime::mpi) {
        takeover(w);
        scene = sim::perceive(w, map, cfg.perception_range, spec.route);
      } else {
        ++run.result.takeovers;
        termination = "off_map";
        break;
      }
    }

    if (force_decision || step % static_cast<std::uint64_t>(cfg.decision_period) == 0) {
      force_decision = false;
      protocol::PlannerRequest req;
      req.id = ++request_id;
      req.system_message = ctx.system_message;
      req.scene = scene;
      req.navigation = decision::navigation_command(map, spec.route, scene);
      req.user_instruction = scene.instruction;
      DecisionPair d;
      try {
        d = planner.decide(req).decision;
      } catch (const protocol::ConnectionClosed &) {
        ++run.result.takeovers;
        termination = "connection_lost";
        break;
      }
      if (!session.is_continuation(d) && !decision::validate_feasibility(d, scene).feasible) {
        d.path = PathDecision::follow_lane;
        ++run.infeasible_replaced;
      }
      session.set_decision(d, scene);
    }

    if (opt.log && step % static_cast<std::uint64_t>(opt.log_every) == 0) run.log->frames.push_back(data::frame_of(w));

    sim::ControlSignal u;
    try {
      try {
        u = session.control(scene, w.ego);
      } catch (const motion::InfeasibleDecision &) {
        session.set_decision({PathDecision::follow_lane, session.decision().speed}, scene);
        ++run.infeasible_replaced;
        u = session.control(scene, w.ego);
      }
    } catch (const motion::TrackingLost &) {
      if (cfg.regime == Regime::mpi) {
        takeover(w);
        continue;
      }
      ++run.result.takeovers;
      termination = "tracking_lost";
      break;
    }

    auto next = sim.step(w, u, cfg.dt);
    const auto infractions = sim::detect_infractions(w, next, map, sc);
    bool relocated = false;
    for (const auto & i : infractions) run.result.infractions.push_back(i);
    progress.update(next.ego.pose.position());
    stopped_for = next.ego.speed < 0.1 ? stopped_for + cfg.dt : 0.0;
    if (cfg.regime == Regime::mpi && (!infractions.empty() || stopped_for >= cfg.blocked_limit)) {
      takeover(next);
      relocated = true;
    }

    run.steps = step + 1;
    if (opt.trace) {
      ordered_json r;
      r["step"] = step + 1;
      r["t"] = io::quantize(next.time);
      r["x"] = io::quantize(next.ego.pose.x);
      r["y"] = io::quantize(next.ego.pose.y);
      r["heading"] = io::quantize(next.ego.pose.heading);
      r["speed"] = io::quantize(next.ego.speed);
      r["lane"] = next.ego.lane_id ? ordered_json(*next.ego.lane_id) : ordered_json(nullptr);
      r["decision"] = decision::render_decision(session.decision());
      r["steer"] = io::quantize(u.steer);
      r["accel"] = io::quantize(u.accel);
      r["infractions"] = ordered_json::array();
      for (const auto & i : infractions) r["infractions"].push_back(infraction_row(i));
      if (relocated) r["takeover"] = true;
      trace << r.dump() << "\n";
    }
    w = std::move(next);

    if (progress.done()) {
      termination = "completed";
      break;
    }
    if (w.time >= timeout) {
      termination = "timeout";
      if (cfg.regime == Regime::mpi) {
        // the route must be finished: a driver takes over for the rest
        ++run.result.takeovers;
        termination = "finished_by_takeover";
      }
      break;
    }
    if (cfg.regime == Regime::ds && stopped_for >= cfg.blocked_limit) {
      termination = "blocked";
      break;
    }
  }

  run.duration = static_cast<double>(run.steps) * cfg.dt;
  run.result.completed = termination == "finished_by_takeover" ? progress.length()
                                                               : std::min(progress.completed(), progress.length());
  run.result.termination = termination;
  run.result.terminated_early = termination != "completed" && termination != "finished_by_takeover";
  run.stats = planner.stats();
  if (opt.trace) {
    ordered_json f;
    f["type"] = "result";
    f["steps"] = run.steps;
    f["duration"] = io::quantize(run.duration);
    f["result"] = run.result.to_json();
    f["protocol"] = run.stats.to_json();
    f["infeasible_replaced"] = run.infeasible_replaced;
    trace << f.dump() << "\n";
    run.trace = trace.str();
  }
  return run;
}

namespace {

std::vector<RouteRun> run_all(const RunContext & ctx, const RouteOptions & opt) {
  std::vector<std::pair<std::size_t, int>> jobs;
  for (std::size_t s = 0; s < ctx.scenarios.size(); ++s) {
    for (int k = 0; k < ctx.cfg.routes_per_scenario; ++k) jobs.emplace_back(s, k);
  }
  std::vector<RouteRun> runs(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        auto planner = make_planner(ctx.cfg);
        runs[i] = run_route(ctx, jobs[i].first, jobs[i].second, *planner, opt);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(ctx.cfg.jobs, static_cast<int>(jobs.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto & t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::sort(runs.begin(), runs.end(), [](const RouteRun & a, const RouteRun & b) { return a.route_id < b.route_id; });
  return runs;
}

std::string file_name(std::string id) {
  std::replace(id.begin(), id.end(), '/', '_');
  return id;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

ClosedLoopReport run_closed_loop(const RunContext & ctx, const RouteOptions & opt) {
  ClosedLoopReport rep;
  rep.cfg = ctx.cfg;
  rep.penalties = ctx.penalties;
  rep.routes = run_all(ctx, opt);
  std::vector<metrics::RouteResult> results;
  for (const auto & r : rep.routes) {
    results.push_back(r.result);
    rep.totals += r.stats;
  }
  rep.metrics = metrics::driving_score(results, ctx.penalties);
  return rep;
}

ordered_json ClosedLoopReport::to_json() const {
  ordered_json j;
  j["format_version"] = 1;
  j["type"] = "closed_loop_report";
  j["config"] = cfg.to_json();
  j["penalty_table"] = penalties.to_json();
  ordered_json m;
  m["ds"] = metrics.ds;
  m["rc"] = metrics.rc;
  m["is"] = metrics.is;
  m["mpi"] = {{"miles", metrics.mpi.miles},
              {"takeovers", metrics.mpi.takeovers},
              {"value", metrics.mpi.value},
              {"no_intervention", metrics.mpi.no_intervention}};
  j["metrics"] = m;
  j["routes"] = ordered_json::array();
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto & r = routes[i];
    const auto & rm = metrics.routes[i];
    ordered_json e;
    e["route_id"] = r.route_id;
    e["scenario_id"] = r.scenario_id;
    e["seed"] = r.seed;
    e["route_length_m"] = io::quantize(r.result.length);
    e["rc"] = rm.rc;
    e["is"] = rm.is;
    e["ds"] = rm.ds;
    e["steps"] = r.steps;
    e["duration"] = io::quantize(r.duration);
    e["infeasible_replaced"] = r.infeasible_replaced;
    e["result"] = r.result.to_json();
    e["protocol"] = r.stats.to_json();
    j["routes"].push_back(e);
  }
  j["protocol_totals"] = totals.to_json();
  return j;
}

std::string ClosedLoopReport::text() const {
  std::ostringstream o;
  o << "planner " << cfg.planner << "  regime " << to_string(cfg.regime) << "  seed " << cfg.seed << "\n";
  o << "route                                  len_m    rc      is     ds      takeovers  infractions  end\n";
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto & r = routes[i];
    const auto & rm = metrics.routes[i];
    std::string id = r.route_id;
    id.resize(std::max<std::size_t>(id.size(), 38), ' ');
    o << id << " " << fixed(r.result.length, 1) << "  " << fixed(rm.rc, 2) << "  " << fixed(rm.is, 3) << "  "
      << fixed(rm.ds, 2) << "  " << r.result.takeovers << "  " << r.result.infractions.size() << "  "
      << r.result.termination << "\n";
  }
  o << "DS " << fixed(metrics.ds, 3) << "  RC " << fixed(metrics.rc, 3) << "  IS " << fixed(metrics.is, 4) << "  MPI "
    << fixed(metrics.mpi.value, 4) << (metrics.mpi.no_intervention ? " (no intervention, total miles)" : "") << "\n";
  o << "protocol: requests " << totals.requests << " ok " << totals.ok << " parse_failures " << totals.parse_failures
    << " timeouts " << totals.timeouts << " fallbacks " << totals.fallbacks << "\n";
  return o.str();
}

void write_closed_loop(const ClosedLoopReport & report, const std::filesystem::path & dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  io::write_text_file(dir / "report.json", report.to_json().dump(2) + "\n");
  io::write_text_file(dir / "report.txt", report.text());
  bool any = false;
  for (const auto & r : report.routes) any = any || !r.trace.empty();
  if (!any) return;
  std::filesystem::create_directories(dir / "traces", ec);
  if (ec) throw std::runtime_error("cannot create " + (dir / "traces").string() + ": " + ec.message());
  for (const auto & r : report.routes) io::write_text_file(dir / "traces" / (file_name(r.route_id) + ".jsonl"), r.trace);
}

// ---- open loop ----

std::vector<DatasetRecord> load_dataset(const std::filesystem::path & path, std::size_t & skipped) {
  std::istringstream in(io::read_text_file(path));
  std::vector<DatasetRecord> out;
  skipped = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      constexpr std::string_view ctx = "dataset record";
      DatasetRecord r;
      r.scenario_id = io::get_required<std::string>(j, "scenario_id", ctx);
      r.episode_id = io::get_required<std::string>(j, "episode_id", ctx);
      r.time = io::get_required<double>(j, "time", ctx);
      r.scene = sim::SceneDescription::from_json(j.at("scene"));
      r.navigation = decision::navigation_from_string(io::get_required<std::string>(j, "navigation_command", ctx));
      if (j.contains("instruction")) r.instruction = io::get_required<std::string>(j, "instruction", ctx);
      r.decision = decision::parse_decision(io::get_required<std::string>(j, "decision", ctx));
      r.explanation = io::get_required<std::string>(j, "explanation", ctx);
      out.push_back(std::move(r));
    } catch (const std::exception &) {
      ++skipped;
    }
  }
  return out;
}

metrics::OpenLoopResult run_open_loop(std::span<const DatasetRecord> records, protocol::Planner & planner,
                                      const std::string & system_message,
                                      std::vector<decision::DecisionResponse> * predictions) {
  if (records.empty()) throw std::invalid_argument("dataset has no records");
  std::vector<DecisionPair> pred, truth;
  std::vector<std::string> cands;
  std::vector<std::vector<std::string>> refs;
  std::string episode;
  std::uint64_t id = 0;
  for (const auto & r : records) {
    if (r.episode_id != episode) {
      planner.reset();
      episode = r.episode_id;
      id = 0;
    }
    protocol::PlannerRequest req;
    req.id = ++id;
    req.system_message = system_message;
    req.scene = r.scene;
    req.navigation = r.navigation;
    req.user_instruction = r.instruction;
    const auto resp = planner.decide(req);
    if (predictions) predictions->push_back(resp);
    pred.push_back(resp.decision);
    truth.push_back(r.decision);
    cands.push_back(resp.explanation);
    refs.push_back({r.explanation});
  }
  metrics::OpenLoopResult out;
  out.decisions = metrics::decision_metrics(pred, truth);
  out.bleu4 = metrics::corpus_bleu4(cands, refs);
  try {
    out.cider = metrics::corpus_cider(cands, refs);
  } catch (const std::invalid_argument &) {
    out.cider.reset();
  }
  return out;
}

namespace {

class EchoPlanner : public protocol::Planner {
 public:
  explicit EchoPlanner(std::span<const DatasetRecord> records) : records_(records) {}
  decision::DecisionResponse decide(const protocol::PlannerRequest &) override {
    if (next_ >= records_.size()) throw std::out_of_range("echo planner ran past the dataset");
    const auto & r = records_[next_++];
    return {r.decision, r.explanation};
  }
  std::string name() const override { return "annotations"; }

 private:
  std::span<const DatasetRecord> records_;
  std::size_t next_ = 0;
};

}  // namespace

std::unique_ptr<protocol::Planner> make_echo_planner(std::span<const DatasetRecord> records) {
  return std::make_unique<EchoPlanner>(records);
}

// ---- data generation ----

GenDataResult gen_data(const RunContext & ctx, const GenDataOptions & opt) {
  RouteOptions ro;
  ro.trace = false;
  ro.log = true;
  const auto runs = run_all(ctx, ro);
  const auto & dir = ctx.cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir / "logs", ec);
  if (ec) throw std::runtime_error("cannot create " + (dir / "logs").string() + ": " + ec.message());

  std::map<std::string, std::size_t> scenario_index;
  for (std::size_t i = 0; i < ctx.scenarios.size(); ++i) scenario_index[ctx.scenarios[i].id] = i;

  GenDataResult out;
  std::vector<data::AnnotatedFrame> frames;
  for (const auto & r : runs) {
    GenDataLog g;
    g.episode_id = r.route_id;
    g.frames = r.log->frames.size();
    g.infractions = r.result.infractions.size();
    g.flagged = !r.result.infractions.empty() || r.result.terminated_early;
    r.log->save(dir / "logs" / (file_name(r.route_id) + ".jsonl"));
    if (!(opt.safe_only && g.flagged) && r.log->frames.size() >= 2) {
      auto ann = data::annotate_decisions(*r.log, ctx.maps.at(scenario_index.at(r.scenario_id)), opt.annotation);
      out.unlabelable += ann.unlabelable;
      out.explanation_fallbacks += ann.explanation_fallbacks;
      for (auto & f : ann.frames) frames.push_back(std::move(f));
      g.exported = true;
    }
    out.logs.push_back(g);
  }
  if (frames.empty()) throw std::runtime_error("no frames left to export");
  out.dataset = data::export_dataset(frames, opt.split, dir / "dataset");

  ordered_json summary;
  summary["format_version"] = 1;
  summary["type"] = "gen_data";
  summary["config"] = ctx.cfg.to_json();
  summary["safe_only"] = opt.safe_only;
  summary["unlabelable"] = out.unlabelable;
  summary["explanation_fallbacks"] = out.explanation_fallbacks;
  summary["logs"] = ordered_json::array();
  for (const auto & g : out.logs) {
    summary["logs"].push_back({{"episode_id", g.episode_id},
                               {"frames", g.frames},
                               {"infractions", g.infractions},
                               {"flagged", g.flagged},
                               {"exported", g.exported}});
  }
  io::write_text_file(dir / "gen_data.json", summary.dump(2) + "\n");
  return out;
}

// ---- replay ----

ReplaySummary replay_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trace: empty");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception & e) {
    throw FormatError(std::string("trace: bad header: ") + e.what());
  }
  if (!header.is_object() || header.value("type", "") != "trace") throw FormatError("trace: first line is not a trace header");
  const int version = header.value("format_version", -1);
  if (version != kTraceVersion) {
    throw FormatError("trace: format_version " + std::to_string(version) + " is not supported, expected " +
                      std::to_string(kTraceVersion));
  }
  ReplaySummary out;
  out.route_id = io::get_required<std::string>(header, "route_id", "trace header");
  const auto penalties = metrics::PenaltyTable::from_json(header.at("penalty_table"));
  std::vector<sim::Infraction> infractions;
  bool have_result = false;
  std::ostringstream csv;
  csv << "t,x,y,speed\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception & e) {
      throw FormatError(std::string("trace: bad row: ") + e.what());
    }
    if (row.value("type", "") == "result") {
      out.result = metrics::RouteResult::from_json(row.at("result"));
      have_result = true;
      continue;
    }
    std::ostringstream o;
    const double t = io::get_required<double>(row, "t", "trace row");
    const double x = io::get_required<double>(row, "x", "trace row");
    const double y = io::get_required<double>(row, "y", "trace row");
    const double v = io::get_required<double>(row, "speed", "trace row");
    o << fixed(t, 2) << "  x " << fixed(x, 2) << "  y " << fixed(y, 2) << "  v " << fixed(v, 2) << "  "
      << io::get_required<std::string>(row, "decision", "trace row");
    bool collision = false;
    for (const auto & i : row.at("infractions")) {
      sim::Infraction inf;
      inf.kind = sim::infraction_kind_from_string(i.at("kind").get<std::string>());
      inf.time = i.at("time").get<double>();
      inf.position = {i.at("x").get<double>(), i.at("y").get<double>()};
      inf.detail = i.value("detail", "");
      collision = collision || is_collision(inf.kind);
      o << "  ! " << sim::to_string(inf.kind) << (inf.detail.empty() ? "" : " (" + inf.detail + ")");
      infractions.push_back(inf);
    }
    if (row.value("takeover", false)) o << "  takeover";
    if (collision) ++out.collision_rows;
    out.timeline.push_back(o.str());
    csv << fixed(t, 3) << "," << fixed(x, 3) << "," << fixed(y, 3) << "," << fixed(v, 3) << "\n";
  }
  if (!have_result) throw FormatError("trace: missing result line");
  out.result.infractions = infractions;
  const std::vector<metrics::RouteResult> one = {out.result};
  out.metrics = metrics::driving_score(one, penalties).routes.front();
  out.plot_csv = csv.str();
  return out;
}

}  // namespace drivebench::harness
