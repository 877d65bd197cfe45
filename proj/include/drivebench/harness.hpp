#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drivebench/data.hpp"
#include "drivebench/fsm.hpp"
#include "drivebench/metrics.hpp"
#include "drivebench/motion.hpp"
#include "drivebench/planner.hpp"
#include "drivebench/scenario.hpp"
#include "drivebench/simulator.hpp"

namespace drivebench::harness {

/// Bad flags, config files or planner specs (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ds: a route ends on completion, timeout, blocking or lost tracking.
/// mpi: every infraction or stall relocates the ego ahead (a takeover) and
/// the route runs to completion or timeout.
enum class Regime { ds, mpi };
std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);

struct RunConfig {
  std::filesystem::path maps_dir;
  std::vector<std::filesystem::path> scenarios;  // scenario files
  int routes_per_scenario = 1;
  std::string planner = "fsm";  // fsm | mock:FILE | external:stdio:CMD | external:socket:PATH
  std::uint64_t seed = 1;
  int decision_period = 10;  // simulation steps
  double dt = 0.05;
  std::optional<std::filesystem::path> penalty_table;
  std::optional<std::filesystem::path> fsm_config;
  std::optional<std::filesystem::path> motion_config;
  std::filesystem::path output_dir;
  Regime regime = Regime::ds;
  double planner_timeout = 2.0;
  protocol::FallbackPolicy fallback = protocol::FallbackPolicy::fsm;
  double blocked_limit = 90.0;     // s at standstill before the route counts as blocked
  double relocation_ahead = 10.0;  // m past the route progress for a takeover
  double perception_range = 150.0;
  int jobs = 1;
  bool write_traces = true;

  /// Throws ConfigError.
  void validate() const;
  ordered_json to_json() const;
  /// Fields present in `j` replace those of `base`. Relative paths resolve
  /// against `base_dir`.
  static RunConfig from_json(const json & j, RunConfig base, const std::filesystem::path & base_dir);
};

/// Route seed from the run seed, scenario id and route index.
std::uint64_t route_seed(std::uint64_t seed, std::string_view scenario_id, int index);

/// Planner for one route. Throws ConfigError for an unknown spec.
std::unique_ptr<protocol::Planner> make_planner(const RunConfig & cfg);

/// Everything a route needs, loaded once per run.
struct RunContext {
  RunConfig cfg;
  std::vector<sim::ScenarioSpec> scenarios;
  std::vector<sim::LaneMap> maps;  // per scenario, overrides applied
  metrics::PenaltyTable penalties = metrics::PenaltyTable::defaults();
  fsm::FsmConfig fsm;
  motion::PlannerConfig motion;
  sim::SimConfig sim;
  std::string system_message;

  /// Loads and validates every input. Throws ConfigError.
  static RunContext load(const RunConfig & cfg);
};

struct RouteRun {
  std::string route_id;  // "<scenario>/<index>"
  std::string scenario_id;
  std::uint64_t seed = 0;
  metrics::RouteResult result;
  protocol::ProtocolStats stats;
  int infeasible_replaced = 0;
  std::uint64_t steps = 0;
  double duration = 0.0;
  std::string trace;                     // JSON lines, empty unless requested
  std::optional<data::DrivingLog> log;   // 10 Hz log, when requested
};

struct RouteOptions {
  bool trace = true;
  bool log = false;
  int log_every = 2;  // steps between log frames
};

RouteRun run_route(const RunContext & ctx, std::size_t scenario, int index, protocol::Planner & planner,
                   const RouteOptions & opt = {});

struct ClosedLoopReport {
  RunConfig cfg;
  std::vector<RouteRun> routes;  // sorted by route id
  metrics::EpisodeMetrics metrics;
  protocol::ProtocolStats totals;
  metrics::PenaltyTable penalties = metrics::PenaltyTable::defaults();

  ordered_json to_json() const;
  /// Human-readable table.
  std::string text() const;
};

/// Runs every route (in parallel when cfg.jobs > 1) and aggregates in
/// route id order.
ClosedLoopReport run_closed_loop(const RunContext & ctx, const RouteOptions & opt = {});

/// report.json, report.txt and traces/<route>.jsonl.
void write_closed_loop(const ClosedLoopReport & report, const std::filesystem::path & dir);

// ---- open loop ----

struct DatasetRecord {
  std::string scenario_id;
  std::string episode_id;
  double time = 0.0;
  sim::SceneDescription scene;
  decision::NavigationCommand navigation = decision::NavigationCommand::follow_lane;
  std::optional<std::string> instruction;
  decision::DecisionPair decision;
  std::string explanation;
};

/// Parses a dataset JSON-lines file. Malformed lines are skipped and counted.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path & path, std::size_t & skipped);

/// Queries the planner once per record, resetting it at each new episode.
metrics::OpenLoopResult run_open_loop(std::span<const DatasetRecord> records, protocol::Planner & planner,
                                      const std::string & system_message,
                                      std::vector<decision::DecisionResponse> * predictions = nullptr);

/// Answers the i-th request of a run with the i-th record's annotation.
/// Sanity check for the open-loop pipeline.
std::unique_ptr<protocol::Planner> make_echo_planner(std::span<const DatasetRecord> records);

// ---- data generation ----

struct GenDataOptions {
  bool safe_only = false;
  data::SplitConfig split;
  data::AnnotationConfig annotation;
};

struct GenDataLog {
  std::string episode_id;
  std::size_t frames = 0;
  std::size_t infractions = 0;
  bool flagged = false;   // the expert committed an infraction or did not finish
  bool exported = false;
};

struct GenDataResult {
  std::vector<GenDataLog> logs;
  data::ExportSummary dataset;
  std::size_t unlabelable = 0;
  std::size_t explanation_fallbacks = 0;
};

/// Runs the expert closed loop, writes logs/ and dataset/ under the output
/// directory.
GenDataResult gen_data(const RunContext & ctx, const GenDataOptions & opt);

// ---- replay ----

inline constexpr int kTraceVersion = 1;

struct ReplaySummary {
  std::string route_id;
  std::vector<std::string> timeline;  // one row per step
  std::size_t collision_rows = 0;
  metrics::RouteResult result;        // infractions rebuilt from the step rows
  metrics::RouteMetrics metrics;
  std::string plot_csv;               // t,x,y,speed per step
};

/// Throws FormatError, naming the expected version on a mismatch.
ReplaySummary replay_trace(std::string_view trace_text);

}  // namespace drivebench::harness
