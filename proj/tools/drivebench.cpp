// drivebench command line: closed-loop runs, open-loop evaluation, data
// generation and trace replay.
//
// Exit codes: 0 finished with a report, 1 bad configuration or input,
// 2 aborted at run time.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "drivebench/harness.hpp"
#include "drivebench/protocol.hpp"

using namespace drivebench;
using harness::ConfigError;

namespace {

struct CommonFlags {
  std::string config;
  std::string maps;
  std::vector<std::string> scenarios;
  int routes = 1;
  std::string planner = "fsm";
  std::uint64_t seed = 1;
  int decision_period = 10;
  double dt = 0.05;
  std::string penalties;
  std::string fsm_config;
  std::string motion_config;
  std::string output;
  std::string regime = "ds";
  double planner_timeout = 2.0;
  std::string fallback = "fsm";
  int jobs = 1;
};

void add_planner_flags(CLI::App * cmd, CommonFlags & f) {
  cmd->add_option("--planner", f.planner, "fsm | mock:FILE | external:stdio:CMD | external:socket:PATH");
  cmd->add_option("--planner-timeout", f.planner_timeout, "seconds to wait for each reply");
  cmd->add_option("--fallback", f.fallback, "fallback on timeouts and bad replies: fsm | stop");
  cmd->add_option("--fsm-config", f.fsm_config, "rule-based planner config (JSON)");
}

void add_run_flags(CLI::App * cmd, CommonFlags & f) {
  cmd->add_option("--config", f.config, "run config file; its fields override flags");
  cmd->add_option("--maps", f.maps, "directory holding <map id>.json");
  cmd->add_option("--scenario", f.scenarios, "scenario file (repeatable)");
  cmd->add_option("--routes", f.routes, "routes per scenario");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--decision-period", f.decision_period, "simulation steps between decisions");
  cmd->add_option("--dt", f.dt, "simulation step in seconds");
  cmd->add_option("--penalties", f.penalties, "penalty table (JSON)");
  cmd->add_option("--motion-config", f.motion_config, "motion planner config (JSON)");
  cmd->add_option("--output", f.output, "output directory (default: $DRIVEBENCH_OUTPUT_DIR or ./drivebench-out)");
  cmd->add_option("--regime", f.regime, "ds: routes end on failure; mpi: takeovers until the route is done");
  cmd->add_option("--jobs", f.jobs, "routes run in parallel");
  add_planner_flags(cmd, f);
}

std::filesystem::path default_output() {
  if (const char * env = std::getenv("DRIVEBENCH_OUTPUT_DIR"); env && *env) return env;
  return "drivebench-out";
}

// config file fields that shadow flags given on the command line
void warn_shadowed(const CLI::App * cmd, const json & doc) {
  for (const auto & [key, value] : doc.items()) {
    std::string flag = "--" + key;
    for (auto & ch : flag) ch = ch == '_' ? '-' : ch;
    if (key == "routes_per_scenario") flag = "--routes";
    if (key == "scenarios") flag = "--scenario";
    if (key == "maps_dir") flag = "--maps";
    if (key == "penalty_table") flag = "--penalties";
    if (key == "output_dir") flag = "--output";
    if (cmd->get_option_no_throw(flag) && cmd->count(flag) > 0) {
      std::cerr << "drivebench: warning: " << key << " from the config file overrides " << flag << "\n";
    }
  }
}

harness::RunConfig build_config(const CommonFlags & f, const CLI::App * cmd) {
  harness::RunConfig c;
  c.maps_dir = f.maps.empty() ? std::filesystem::path(DRIVEBENCH_DEFAULT_MAPS) : std::filesystem::path(f.maps);
  for (const auto & s : f.scenarios) c.scenarios.emplace_back(s);
  c.routes_per_scenario = f.routes;
  c.planner = f.planner;
  c.seed = f.seed;
  c.decision_period = f.decision_period;
  c.dt = f.dt;
  if (!f.penalties.empty()) c.penalty_table = f.penalties;
  if (!f.fsm_config.empty()) c.fsm_config = f.fsm_config;
  if (!f.motion_config.empty()) c.motion_config = f.motion_config;
  c.output_dir = f.output.empty() ? default_output() : std::filesystem::path(f.output);
  c.regime = harness::regime_from_string(f.regime);
  c.planner_timeout = f.planner_timeout;
  try {
    c.fallback = protocol::fallback_from_string(f.fallback);
  } catch (const std::invalid_argument & e) {
    throw ConfigError(e.what());
  }
  c.jobs = f.jobs;
  if (!f.config.empty()) {
    json doc;
    try {
      doc = io::read_json_file(f.config);
    } catch (const std::exception & e) {
      throw ConfigError(e.what());
    }
    warn_shadowed(cmd, doc);
    c = harness::RunConfig::from_json(doc, c, std::filesystem::path(f.config).parent_path());
  }
  c.validate();
  return c;
}

int closed_loop(const CommonFlags & f, const CLI::App * cmd, bool no_traces) {
  const auto ctx = harness::RunContext::load(build_config(f, cmd));
  harness::RouteOptions opt;
  opt.trace = !no_traces;
  const auto report = harness::run_closed_loop(ctx, opt);
  harness::write_closed_loop(report, ctx.cfg.output_dir);
  std::cout << report.text();
  std::cout << "report written to " << (ctx.cfg.output_dir / "report.json").string() << "\n";
  return 0;
}

int open_loop(const CommonFlags & f, const std::string & dataset) {
  std::size_t skipped = 0;
  std::vector<harness::DatasetRecord> records;
  try {
    records = harness::load_dataset(dataset, skipped);
  } catch (const std::exception & e) {
    throw ConfigError(e.what());
  }
  if (records.empty()) throw ConfigError("dataset " + dataset + " has no usable records");
  std::unique_ptr<protocol::Planner> planner;
  if (f.planner == "annotations") {
    planner = harness::make_echo_planner(records);
  } else {
    harness::RunConfig c;
    c.planner = f.planner;
    c.planner_timeout = f.planner_timeout;
    if (!f.fsm_config.empty()) c.fsm_config = f.fsm_config;
    try {
      c.fallback = protocol::fallback_from_string(f.fallback);
    } catch (const std::invalid_argument & e) {
      throw ConfigError(e.what());
    }
    planner = harness::make_planner(c);
  }
  auto result = harness::run_open_loop(records, *planner, decision::build_system_message().text());
  result.skipped = skipped;

  ordered_json rep;
  rep["format_version"] = 1;
  rep["type"] = "open_loop_report";
  rep["dataset"] = dataset;
  rep["planner"] = f.planner;
  rep["result"] = result.to_json();
  rep["protocol"] = planner->stats().to_json();
  const auto out = f.output.empty() ? default_output() : std::filesystem::path(f.output);
  std::filesystem::create_directories(out);
  io::write_text_file(out / "open_loop_report.json", rep.dump(2) + "\n");

  std::cout << "records " << records.size() << " skipped " << skipped << "\n";
  std::cout << "accuracy " << result.decisions.accuracy << "  BLEU-4 " << result.bleu4 << "  CIDEr "
            << (result.cider ? std::to_string(*result.cider) : std::string("n/a")) << "\n";
  for (const auto * group : {&result.decisions.path_merged, &result.decisions.speed}) {
    for (const auto & c : *group) {
      const auto f1 = c.f1();
      std::cout << "  F1 " << c.name << " " << (f1 ? std::to_string(*f1) : std::string("n/a")) << "\n";
    }
  }
  std::cout << "report written to " << (out / "open_loop_report.json").string() << "\n";
  return 0;
}

int generate(const CommonFlags & f, const CLI::App * cmd, bool safe_only, double train_fraction) {
  const auto ctx = harness::RunContext::load(build_config(f, cmd));
  harness::GenDataOptions opt;
  opt.safe_only = safe_only;
  opt.split.train_fraction = train_fraction;
  try {
    opt.split.validate();
  } catch (const std::exception & e) {
    throw ConfigError(e.what());
  }
  const auto r = harness::gen_data(ctx, opt);
  std::size_t flagged = 0, exported = 0;
  for (const auto & l : r.logs) {
    flagged += l.flagged;
    exported += l.exported;
  }
  std::cout << "logs " << r.logs.size() << " flagged " << flagged << " exported " << exported << "\n";
  std::cout << "train " << r.dataset.train_records << " val " << r.dataset.val_records << " unlabelable "
            << r.unlabelable << " explanation fallbacks " << r.explanation_fallbacks << "\n";
  std::cout << "dataset written to " << (ctx.cfg.output_dir / "dataset").string() << "\n";
  return 0;
}

int replay(const std::string & trace_path, const std::string & plot) {
  harness::ReplaySummary s;
  try {
    s = harness::replay_trace(io::read_text_file(trace_path));
  } catch (const std::exception & e) {
    throw ConfigError(e.what());
  }
  std::cout << "route " << s.route_id << "\n";
  for (const auto & row : s.timeline) std::cout << row << "\n";
  std::cout << "steps " << s.timeline.size() << "  collisions " << s.collision_rows << "  infractions "
            << s.result.infractions.size() << "  takeovers " << s.result.takeovers << "\n";
  std::cout << "RC " << s.metrics.rc << "  IS " << s.metrics.is << "  DS " << s.metrics.ds << "\n";
  if (!plot.empty()) io::write_text_file(plot, s.plot_csv);
  return 0;
}

}  // namespace

int main(int argc, char ** argv) {
  CLI::App app{"drivebench: closed- and open-loop evaluation of driving decision planners"};
  app.require_subcommand(1);

  CommonFlags closed;
  bool no_traces = false;
  auto * cl = app.add_subcommand("run-closed-loop", "drive every route and score DS, RC, IS and MPI");
  add_run_flags(cl, closed);
  cl->add_flag("--no-traces", no_traces, "skip per-route trace files");

  CommonFlags open;
  std::string dataset;
  auto * ol = app.add_subcommand("run-open-loop", "score decisions and explanations against a dataset");
  ol->add_option("--dataset", dataset, "dataset JSON lines (e.g. val.jsonl)")->required();
  ol->add_option("--output", open.output, "output directory");
  add_planner_flags(ol, open);
  ol->get_option("--planner")->description("fsm | mock:FILE | external:... | annotations (echo the dataset)");

  CommonFlags gen;
  bool safe_only = false;
  double train_fraction = 0.8;
  auto * gd = app.add_subcommand("gen-data", "record expert logs, annotate them and export a dataset");
  add_run_flags(gd, gen);
  gd->add_flag("--safe-only", safe_only, "leave logs with infractions out of the dataset");
  gd->add_option("--train-fraction", train_fraction, "share of frames in the train split");

  std::string trace_path, plot;
  auto * rp = app.add_subcommand("replay", "print the timeline and metrics of a trace");
  rp->add_option("trace", trace_path, "trace file")->required();
  rp->add_option("--plot-data", plot, "write t,x,y,speed CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cl) return closed_loop(closed, cl, no_traces);
    if (*ol) return open_loop(open, dataset);
    if (*gd) return generate(gen, gd, safe_only, train_fraction);
    if (*rp) return replay(trace_path, plot);
  } catch (const ConfigError & e) {
    std::cerr << "drivebench: " << e.what() << "\n";
    return 1;
  } catch (const std::exception & e) {
    std::cerr << "drivebench: aborted: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
