#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drivebench/decision.hpp"
#include "drivebench/explanation.hpp"
#include "drivebench/map.hpp"
#include "drivebench/perception.hpp"
#include "drivebench/world.hpp"

namespace drivebench::data {

struct LogFrame {
  double time = 0.0;
  sim::ActorState ego;  // lane_id set while the ego is on the map
  std::vector<sim::ActorState> actors;
  std::map<std::string, sim::LightState> lights;
  std::optional<std::string> instruction;
};

/// Expert driving log. Stored as JSON lines: a header line, then one line
/// per frame.
struct DrivingLog {
  static constexpr int kFormatVersion = 1;

  std::string scenario_id;
  std::string episode_id;  // unique per recorded run, e.g. "<scenario>/seed3"
  std::string map_id;
  std::vector<std::string> route;
  std::vector<LogFrame> frames;

  /// >= 2 frames with strictly increasing times.
  void validate() const;
  std::string to_jsonl() const;
  static DrivingLog from_jsonl(std::string_view text);
  void save(const std::filesystem::path & path) const;
  static DrivingLog load(const std::filesystem::path & path);
};

/// Log frame recorded from a simulator state.
LogFrame frame_of(const sim::WorldState & world);

/// World snapshot for perception. Only the fields perception reads are set.
sim::WorldState world_of(const LogFrame & frame);

struct AnnotationConfig {
  double accel_threshold = 0.5;         // m/s^2
  double stop_speed = 0.3;              // m/s
  double lateral_threshold = 0.5;       // m off the lane center that still counts as maneuvering
  double lateral_speed_threshold = 0.1; // m/s toward the target side
  int smoothing_window = 5;             // frames, centered
  double perception_range = 150.0;

  void validate() const;
  static AnnotationConfig from_json(const json & j);
};

struct AnnotatedFrame {
  std::string scenario_id;
  std::string episode_id;
  double time = 0.0;
  decision::DecisionPair decision;
  std::string explanation;
  sim::SceneDescription scene;
  decision::NavigationCommand navigation = decision::NavigationCommand::follow_lane;
  std::optional<std::string> instruction;
  explain::Cause cause = explain::Cause::clear_road;
  bool explanation_fallback = false;
};

struct AnnotationResult {
  std::vector<AnnotatedFrame> frames;
  std::size_t unlabelable = 0;           // off-map frames, excluded
  std::size_t explanation_fallbacks = 0;
};

/// Frame labels from the trajectory alone: speed from the smoothed
/// longitudinal acceleration, path from lane transitions. Explanations are
/// filled by generate_explanation.
AnnotationResult annotate_decisions(const DrivingLog & log, const sim::LaneMap & map, const AnnotationConfig & cfg = {});

/// Per-frame speed labels from speeds and times (exposed for tests).
std::vector<decision::SpeedDecision> label_speeds(std::span<const double> times, std::span<const double> speeds,
                                                  const AnnotationConfig & cfg);

/// What in the scene the labelled decision responds to.
explain::Cause infer_cause(const sim::SceneDescription & scene, const decision::DecisionPair & d,
                           decision::NavigationCommand nav);

struct ExplanationContext {
  std::string scenario_id;
  decision::NavigationCommand navigation = decision::NavigationCommand::follow_lane;
  std::optional<std::string> instruction;
};

/// Template text for the frame with slots (side, actor, distance, light)
/// filled from its scene. Unknown combinations give the generic text with
/// fallback set.
explain::Explanation generate_explanation(const AnnotatedFrame & frame, const ExplanationContext & ctx);

struct SplitConfig {
  double train_fraction = 0.8;

  void validate() const;
};

struct ExportSummary {
  std::size_t train_records = 0;
  std::size_t val_records = 0;
  std::vector<std::string> train_scenarios;
  std::vector<std::string> val_scenarios;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view s);

/// One JSON object per frame, in the documented field order.
ordered_json record_json(const AnnotatedFrame & f);

/// Writes train.jsonl, val.jsonl and manifest.json into `dir`. Scenarios
/// are ordered by the hash of their id and whole scenarios go to train until
/// its share is as close to `train_fraction` as possible. Records are sorted
/// by (scenario, episode, time). Throws when `dir` cannot be written.
ExportSummary export_dataset(std::span<const AnnotatedFrame> frames, const SplitConfig & split,
                             const std::filesystem::path & dir);

}  // namespace drivebench::data
