#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drivebench/decision.hpp"
#include "drivebench/json_io.hpp"
#include "drivebench/map.hpp"
#include "drivebench/world.hpp"

namespace drivebench::metrics {

inline constexpr double kMilesPerMeter = 0.000621371;

struct RouteResult {
  std::string route_id;
  double length = 0.0;     // meters along the route
  double completed = 0.0;  // meters, projected onto the route
  std::vector<sim::Infraction> infractions;
  int takeovers = 0;
  bool terminated_early = false;
  std::string termination;  // "completed", "timeout", "blocked", "connection_lost", ...

  /// 0 <= completed <= length, takeovers >= 0. Throws std::invalid_argument.
  void validate() const;
  ordered_json to_json() const;
  static RouteResult from_json(const json & j);
};

class PenaltyTable {
 public:
  /// pedestrian 0.50, vehicle 0.60, static 0.65, red light 0.70, stop sign
  /// 0.80, double solid 0.80, failed yield 0.80.
  static PenaltyTable defaults();
  /// Every kind must be present with a coefficient in (0, 1].
  static PenaltyTable from_json(const json & j);
  static PenaltyTable load(const std::filesystem::path & path);

  double coefficient(sim::InfractionKind k) const;
  void set(sim::InfractionKind k, double c);
  ordered_json to_json() const;

 private:
  std::map<sim::InfractionKind, double> coeff_;
};

/// Percentage of the route completed. Throws std::invalid_argument for a
/// route of zero length.
double route_completion(const RouteResult & r);

/// Product of the coefficients; 1 for no infractions.
double infraction_score(std::span<const sim::Infraction> infractions, const PenaltyTable & table);
double infraction_score(std::span<const sim::InfractionKind> kinds, const PenaltyTable & table);

struct RouteMetrics {
  std::string route_id;
  double rc = 0.0;
  double is = 1.0;
  double ds = 0.0;
};

struct MpiResult {
  double miles = 0.0;
  int takeovers = 0;
  double value = 0.0;  // miles per takeover, or total miles when there were none
  bool no_intervention = false;
};

/// Miles per takeover over all routes.
MpiResult mpi(std::span<const RouteResult> results);

struct EpisodeMetrics {
  double ds = 0.0;
  double rc = 0.0;
  double is = 1.0;
  MpiResult mpi;
  std::vector<RouteMetrics> routes;

  ordered_json to_json() const;
};

/// DS_i = RC_i * IS_i per route, then DS, RC and IS are each the mean over
/// routes. Throws std::invalid_argument for an empty list.
EpisodeMetrics driving_score(std::span<const RouteResult> results, const PenaltyTable & table);

/// Largest route station reached while within `max_offset` of the route
/// centerline. Positions farther away do not move it.
class RouteProgress {
 public:
  /// `length` defaults to the rest of the route after the start position.
  RouteProgress(const sim::LaneMap & map, std::span<const std::string> route, const geom::Vec2 & start,
                std::optional<double> length = std::nullopt, double max_offset = 5.0);

  void update(const geom::Vec2 & position);
  double completed() const { return best_ - start_; }
  double length() const { return length_; }
  bool done() const { return completed() >= length_; }
  /// Station on the route `ahead` meters past the current progress.
  geom::Vec2 point_ahead(double ahead) const;
  double heading_ahead(double ahead) const;
  const sim::LaneChain & chain() const { return chain_; }

 private:
  sim::LaneChain chain_;
  double start_ = 0.0;
  double best_ = 0.0;
  double length_ = 0.0;
  double max_offset_ = 5.0;
};

// ---- open loop ----

struct ClassScore {
  std::string name;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  /// 2TP / (2TP + FP + FN); empty when the class is absent from both sides.
  std::optional<double> f1() const;
};

struct DecisionScores {
  std::size_t frames = 0;
  double accuracy = 0.0;  // both path and speed match
  std::vector<ClassScore> path;         // five classes
  std::vector<ClassScore> speed;        // four classes
  std::vector<ClassScore> path_merged;  // follow, change, borrow; left and right counts pooled

  ordered_json to_json() const;
};

/// Throws std::invalid_argument when the sequences differ in length or are empty.
DecisionScores decision_metrics(std::span<const decision::DecisionPair> predicted,
                                std::span<const decision::DecisionPair> truth);

/// Lowercase words; punctuation other than apostrophes separates tokens and
/// is dropped.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr double kBleuEpsilon = 1e-9;

/// Corpus BLEU with n = 1..N, uniform weights and the brevity penalty.
/// N is 4, or the longest candidate length when that is shorter. A zero
/// match count for some n is replaced by kBleuEpsilon. Empty candidates
/// score 0.
double corpus_bleu4(std::span<const std::string> candidates, std::span<const std::vector<std::string>> references);
double bleu4(std::string_view candidate, std::span<const std::string> references);

/// CIDEr: mean over n = 1..4 of the TF-IDF cosine between candidate and
/// each reference, averaged over references, times 10. Document frequency
/// counts the reference sets an n-gram occurs in, idf = log(N / max(1, df)).
/// Returns the per-candidate scores. Throws std::invalid_argument when the
/// corpus has fewer than two distinct reference sentences.
std::vector<double> cider_scores(std::span<const std::string> candidates,
                                 std::span<const std::vector<std::string>> references);
double corpus_cider(std::span<const std::string> candidates, std::span<const std::vector<std::string>> references);

struct OpenLoopResult {
  DecisionScores decisions;
  double bleu4 = 0.0;
  std::optional<double> cider;  // empty when the references are degenerate
  std::size_t skipped = 0;

  ordered_json to_json() const;
};

}  // namespace drivebench::metrics
