#include "drivebench/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace drivebench::metrics {

namespace {

ordered_json infraction_json(const sim::Infraction & i) {
  ordered_json j;
  j["kind"] = sim::to_string(i.kind);
  j["time"] = io::quantize(i.time);
  j["x"] = io::quantize(i.position.x);
  j["y"] = io::quantize(i.position.y);
  j["detail"] = i.detail;
  return j;
}

sim::Infraction infraction_from_json(const json & j) {
  constexpr std::string_view ctx = "infraction";
  io::require_known_keys(j, {"kind", "time", "x", "y", "detail"}, ctx);
  sim::Infraction i;
  try {
    i.kind = sim::infraction_kind_from_string(io::get_required<std::string>(j, "kind", ctx));
  } catch (const std::invalid_argument & e) {
    throw FormatError(std::string(ctx) + ": " + e.what());
  }
  i.time = io::get_required<double>(j, "time", ctx);
  i.position = {io::get_required<double>(j, "x", ctx), io::get_required<double>(j, "y", ctx)};
  i.detail = io::get_or<std::string>(j, "detail", "", ctx);
  return i;
}

}  // namespace

void RouteResult::validate() const {
  if (!(length >= 0.0) || !(completed >= 0.0) || completed > length) {
    throw std::invalid_argument("route " + route_id + ": completed distance outside [0, length]");
  }
  if (takeovers < 0) throw std::invalid_argument("route " + route_id + ": negative takeovers");
}

ordered_json RouteResult::to_json() const {
  ordered_json j;
  j["route_id"] = route_id;
  j["length"] = io::quantize(length);
  j["completed"] = io::quantize(completed);
  j["takeovers"] = takeovers;
  j["terminated_early"] = terminated_early;
  j["termination"] = termination;
  j["infractions"] = ordered_json::array();
  for (const auto & i : infractions) j["infractions"].push_back(infraction_json(i));
  return j;
}

RouteResult RouteResult::from_json(const json & j) {
  constexpr std::string_view ctx = "route result";
  io::require_known_keys(j, {"route_id", "length", "completed", "takeovers", "terminated_early", "termination",
                             "infractions"},
                         ctx);
  RouteResult r;
  r.route_id = io::get_required<std::string>(j, "route_id", ctx);
  r.length = io::get_required<double>(j, "length", ctx);
  r.completed = io::get_required<double>(j, "completed", ctx);
  r.takeovers = io::get_required<int>(j, "takeovers", ctx);
  r.terminated_early = io::get_required<bool>(j, "terminated_early", ctx);
  r.termination = io::get_or<std::string>(j, "termination", "", ctx);
  for (const auto & i : io::get_or<json>(j, "infractions", json::array(), ctx)) {
    r.infractions.push_back(infraction_from_json(i));
  }
  try {
    r.validate();
  } catch (const std::invalid_argument & e) {
    throw FormatError(e.what());
  }
  return r;
}

PenaltyTable PenaltyTable::defaults() {
  using K = sim::InfractionKind;
  PenaltyTable t;
  t.coeff_ = {{K::collision_pedestrian, 0.50}, {K::collision_vehicle, 0.60}, {K::collision_static, 0.65},
              {K::red_light, 0.70},            {K::stop_sign, 0.80},         {K::double_solid_crossing, 0.80},
              {K::failed_yield_emergency, 0.80}};
  return t;
}

PenaltyTable PenaltyTable::from_json(const json & j) {
  constexpr std::string_view ctx = "penalty table";
  if (!j.is_object()) throw FormatError("penalty table: expected an object");
  io::require_format_version(j, 1, ctx);
  const json & c = j.contains("coefficients") ? j.at("coefficients") : json();
  if (!c.is_object()) throw FormatError("penalty table: missing object 'coefficients'");
  io::require_known_keys(j, {"format_version", "coefficients"}, ctx);
  PenaltyTable t;
  for (const auto & [key, value] : c.items()) {
    sim::InfractionKind k;
    try {
      k = sim::infraction_kind_from_string(key);
    } catch (const std::invalid_argument &) {
      throw FormatError("penalty table: unknown infraction kind '" + key + "'");
    }
    if (!value.is_number()) throw FormatError("penalty table: coefficient for '" + key + "' is not a number");
    const double v = value.get<double>();
    if (!(v > 0.0 && v <= 1.0)) throw FormatError("penalty table: coefficient for '" + key + "' outside (0, 1]");
    t.coeff_[k] = v;
  }
  for (auto k : sim::kAllInfractionKinds) {
    if (!t.coeff_.count(k)) throw FormatError("penalty table: missing kind '" + sim::to_string(k) + "'");
  }
  return t;
}

PenaltyTable PenaltyTable::load(const std::filesystem::path & path) { return from_json(io::read_json_file(path)); }

double PenaltyTable::coefficient(sim::InfractionKind k) const { return coeff_.at(k); }

void PenaltyTable::set(sim::InfractionKind k, double c) {
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("penalty coefficient outside (0, 1]");
  coeff_[k] = c;
}

ordered_json PenaltyTable::to_json() const {
  ordered_json j;
  j["format_version"] = 1;
  ordered_json c;
  for (auto k : sim::kAllInfractionKinds) c[sim::to_string(k)] = coeff_.at(k);
  j["coefficients"] = c;
  return j;
}

double route_completion(const RouteResult & r) {
  if (!(r.length > 0.0)) throw std::invalid_argument("route " + r.route_id + " has zero length");
  r.validate();
  return 100.0 * r.completed / r.length;
}

double infraction_score(std::span<const sim::InfractionKind> kinds, const PenaltyTable & table) {
  double is = 1.0;
  for (auto k : kinds) is *= table.coefficient(k);
  return is;
}

double infraction_score(std::span<const sim::Infraction> infractions, const PenaltyTable & table) {
  double is = 1.0;
  for (const auto & i : infractions) is *= table.coefficient(i.kind);
  return is;
}

MpiResult mpi(std::span<const RouteResult> results) {
  MpiResult m;
  double meters = 0.0;
  for (const auto & r : results) {
    meters += r.completed;
    m.takeovers += r.takeovers;
  }
  m.miles = meters * kMilesPerMeter;
  m.no_intervention = m.takeovers == 0;
  m.value = m.no_intervention ? m.miles : m.miles / m.takeovers;
  return m;
}

EpisodeMetrics driving_score(std::span<const RouteResult> results, const PenaltyTable & table) {
  if (results.empty()) throw std::invalid_argument("driving score needs at least one route");
  EpisodeMetrics e;
  double ds = 0.0, rc = 0.0, is = 0.0;
  for (const auto & r : results) {
    RouteMetrics m;
    m.route_id = r.route_id;
    m.rc = route_completion(r);
    m.is = infraction_score(std::span<const sim::Infraction>(r.infractions), table);
    m.ds = m.rc * m.is;
    ds += m.ds;
    rc += m.rc;
    is += m.is;
    e.routes.push_back(m);
  }
  const double n = static_cast<double>(results.size());
  e.ds = ds / n;
  e.rc = rc / n;
  e.is = is / n;
  e.mpi = mpi(results);
  return e;
}

ordered_json EpisodeMetrics::to_json() const {
  ordered_json j;
  j["ds"] = ds;
  j["rc"] = rc;
  j["is"] = is;
  ordered_json m;
  m["miles"] = mpi.miles;
  m["takeovers"] = mpi.takeovers;
  m["value"] = mpi.value;
  m["no_intervention"] = mpi.no_intervention;
  j["mpi"] = m;
  j["routes"] = ordered_json::array();
  for (const auto & r : routes) {
    j["routes"].push_back({{"route_id", r.route_id}, {"rc", r.rc}, {"is", r.is}, {"ds", r.ds}});
  }
  return j;
}

RouteProgress::RouteProgress(const sim::LaneMap & map, std::span<const std::string> route, const geom::Vec2 & start,
                             std::optional<double> length, double max_offset)
    : chain_(map.chain_through(route)), max_offset_(max_offset) {
  start_ = std::clamp(chain_.line.project(start).s, 0.0, chain_.line.length());
  best_ = start_;
  length_ = length ? *length : chain_.line.length() - start_;
  if (!(length_ > 0.0)) throw std::invalid_argument("route has no length past the start position");
}

void RouteProgress::update(const geom::Vec2 & position) {
  const auto p = chain_.line.project(position);
  if (p.distance > max_offset_) return;
  best_ = std::min(std::max(best_, p.s), start_ + length_);
}

geom::Vec2 RouteProgress::point_ahead(double ahead) const {
  return chain_.line.point_at(std::min(best_ + ahead, chain_.line.length()));
}

double RouteProgress::heading_ahead(double ahead) const {
  return chain_.line.heading_at(std::min(best_ + ahead, chain_.line.length()));
}

// ---- open loop ----

std::optional<double> ClassScore::f1() const {
  const int denom = 2 * tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * tp / denom;
}

namespace {

template <typename T, std::size_t N>
std::vector<ClassScore> one_vs_rest(const std::array<T, N> & classes, std::span<const T> pred,
                                    std::span<const T> truth) {
  std::vector<ClassScore> out;
  for (auto c : classes) {
    ClassScore s;
    s.name = std::string(decision::to_string(c));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == c, t = truth[i] == c;
      if (p && t) ++s.tp;
      else if (p) ++s.fp;
      else if (t) ++s.fn;
    }
    out.push_back(s);
  }
  return out;
}

ClassScore pooled(std::string name, const ClassScore & a, const ClassScore & b) {
  return {std::move(name), a.tp + b.tp, a.fp + b.fp, a.fn + b.fn};
}

ordered_json scores_json(const std::vector<ClassScore> & v) {
  ordered_json j;
  for (const auto & s : v) {
    const auto f = s.f1();
    j[s.name] = {{"f1", f ? ordered_json(*f) : ordered_json(nullptr)}, {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}};
  }
  return j;
}

}  // namespace

DecisionScores decision_metrics(std::span<const decision::DecisionPair> predicted,
                                std::span<const decision::DecisionPair> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and ground truth differ in length");
  if (truth.empty()) throw std::invalid_argument("no frames to score");
  DecisionScores d;
  d.frames = truth.size();
  std::vector<decision::PathDecision> pp, tp;
  std::vector<decision::SpeedDecision> ps, ts;
  std::size_t same = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) ++same;
    pp.push_back(predicted[i].path);
    tp.push_back(truth[i].path);
    ps.push_back(predicted[i].speed);
    ts.push_back(truth[i].speed);
  }
  d.accuracy = static_cast<double>(same) / static_cast<double>(truth.size());
  d.path = one_vs_rest(decision::kAllPaths, std::span<const decision::PathDecision>(pp),
                       std::span<const decision::PathDecision>(tp));
  d.speed = one_vs_rest(decision::kAllSpeeds, std::span<const decision::SpeedDecision>(ps),
                        std::span<const decision::SpeedDecision>(ts));
  // order of kAllPaths: follow, left change, right change, left borrow, right borrow
  d.path_merged = {{"FOLLOW", d.path[0].tp, d.path[0].fp, d.path[0].fn},
                   pooled("CHANGE", d.path[1], d.path[2]),
                   pooled("BORROW", d.path[3], d.path[4])};
  return d;
}

ordered_json DecisionScores::to_json() const {
  ordered_json j;
  j["frames"] = frames;
  j["accuracy"] = accuracy;
  j["path_f1"] = scores_json(path);
  j["speed_f1"] = scores_json(speed);
  j["path_f1_merged"] = scores_json(path_merged);
  return j;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '\'' || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const std::vector<std::string> & toks, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                   toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

}  // namespace

double corpus_bleu4(std::span<const std::string> candidates, std::span<const std::vector<std::string>> references) {
  if (candidates.size() != references.size()) throw std::invalid_argument("candidates and references differ in count");
  std::array<double, 4> match{}, total{};
  double c_len = 0.0, r_len = 0.0;
  std::size_t longest = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (references[k].empty()) throw std::invalid_argument("candidate without references");
    const auto cand = tokenize(candidates[k]);
    std::vector<std::vector<std::string>> refs;
    for (const auto & r : references[k]) refs.push_back(tokenize(r));
    longest = std::max(longest, cand.size());
    c_len += static_cast<double>(cand.size());
    // closest reference length, the shorter one on ties
    double best = -1.0;
    for (const auto & r : refs) {
      const double d = std::abs(static_cast<double>(r.size()) - static_cast<double>(cand.size()));
      const double bd = std::abs(best - static_cast<double>(cand.size()));
      if (best < 0.0 || d < bd || (d == bd && static_cast<double>(r.size()) < best)) {
        best = static_cast<double>(r.size());
      }
    }
    r_len += best;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cg = ngrams(cand, n);
      NgramCounts max_ref;
      for (const auto & r : refs) {
        for (const auto & [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto & [g, c] : cg) {
        total[n - 1] += c;
        const auto it = max_ref.find(g);
        if (it != max_ref.end()) match[n - 1] += std::min(c, it->second);
      }
    }
  }
  if (c_len == 0.0) return 0.0;
  const std::size_t n_eff = std::min<std::size_t>(4, longest);
  double log_sum = 0.0;
  for (std::size_t n = 0; n < n_eff; ++n) {
    log_sum += std::log(std::max(match[n], kBleuEpsilon) / total[n]);
  }
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * std::exp(log_sum / static_cast<double>(n_eff));
}

double bleu4(std::string_view candidate, std::span<const std::string> references) {
  if (references.empty()) throw std::invalid_argument("bleu needs at least one reference");
  const std::string c(candidate);
  const std::vector<std::string> refs(references.begin(), references.end());
  return corpus_bleu4(std::span<const std::string>(&c, 1), std::span<const std::vector<std::string>>(&refs, 1));
}

namespace {

using Vec = std::map<std::vector<std::string>, double>;

Vec tfidf(const NgramCounts & counts, const std::map<std::vector<std::string>, int> & df, double n_docs) {
  double total = 0.0;
  for (const auto & [g, c] : counts) total += c;
  Vec v;
  for (const auto & [g, c] : counts) {
    const auto it = df.find(g);
    const double d = it == df.end() ? 0.0 : it->second;
    v[g] = (c / total) * std::log(n_docs / std::max(1.0, d));
  }
  return v;
}

double cosine(const Vec & a, const Vec & b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto & [g, x] : a) {
    na += x * x;
    const auto it = b.find(g);
    if (it != b.end()) dot += x * it->second;
  }
  for (const auto & [g, y] : b) nb += y * y;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<double> cider_scores(std::span<const std::string> candidates,
                                 std::span<const std::vector<std::string>> references) {
  if (candidates.size() != references.size()) throw std::invalid_argument("candidates and references differ in count");
  std::set<std::vector<std::string>> distinct;
  std::vector<std::vector<std::vector<std::string>>> ref_toks;
  for (const auto & set : references) {
    if (set.empty()) throw std::invalid_argument("candidate without references");
    auto & rt = ref_toks.emplace_back();
    for (const auto & r : set) {
      rt.push_back(tokenize(r));
      distinct.insert(rt.back());
    }
  }
  if (distinct.size() < 2) throw std::invalid_argument("cider needs at least two distinct reference sentences");
  const double n_docs = static_cast<double>(references.size());
  std::array<std::map<std::vector<std::string>, int>, 4> df;
  for (const auto & set : ref_toks) {
    for (std::size_t n = 1; n <= 4; ++n) {
      std::set<std::vector<std::string>> seen;
      for (const auto & r : set) {
        for (const auto & [g, c] : ngrams(r, n)) seen.insert(g);
      }
      for (const auto & g : seen) ++df[n - 1][g];
    }
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto cand = tokenize(candidates[k]);
    double score = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cv = tfidf(ngrams(cand, n), df[n - 1], n_docs);
      double sum = 0.0;
      for (const auto & r : ref_toks[k]) sum += cosine(cv, tfidf(ngrams(r, n), df[n - 1], n_docs));
      score += sum / static_cast<double>(ref_toks[k].size());
    }
    out.push_back(10.0 * score / 4.0);
  }
  return out;
}

double corpus_cider(std::span<const std::string> candidates, std::span<const std::vector<std::string>> references) {
  const auto s = cider_scores(candidates, references);
  double sum = 0.0;
  for (double x : s) sum += x;
  return s.empty() ? 0.0 : sum / static_cast<double>(s.size());
}

ordered_json OpenLoopResult::to_json() const {
  ordered_json j;
  j["decisions"] = decisions.to_json();
  j["bleu4"] = bleu4;
  j["cider"] = cider ? ordered_json(*cider) : ordered_json(nullptr);
  j["skipped"] = skipped;
  return j;
}

}  // namespace drivebench::metrics
