#include "drivebench/planner.hpp"

#include <stdexcept>

namespace drivebench::protocol {

ProtocolStats & ProtocolStats::operator+=(const ProtocolStats & o) {
  requests += o.requests;
  ok += o.ok;
  parse_failures += o.parse_failures;
  timeouts += o.timeouts;
  fallbacks += o.fallbacks;
  return *this;
}

ordered_json ProtocolStats::to_json() const {
  ordered_json j;
  j["requests"] = requests;
  j["ok"] = ok;
  j["parse_failures"] = parse_failures;
  j["timeouts"] = timeouts;
  j["fallbacks"] = fallbacks;
  return j;
}

decision::DecisionResponse FsmPlanner::decide(const PlannerRequest & req) {
  auto [next, out] = fsm::fsm_decide(state_, req.scene, req.navigation, cfg_);
  state_ = std::move(next);
  return out.response;
}

decision::DecisionResponse StopPlanner::decide(const PlannerRequest &) {
  return {{decision::PathDecision::follow_lane, decision::SpeedDecision::stop},
          "The planner did not answer in time, so stop."};
}

FallbackPolicy fallback_from_string(std::string_view s) {
  if (s == "fsm") return FallbackPolicy::fsm;
  if (s == "stop") return FallbackPolicy::stop;
  throw std::invalid_argument("unknown fallback policy '" + std::string(s) + "' (expected fsm or stop)");
}

std::unique_ptr<Planner> make_fallback(FallbackPolicy p, const fsm::FsmConfig & cfg) {
  if (p == FallbackPolicy::stop) return std::make_unique<StopPlanner>();
  return std::make_unique<FsmPlanner>(cfg);
}

}  // namespace drivebench::protocol
