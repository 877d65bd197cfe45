#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drivebench/decision.hpp"
#include "drivebench/fsm.hpp"
#include "drivebench/perception.hpp"

namespace drivebench::protocol {

struct PlannerRequest {
  std::uint64_t id = 0;
  std::string system_message;
  sim::SceneDescription scene;
  decision::NavigationCommand navigation = decision::NavigationCommand::follow_lane;
  std::optional<std::string> user_instruction;
  std::vector<std::pair<std::string, std::string>> dialogue_history;  // (prompt, response)

  bool operator==(const PlannerRequest &) const = default;
};

struct PlannerReply {
  std::uint64_t id = 0;
  std::string decision_text;
  std::optional<std::string> explanation;

  bool operator==(const PlannerReply &) const = default;
};

struct ProtocolStats {
  std::uint64_t requests = 0;
  std::uint64_t ok = 0;
  std::uint64_t parse_failures = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t fallbacks = 0;

  ProtocolStats & operator+=(const ProtocolStats & o);
  bool operator==(const ProtocolStats &) const = default;
  ordered_json to_json() const;
};

/// Anything that turns a request into a decision. One instance serves one
/// episode at a time; reset() starts a new one.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual decision::DecisionResponse decide(const PlannerRequest & req) = 0;
  virtual void reset() {}
  virtual ProtocolStats stats() const { return {}; }
  virtual std::string name() const = 0;
};

class FsmPlanner : public Planner {
 public:
  explicit FsmPlanner(fsm::FsmConfig cfg = {}) : cfg_(cfg) {}
  decision::DecisionResponse decide(const PlannerRequest & req) override;
  void reset() override { state_ = {}; }
  std::string name() const override { return "fsm"; }
  const fsm::FsmState & state() const { return state_; }

 private:
  fsm::FsmConfig cfg_;
  fsm::FsmState state_;
};

/// Always (FOLLOW_LANE, STOP). The alternative fallback policy.
class StopPlanner : public Planner {
 public:
  decision::DecisionResponse decide(const PlannerRequest & req) override;
  std::string name() const override { return "stop"; }
};

enum class FallbackPolicy { fsm, stop };

FallbackPolicy fallback_from_string(std::string_view s);
std::unique_ptr<Planner> make_fallback(FallbackPolicy p, const fsm::FsmConfig & cfg = {});

}  // namespace drivebench::protocol
