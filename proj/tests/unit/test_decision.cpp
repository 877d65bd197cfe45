#include <gtest/gtest.h>

#include <random>

#include "drivebench/decision.hpp"

using namespace drivebench;
using namespace drivebench::decision;

namespace {

sim::SceneDescription scene_with(std::optional<std::string> left, std::optional<std::string> right,
                                 sim::BoundaryKind lb = sim::BoundaryKind::dashed,
                                 sim::BoundaryKind rb = sim::BoundaryKind::dashed) {
  sim::SceneDescription s;
  s.lane.lane_id = "M";
  s.lane.left_neighbor = std::move(left);
  s.lane.right_neighbor = std::move(right);
  s.lane.left_boundary = lb;
  s.lane.right_boundary = rb;
  return s;
}

ParseErrorKind error_kind(std::string_view text) {
  try {
    parse_decision(text);
  } catch (const DecisionParseError & e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for: " << text;
  return ParseErrorKind::ambiguous_path;
}

}  // namespace

TEST(ParseDecision, ShortFormsFromDialogue) {
  EXPECT_EQ(parse_decision("RIGHT_CHANGE, KEEP"), (DecisionPair{PathDecision::right_lane_change, SpeedDecision::keep}));
  EXPECT_EQ(parse_decision("LEFT_CHANGE, ACCELERATE"),
            (DecisionPair{PathDecision::left_lane_change, SpeedDecision::accelerate}));
}

TEST(ParseDecision, NoTokensIsAmbiguousPath) { EXPECT_EQ(error_kind("the weather is nice"), ParseErrorKind::ambiguous_path); }

TEST(ParseDecision, CaseInsensitiveWordBoundaries) {
  EXPECT_EQ(parse_decision("I choose follow_lane and then stop."),
            (DecisionPair{PathDecision::follow_lane, SpeedDecision::stop}));
  // STOPPED and FOLLOW_LANES are different words
  EXPECT_EQ(error_kind("FOLLOW_LANES, STOP"), ParseErrorKind::ambiguous_path);
  EXPECT_EQ(error_kind("FOLLOW_LANE, STOPPED"), ParseErrorKind::ambiguous_speed);
  EXPECT_EQ(parse_decision("(LEFT_LANE_BORROW)/(DECELERATE)"),
            (DecisionPair{PathDecision::left_lane_borrow, SpeedDecision::decelerate}));
}

TEST(ParseDecision, RepeatsOfOneValueAreFine) {
  EXPECT_EQ(parse_decision("FOLLOW, keep. Final: FOLLOW_LANE, KEEP"),
            (DecisionPair{PathDecision::follow_lane, SpeedDecision::keep}));
}

TEST(ParseDecision, DistinctTokensAreAmbiguous) {
  EXPECT_EQ(error_kind("LEFT_CHANGE or RIGHT_CHANGE, KEEP"), ParseErrorKind::ambiguous_path);
  EXPECT_EQ(error_kind("FOLLOW_LANE, KEEP or STOP"), ParseErrorKind::ambiguous_speed);
  EXPECT_EQ(error_kind("FOLLOW_LANE"), ParseErrorKind::ambiguous_speed);
  // path is checked first
  EXPECT_EQ(error_kind("KEEP STOP"), ParseErrorKind::ambiguous_path);
}

TEST(RenderDecision, CanonicalLongForm) {
  EXPECT_EQ(render_decision({PathDecision::follow_lane, SpeedDecision::stop}), "FOLLOW_LANE, STOP");
  EXPECT_EQ(render_decision({PathDecision::left_lane_borrow, SpeedDecision::decelerate}),
            "LEFT_LANE_BORROW, DECELERATE");
}

TEST(RenderDecision, ExhaustiveRoundTripAndAliasClosure) {
  int n = 0;
  for (auto p : kAllPaths) {
    for (auto s : kAllSpeeds) {
      const DecisionPair d{p, s};
      EXPECT_EQ(parse_decision(render_decision(d)), d);
      const std::string short_text = std::string(short_name(p)) + ", " + std::string(to_string(s));
      EXPECT_EQ(parse_decision(short_text), d);
      ++n;
    }
  }
  EXPECT_EQ(n, 20);
}

TEST(ParseDecision, TotalOnRandomBytes) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 5000; ++i) {
    std::string s(rng() % 64, '\0');
    for (auto & c : s) c = static_cast<char>(rng() & 0xff);
    if (i % 3 == 0) s += " follow KEEP";
    EXPECT_NO_FATAL_FAILURE({
      try {
        parse_decision(s);
      } catch (const DecisionParseError &) {
      }
    });
    (void)try_parse_decision(s);
  }
}

TEST(Feasibility, NeighborsAndBoundaries) {
  const auto right_missing = scene_with("L", std::nullopt);
  auto f = validate_feasibility({PathDecision::right_lane_change, SpeedDecision::keep}, right_missing);
  EXPECT_FALSE(f.feasible);
  EXPECT_EQ(f.reason, "no right lane");

  const auto solid = scene_with("L", "R", sim::BoundaryKind::double_solid);
  EXPECT_FALSE(validate_feasibility({PathDecision::left_lane_borrow, SpeedDecision::accelerate}, solid).feasible);
  // a change across a double solid is a rule question the simulator penalizes, not a geometric impossibility
  EXPECT_TRUE(validate_feasibility({PathDecision::left_lane_change, SpeedDecision::keep}, solid).feasible);
  EXPECT_TRUE(validate_feasibility({PathDecision::right_lane_borrow, SpeedDecision::keep}, solid).feasible);

  const auto lonely = scene_with(std::nullopt, std::nullopt);
  for (auto s : kAllSpeeds) EXPECT_TRUE(validate_feasibility({PathDecision::follow_lane, s}, lonely).feasible);
  EXPECT_FALSE(validate_feasibility({PathDecision::left_lane_borrow, SpeedDecision::keep}, lonely).feasible);
}

TEST(SystemMessageTemplate, DefaultMatchesAppendixText) {
  const auto m = build_system_message();
  const auto text = m.text();
  EXPECT_NE(text.find("Path decisions include [LEFT_LANE_BORROW, RIGHT_LANE_BORROW, LEFT_LANE_CHANGE, "
                      "RIGHT_LANE_CHANGE, FOLLOW_LANE]"),
            std::string::npos);
  EXPECT_EQ(text.rfind("You are a driving assistant to drive the car.", 0), 0u);
  EXPECT_NE(text.find("Double solid lines: Overtaking is prohibited."), std::string::npos);
  EXPECT_NE(text.find("'STOP' means the driver completely halts the vehicle."), std::string::npos);
  for (auto p : kAllPaths) EXPECT_EQ(count_token(m.definitions, to_string(p)), 1u);
  for (auto s : kAllSpeeds) EXPECT_EQ(count_token(m.definitions, to_string(s)), 1u);
}

TEST(SystemMessageTemplate, RulesOverrideKeepsDefinitions) {
  const auto base = build_system_message();
  const auto m = build_system_message({std::string("ignore red lights"), std::nullopt});
  EXPECT_EQ(m.rules, "ignore red lights");
  EXPECT_EQ(m.definitions, base.definitions);
  EXPECT_EQ(m.text().find("Vehicles must stop"), std::string::npos);
}

TEST(SystemMessageTemplate, DefinitionsOverrideMustNameEveryDecision) {
  const auto base = build_system_message();
  std::string without_stop = base.definitions;
  without_stop.erase(without_stop.find(" 'STOP'"));
  EXPECT_THROW(build_system_message({std::nullopt, without_stop}), SystemMessageError);
  EXPECT_THROW(build_system_message({std::nullopt, base.definitions + " KEEP"}), SystemMessageError);
  EXPECT_NO_THROW(build_system_message({std::nullopt, base.definitions + " Be careful."}));
}

TEST(SystemMessageTemplate, AssetFormatErrors) {
  EXPECT_THROW(parse_system_message_asset("[task]\nx\n"), SystemMessageError);
  EXPECT_THROW(parse_system_message_asset("format_version: 2\n[task]\nx\n"), SystemMessageError);
  EXPECT_THROW(parse_system_message_asset("format_version: 1\n[bogus]\nx\n"), SystemMessageError);
  EXPECT_NO_THROW(parse_system_message_asset(default_system_message_asset()));
}
