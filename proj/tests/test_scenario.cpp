#include <doctest.h>

#include <algorithm>
#include <string>

#include "vesonet/error.hpp"
#include "vesonet/scenario.hpp"

using namespace vesonet;

namespace {

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("defaults validate") {
  const Scenario s;
  CHECK(validate_scenario(s).empty());
  const RoadNetwork net = build_network(s);
  CHECK(net.intersection_count() == 16);
  CHECK(net.segment_count() == 48);
  for (SegmentId i = 0; i < net.segment_count(); ++i) CHECK(net.segment(i).speed_limit_mps <= s.velocity_cap_mps);
}

TEST_CASE("json round trip") {
  Scenario s;
  s.consumers = 7;
  s.rsus = {{3, 10.0}, {5, -1.0}};
  s.rsu_count.reset();
  s.accidents = {{2, 5, 9}};
  s.epsilon_s = 12.5;
  s.dqn.hidden = {8, 4};
  s.policy = Policy::baseline;
  const ScenarioLoad back = parse_scenario(scenario_to_json(s));
  REQUIRE(back.errors.empty());
  CHECK(back.scenario.consumers == 7);
  CHECK_FALSE(back.scenario.rsu_count.has_value());
  REQUIRE(back.scenario.rsus.size() == 2);
  CHECK(back.scenario.rsus[0].offset_m == 10.0);
  CHECK(back.scenario.accidents[0].duration_ticks == 9);
  CHECK(back.scenario.epsilon_s == 12.5);
  CHECK(back.scenario.dqn.hidden == std::vector<std::size_t>{8, 4});
  CHECK(back.scenario.policy == Policy::baseline);
  CHECK(scenario_to_json(back.scenario) == scenario_to_json(s));
}

TEST_CASE("partial documents keep defaults") {
  const ScenarioLoad load = parse_scenario(R"({"epsilon_s": 30, "vehicles": {"consumers": 3}})");
  REQUIRE(load.errors.empty());
  CHECK(load.scenario.epsilon_s == 30);
  CHECK(load.scenario.consumers == 3);
  CHECK(load.scenario.providers == Scenario{}.providers);
}

TEST_CASE("negative epsilon names the field") {
  const ScenarioLoad load = parse_scenario(R"({"epsilon_s": -1})");
  REQUIRE(load.errors.empty());
  const auto errors = validate_scenario(load.scenario);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("epsilon_s") != std::string::npos);
  CHECK(errors[0].find(">= 0") != std::string::npos);
}

TEST_CASE("every violation is listed") {
  const ScenarioLoad load =
      parse_scenario(R"({"epsilon_s": -1, "tick_duration_s": 0, "vehicles": {"consumers": -2}, "alpha": 3})");
  const auto errors = validate_scenario(load.scenario);
  CHECK(errors.size() == 4);
  CHECK(mentions(errors, "epsilon_s"));
  CHECK(mentions(errors, "tick_duration_s"));
  CHECK(mentions(errors, "vehicles.consumers"));
  CHECK(mentions(errors, "alpha"));
}

TEST_CASE("dangling references") {
  const ScenarioLoad load =
      parse_scenario(R"({"rsus": [{"segment": 999}], "accidents": [{"segment": 500, "start_tick": 0, "duration_ticks": 5}]})");
  REQUIRE(load.errors.empty());
  const auto errors = validate_scenario(load.scenario);
  CHECK(mentions(errors, "rsus[0].segment: segment 999 does not exist"));
  CHECK(mentions(errors, "accidents[0].segment"));
}

TEST_CASE("unknown keys and wrong types are reported with their path") {
  const ScenarioLoad load = parse_scenario(R"({"epsilon": 3, "radio": {"range_m": "far", "ttl": 2}})");
  CHECK(mentions(load.errors, "epsilon"));
  CHECK(mentions(load.errors, "radio.ttl"));
  CHECK(mentions(load.errors, "radio.range_m"));
}

TEST_CASE("malformed json carries line and column") {
  try {
    parse_scenario("{\n  \"epsilon_s\": 3,\n  \"alpha\": ,\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
    CHECK(e.column >= 11);
  }
}

TEST_CASE("policy names") {
  CHECK(policy_from_string("vesonet") == Policy::vesonet);
  CHECK(policy_from_string("baseline") == Policy::baseline);
  CHECK(policy_from_string("baseline_no_reroute") == Policy::baseline);
  CHECK_FALSE(policy_from_string("other").has_value());
  CHECK(mentions(parse_scenario(R"({"policy": "x"})").errors, "policy"));
}

TEST_CASE("rsu spread and accident draw") {
  Scenario s;
  const RoadNetwork net = build_network(s);
  s.rsu_count = 4;
  const auto rsus = effective_rsus(s, net);
  REQUIRE(rsus.size() == 4);
  for (std::size_t i = 0; i < rsus.size(); ++i)
    for (std::size_t j = i + 1; j < rsus.size(); ++j) CHECK(rsus[i].segment != rsus[j].segment);
  s.rsu_count = 0;
  CHECK(effective_rsus(s, net).empty());

  s.accident_count = 5;
  const auto acc = effective_accidents(s, net);
  REQUIRE(acc.size() == 5);
  for (std::size_t i = 1; i < acc.size(); ++i) CHECK(acc[i - 1].segment < acc[i].segment);
  CHECK(acc[0].start_tick == s.accident_start_tick);
  CHECK(effective_accidents(s, net)[2].segment == acc[2].segment);
}

TEST_CASE("sweep axes") {
  Scenario s;
  apply_axis(s, SweepAxis::density, 200);
  CHECK(s.consumers + s.providers + s.meta == 200);
  CHECK(s.consumers == 120);
  CHECK(s.providers == 60);
  apply_axis(s, SweepAxis::density, 10);
  CHECK(s.consumers + s.providers + s.meta == 10);
  CHECK(s.meta >= 1);
  apply_axis(s, SweepAxis::rsu_count, 2);
  CHECK(s.rsu_count == 2);
  apply_axis(s, SweepAxis::velocity, 15);
  CHECK(s.velocity_cap_mps == 15);
  CHECK_THROWS_AS(apply_axis(s, SweepAxis::accidents, 1.5), ConfigError);
  CHECK(axis_from_string("rsu_count") == SweepAxis::rsu_count);
  CHECK_FALSE(axis_from_string("speed").has_value());
}
