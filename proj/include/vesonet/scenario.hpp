#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vesonet/content_embed.hpp"
#include "vesonet/provider_rl.hpp"
#include "vesonet/road_net.hpp"
#include "vesonet/synthetic.hpp"

namespace vesonet {

enum class Policy { vesonet, baseline };

std::string to_string(Policy policy);
std::optional<Policy> policy_from_string(const std::string& name);

struct RsuPlacement {
  SegmentId segment = 0;
  /// Distance from the segment's start; negative means the midpoint.
  double offset_m = -1.0;
};

struct Accident {
  SegmentId segment = 0;
  std::int64_t start_tick = 0;
  std::int64_t duration_ticks = 0;
};

struct Scenario {
  /// Edge-list file; the grid is used when empty. Relative paths resolve against base_dir.
  std::string network_file;
  GridSpec grid{4, 4, 750.0, 20.0, 0.3, 1};
  double signal_green_s = 30.0;
  double signal_red_s = 30.0;

  int consumers = 60;
  int providers = 30;
  int meta = 10;
  double velocity_cap_mps = 20.0;

  std::vector<RsuPlacement> rsus;
  /// When set, this many RSUs are spread over the map instead of `rsus`.
  std::optional<int> rsu_count = 4;
  std::vector<Accident> accidents;
  /// When set, this many distinct segments are halted instead of `accidents`.
  std::optional<int> accident_count;
  std::int64_t accident_start_tick = 50;
  std::int64_t accident_duration_ticks = 200;

  double epsilon_s = 60.0;
  double alpha = 0.5;
  DQNConfig dqn;

  /// Consumption CSV; the synthetic generator is used when empty.
  std::string consumption_log;
  LogSpec synthetic;
  std::int64_t item_size_min_bytes = 1'000'000;
  std::int64_t item_size_max_bytes = 5'000'000;
  EmbeddingParams embedding;

  std::int64_t cache_capacity_bytes = 40'000'000;
  int warm_top_p = 8;

  double radio_range_m = 450.0;
  int ttl_hops = 15;
  double v2v_rate_bytes_per_s = 2e6;
  double rsu_rate_bytes_per_s = 1e7;
  double rsu_latency_s = 2.0;
  bool flood = false;

  double request_rate_per_s = 1.0 / 60.0;
  double retry_s = 30.0;
  int max_retries = 3;
  double deadline_s = 120.0;

  std::int64_t report_period_ticks = 10;
  int staleness_periods = 3;

  double tick_duration_s = 1.0;
  std::int64_t run_length_ticks = 500;
  std::uint64_t rng_seed = 1;
  Policy policy = Policy::vesonet;

  std::string base_dir;
};

struct ScenarioLoad {
  Scenario scenario;
  /// Type and unknown-field problems found while reading; empty on success.
  std::vector<std::string> errors;
};

/// Reads a JSON scenario. Throws ParseError (with line and column) on malformed JSON.
ScenarioLoad parse_scenario(const std::string& text, const std::string& base_dir = "");
ScenarioLoad load_scenario_file(const std::string& file);
std::string scenario_to_json(const Scenario& scenario);

/// Every violated constraint, including ids that do not exist in the network.
std::vector<std::string> validate_scenario(const Scenario& scenario);

/// Network with speed limits capped at the scenario's velocity cap and signals applied.
RoadNetwork build_network(const Scenario& scenario);

/// RSU and accident lists after applying rsu_count / accident_count.
std::vector<RsuPlacement> effective_rsus(const Scenario& scenario, const RoadNetwork& network);
std::vector<Accident> effective_accidents(const Scenario& scenario, const RoadNetwork& network);

enum class SweepAxis { velocity, density, rsu_count, accidents, request_rate };

std::string to_string(SweepAxis axis);
std::optional<SweepAxis> axis_from_string(const std::string& name);

/// Sets one axis value; density splits the vehicle total in the template's role proportions.
void apply_axis(Scenario& scenario, SweepAxis axis, double value);

}  // namespace vesonet
