#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>

#include "vesonet/dissemination.hpp"

namespace vesonet {

/// The four headline metrics plus the counts they derive from. Sums are kept in whole
/// ticks so two independent computations agree exactly.
struct MetricsReport {
  double tick_duration_s = 1.0;
  std::int64_t requested = 0;
  std::int64_t delivered = 0;
  std::int64_t local_hits = 0;
  std::int64_t delivered_v2v = 0;
  std::int64_t delivered_rsu = 0;
  std::int64_t failures = 0;
  std::int64_t delay_ticks = 0;
  std::int64_t trips = 0;
  std::int64_t trip_ticks = 0;
  std::int64_t budget_violations = 0;
  std::int64_t budget_rebounds = 0;
  std::map<std::string, std::int64_t> cost;  // per subsystem

  bool has_delivery_data() const { return requested > 0; }
  double delivery_rate() const;
  double mean_delay_s() const;
  double mean_travel_time_s() const;
  std::int64_t computation_cost() const;

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport compute_metrics(std::span<const Event> events, double tick_duration_s);

/// `metric,value` rows; undefined means are written as `nan`.
void write_metrics_csv(std::ostream& out, const MetricsReport& report);

}  // namespace vesonet
