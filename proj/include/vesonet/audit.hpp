#pragma once

// Independent re-derivation of the run metrics from an event-log CSV. Shares no code
// with the simulator; only the CSV layout is common.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace vesonet::audit {

struct Finding {
  std::size_t line = 0;  // 1-based line in the CSV, 0 for whole-log findings
  std::string message;
};

struct AuditReport {
  std::int64_t requested = 0;
  std::int64_t delivered = 0;
  std::int64_t failed = 0;
  std::int64_t delay_ticks = 0;
  std::int64_t trips = 0;
  std::int64_t trip_ticks = 0;
  std::int64_t budget_violations = 0;
  /// Trips over the bound they started with; only possible after a closure widened it.
  std::int64_t over_first_bound = 0;
  std::map<std::string, std::int64_t> cost;
  std::int64_t rows = 0;

  double delivery_rate() const;
  double mean_delay_s(double tick_s) const;
  double mean_travel_time_s(double tick_s) const;
  std::int64_t computation_cost() const;

  /// Rows that could not be parsed.
  std::vector<Finding> malformed;
  /// Broken invariants: conservation, hop limit, cache capacity, budget, ordering.
  std::vector<Finding> violations;

  bool clean() const { return malformed.empty() && violations.empty(); }
};

/// Reads the whole log. Never throws on bad content; problems land in the report.
AuditReport audit_event_log(std::istream& in, int max_hops = 15);

void write_audit(std::ostream& out, const AuditReport& report, double tick_s);

/// Rows of the runner's metric CSV that disagree with the audit, as readable lines.
/// Empty when every audited metric is reproduced digit for digit.
std::vector<std::string> compare_with_runner(const AuditReport& report, double tick_s, std::istream& runner_csv);

}  // namespace vesonet::audit
