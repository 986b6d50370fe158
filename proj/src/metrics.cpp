#include "vesonet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <unordered_map>

namespace vesonet {

double MetricsReport::delivery_rate() const {
  return requested ? static_cast<double>(delivered) / static_cast<double>(requested)
                   : std::numeric_limits<double>::quiet_NaN();
}

double MetricsReport::mean_delay_s() const {
  return delivered ? static_cast<double>(delay_ticks) * tick_duration_s / static_cast<double>(delivered)
                   : std::numeric_limits<double>::quiet_NaN();
}

double MetricsReport::mean_travel_time_s() const {
  return trips ? static_cast<double>(trip_ticks) * tick_duration_s / static_cast<double>(trips)
               : std::numeric_limits<double>::quiet_NaN();
}

std::int64_t MetricsReport::computation_cost() const {
  std::int64_t total = 0;
  for (const auto& [k, v] : cost) total += v;
  return total;
}

MetricsReport compute_metrics(std::span<const Event> events, double tick_duration_s) {
  MetricsReport r;
  r.tick_duration_s = tick_duration_s;
  std::unordered_map<RequestId, std::int64_t> created;
  struct Trip {
    std::int64_t start = 0;
    std::int64_t bound_ms = 0;
  };
  std::unordered_map<VehicleId, Trip> open;
  auto delivered = [&](const Event& e) {
    ++r.delivered;
    r.delay_ticks += e.tick - created.at(e.request);
  };
  for (const Event& e : events) {
    switch (e.type) {
      case EventType::interest_create:
        ++r.requested;
        created[e.request] = e.tick;
        break;
      case EventType::local_hit:
        ++r.requested;
        ++r.local_hits;
        created[e.request] = e.tick;
        delivered(e);
        break;
      case EventType::delivered_v2v:
        ++r.delivered_v2v;
        delivered(e);
        break;
      case EventType::delivered_rsu:
        ++r.delivered_rsu;
        delivered(e);
        break;
      case EventType::delivery_failure:
        ++r.failures;
        break;
      case EventType::trip_start:
        open[e.from] = {e.tick, e.bytes};
        break;
      case EventType::trip_rebound:
        ++r.budget_rebounds;
        open.at(e.from).bound_ms = e.bytes;
        break;
      case EventType::trip_end: {
        const Trip t = open.at(e.from);
        open.erase(e.from);
        ++r.trips;
        r.trip_ticks += e.tick - t.start;
        if (e.bytes > t.bound_ms) ++r.budget_violations;
        break;
      }
      case EventType::cost_planning:
        r.cost["planning"] += e.bytes;
        break;
      case EventType::cost_recommendation:
        r.cost["recommendation"] += e.bytes;
        break;
      case EventType::cost_rl:
        r.cost["rl"] += e.bytes;
        break;
      case EventType::cost_dissemination:
        r.cost["dissemination"] += e.bytes;
        break;
      default:
        break;
    }
  }
  return r;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& r) {
  char buf[96];
  auto real = [&](const char* name, double v) {
    if (std::isnan(v)) std::snprintf(buf, sizeof buf, "%s,nan\n", name);
    else std::snprintf(buf, sizeof buf, "%s,%.6f\n", name, v);
    out << buf;
  };
  auto count = [&](const std::string& name, std::int64_t v) { out << name << ',' << v << '\n'; };
  out << "metric,value\n";
  count("no_delivery_data", r.has_delivery_data() ? 0 : 1);
  real("mean_delivery_delay_s", r.mean_delay_s());
  real("delivery_rate", r.delivery_rate());
  real("mean_travel_time_s", r.mean_travel_time_s());
  count("computation_cost", r.computation_cost());
  count("requested", r.requested);
  count("delivered", r.delivered);
  count("local_hits", r.local_hits);
  count("delivered_v2v", r.delivered_v2v);
  count("delivered_rsu", r.delivered_rsu);
  count("failures", r.failures);
  count("trips", r.trips);
  count("budget_violations", r.budget_violations);
  count("budget_rebounds", r.budget_rebounds);
  for (const auto& [k, v] : r.cost) count("cost_" + k, v);
}

}  // namespace vesonet
