#include "vesonet/audit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace vesonet::audit {

namespace {

constexpr const char* kHeader = "tick,event_type,request_id,content_id,vehicle_from,vehicle_to,hops,bytes_remaining";
constexpr std::int64_t kNone = -1;

struct Row {
  std::int64_t tick = 0;
  std::string type;
  std::int64_t request = kNone, content = kNone, from = kNone, to = kNone, hops = 0, bytes = 0;
};

const std::set<std::string>& known_types() {
  static const std::set<std::string> k{
      "interest_create", "interest_retry",  "interest_forward", "interest_drop",      "index_hit",
      "index_miss",      "index_purge",     "local_hit",        "transfer_start",     "transfer_pause",
      "transfer_resume", "delivered_v2v",   "delivered_rsu",    "delivery_failure",   "provider_join",
      "cache_fill",      "replicate",       "recommend_download", "evict",            "trip_start",
      "trip_rebound",    "trip_end",        "accident_start",   "accident_end",       "cost_planning",
      "cost_recommendation", "cost_rl",     "cost_dissemination"};
  return k;
}

bool parse_int(const std::string& s, std::int64_t& out, bool optional) {
  if (s.empty()) {
    out = kNone;
    return optional;
  }
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f(1);
  for (char c : line) {
    if (c == ',') f.emplace_back();
    else f.back() += c;
  }
  return f;
}

std::string at(std::int64_t v) { return std::to_string(v); }

}  // namespace

double AuditReport::delivery_rate() const {
  return requested ? double(delivered) / double(requested) : std::numeric_limits<double>::quiet_NaN();
}
double AuditReport::mean_delay_s(double tick_s) const {
  return delivered ? double(delay_ticks) * tick_s / double(delivered) : std::numeric_limits<double>::quiet_NaN();
}
double AuditReport::mean_travel_time_s(double tick_s) const {
  return trips ? double(trip_ticks) * tick_s / double(trips) : std::numeric_limits<double>::quiet_NaN();
}
std::int64_t AuditReport::computation_cost() const {
  std::int64_t t = 0;
  for (const auto& kv : cost) t += kv.second;
  return t;
}

AuditReport audit_event_log(std::istream& in, int max_hops) {
  AuditReport rep;
  auto bad = [&rep](std::size_t line, std::string msg) { rep.violations.push_back({line, std::move(msg)}); };

  struct Request {
    std::int64_t created = 0;
    std::size_t line = 0;
    int endings = 0;
    std::int64_t last_hops = 0;
    bool transfer = false;
  };
  std::unordered_map<std::int64_t, Request> requests;
  struct Cache {
    std::int64_t capacity = 0;
    std::int64_t used = 0;
    std::unordered_map<std::int64_t, std::int64_t> items;
  };
  std::unordered_map<std::int64_t, Cache> caches;
  struct Trip {
    std::int64_t start = 0;
    std::int64_t bound_ms = 0;
    std::int64_t first_bound_ms = 0;
  };
  std::unordered_map<std::int64_t, Trip> trips;

  std::string text;
  std::size_t line_no = 0;
  std::int64_t last_tick = std::numeric_limits<std::int64_t>::min();
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (line_no == 1) {
      if (text != kHeader) rep.malformed.push_back({1, "unexpected header"});
      continue;
    }
    if (text.empty()) continue;
    const auto f = split(text);
    Row r;
    if (f.size() != 8) {
      rep.malformed.push_back({line_no, "expected 8 fields, found " + std::to_string(f.size())});
      continue;
    }
    r.type = f[1];
    if (!parse_int(f[0], r.tick, false) || !parse_int(f[2], r.request, true) || !parse_int(f[3], r.content, true) ||
        !parse_int(f[4], r.from, true) || !parse_int(f[5], r.to, true) || !parse_int(f[6], r.hops, false) ||
        !parse_int(f[7], r.bytes, false)) {
      rep.malformed.push_back({line_no, "non-integer field"});
      continue;
    }
    if (!known_types().count(r.type)) {
      rep.malformed.push_back({line_no, "unknown event type `" + r.type + "`"});
      continue;
    }
    ++rep.rows;
    if (r.tick < last_tick) bad(line_no, "tick goes backwards");
    last_tick = r.tick;

    const std::string& t = r.type;
    const bool packet_row = t == "interest_forward" || t == "interest_drop" || t == "index_hit" || t == "index_miss" ||
                            t == "transfer_start" || t == "delivered_v2v" || t == "delivered_rsu";
    if (packet_row && (r.hops < 0 || r.hops > max_hops))
      bad(line_no, "hop count " + at(r.hops) + " outside [0, " + std::to_string(max_hops) + "]");

    if (t == "interest_create" || t == "local_hit") {
      if (requests.count(r.request)) bad(line_no, "request " + at(r.request) + " created twice");
      Request q;
      q.created = r.tick;
      q.line = line_no;
      ++rep.requested;
      if (t == "local_hit") {
        q.endings = 1;
        ++rep.delivered;
      }
      requests[r.request] = q;
      continue;
    }
    auto req = requests.find(r.request);
    const bool needs_request = t == "interest_retry" || t == "interest_forward" || t == "interest_drop" ||
                               t == "index_hit" || t == "index_miss" || t == "transfer_start" ||
                               t == "transfer_pause" || t == "transfer_resume" || t == "delivered_v2v" ||
                               t == "delivered_rsu" || t == "delivery_failure";
    if (needs_request && req == requests.end()) {
      bad(line_no, t + " for unknown request " + at(r.request));
      continue;
    }
    if (needs_request && req->second.endings > 0) bad(line_no, t + " after request " + at(r.request) + " ended");

    if (t == "interest_retry") {
      req->second.last_hops = 0;
    } else if (t == "interest_forward" || t == "index_hit" || t == "index_miss" || t == "interest_drop") {
      if (r.hops < req->second.last_hops) bad(line_no, "hop count decreased for request " + at(r.request));
      req->second.last_hops = r.hops;
    } else if (t == "transfer_start") {
      req->second.transfer = true;
    } else if (t == "delivered_v2v" || t == "delivered_rsu" || t == "delivery_failure") {
      ++req->second.endings;
      if (t == "delivery_failure") {
        ++rep.failed;
      } else {
        if (!req->second.transfer) bad(line_no, "delivery without a transfer for request " + at(r.request));
        ++rep.delivered;
        rep.delay_ticks += r.tick - req->second.created;
      }
    } else if (t == "provider_join") {
      caches[r.to].capacity = r.bytes;
    } else if (t == "cache_fill" || t == "replicate" || t == "recommend_download") {
      Cache& c = caches[r.to];
      if (c.items.count(r.content)) bad(line_no, "provider " + at(r.to) + " already holds " + at(r.content));
      c.items[r.content] = r.bytes;
      c.used += r.bytes;
      if (c.used > c.capacity)
        bad(line_no, "provider " + at(r.to) + " holds " + at(c.used) + " bytes, capacity " + at(c.capacity));
    } else if (t == "evict") {
      Cache& c = caches[r.to];
      auto it = c.items.find(r.content);
      if (it == c.items.end()) {
        bad(line_no, "evict of " + at(r.content) + " not held by " + at(r.to));
      } else {
        c.used -= it->second;
        c.items.erase(it);
      }
    } else if (t == "trip_start") {
      trips[r.from] = {r.tick, r.bytes, r.bytes};
    } else if (t == "trip_rebound") {
      auto it = trips.find(r.from);
      if (it == trips.end()) bad(line_no, "rebound outside a trip for vehicle " + at(r.from));
      else it->second.bound_ms = r.bytes;
    } else if (t == "trip_end") {
      auto it = trips.find(r.from);
      if (it == trips.end()) {
        bad(line_no, "trip end without a start for vehicle " + at(r.from));
        continue;
      }
      ++rep.trips;
      rep.trip_ticks += r.tick - it->second.start;
      if (r.bytes > it->second.bound_ms) {
        ++rep.budget_violations;
        bad(line_no, "vehicle " + at(r.from) + " route time " + at(r.bytes) + " ms over its bound " +
                         at(it->second.bound_ms) + " ms");
      }
      if (r.bytes > it->second.first_bound_ms) ++rep.over_first_bound;
      trips.erase(it);
    } else if (t.rfind("cost_", 0) == 0) {
      rep.cost[t.substr(5)] += r.bytes;
    }
  }
  if (line_no == 0) rep.malformed.push_back({0, "empty log"});
  for (const auto& [id, q] : requests)
    if (q.endings != 1) bad(q.line, "request " + at(id) + " never terminated");
  std::sort(rep.violations.begin(), rep.violations.end(),
            [](const Finding& a, const Finding& b) { return a.line < b.line; });
  return rep;
}

void write_audit(std::ostream& out, const AuditReport& r, double tick_s) {
  char buf[128];
  auto real = [&](const char* name, double v) {
    if (std::isnan(v)) std::snprintf(buf, sizeof buf, "%s,nan\n", name);
    else std::snprintf(buf, sizeof buf, "%s,%.6f\n", name, v);
    out << buf;
  };
  out << "metric,value\n";
  real("mean_delivery_delay_s", r.mean_delay_s(tick_s));
  real("delivery_rate", r.delivery_rate());
  real("mean_travel_time_s", r.mean_travel_time_s(tick_s));
  out << "computation_cost," << r.computation_cost() << '\n';
  out << "requested," << r.requested << '\n';
  out << "delivered," << r.delivered << '\n';
  out << "failures," << r.failed << '\n';
  out << "trips," << r.trips << '\n';
  out << "budget_violations," << r.budget_violations << '\n';
  for (const auto& [name, value] : r.cost) out << "cost_" << name << ',' << value << '\n';
  for (const Finding& f : r.malformed) out << "# malformed line " << f.line << ": " << f.message << '\n';
  for (const Finding& f : r.violations) out << "# violation line " << f.line << ": " << f.message << '\n';
}

namespace {

std::map<std::string, std::string> metric_rows(std::istream& in) {
  std::map<std::string, std::string> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma != std::string::npos && line[0] != '#') rows[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return rows;
}

}  // namespace

std::vector<std::string> compare_with_runner(const AuditReport& report, double tick_s, std::istream& runner_csv) {
  std::stringstream mine;
  write_audit(mine, report, tick_s);
  const auto ours = metric_rows(mine);
  const auto theirs = metric_rows(runner_csv);
  std::vector<std::string> out;
  for (const auto& [name, value] : ours) {
    const auto it = theirs.find(name);
    if (it == theirs.end()) out.push_back(name + ": missing from the runner report");
    else if (it->second != value) out.push_back(name + ": runner " + it->second + ", audit " + value);
  }
  return out;
}

}  // namespace vesonet::audit
