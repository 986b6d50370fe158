#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "vesonet/error.hpp"
#include "vesonet/sim.hpp"

using namespace vesonet;

namespace {

// One consumer, nobody else, no RSUs and no requests: a bare mobility world.
Scenario lone_driver() {
  Scenario s;
  s.consumers = 1;
  s.providers = 0;
  s.meta = 0;
  s.rsu_count = 0;
  s.request_rate_per_s = 0;
  s.velocity_cap_mps = 10;
  s.run_length_ticks = 100;
  return s;
}

Scenario short_run(std::int64_t ticks = 250) {
  Scenario s;
  s.run_length_ticks = ticks;
  return s;
}

std::string csv_of(const std::vector<Event>& events) {
  std::ostringstream out;
  write_event_log_csv(out, events);
  return out.str();
}

}  // namespace

TEST_CASE("vehicle mid-segment on green advances speed times tick") {
  World w(lone_driver());
  const SegmentId seg = 0;
  w.place(0, seg, 10000, {}, w.network().segment(seg).to);
  w.step();
  CHECK(w.vehicle(0).offset_cm == 11000);
  CHECK(w.vehicle(0).moved_cm == 1000);
  CHECK_FALSE(w.vehicle(0).waiting);
}

TEST_CASE("red light pins the vehicle at the segment end") {
  World w(lone_driver());
  const RoadNetwork& net = w.network();
  std::optional<SegmentId> seg;
  for (SegmentId s = 0; s < net.segment_count() && !seg; ++s) {
    const auto& sig = net.intersection(net.segment(s).to).signal;
    if (sig && !sig->is_green(0.0) && sig->remaining_red(0.0) >= 3.0) seg = s;
  }
  REQUIRE(seg.has_value());
  const auto& segment = net.segment(*seg);
  const auto len = static_cast<std::int64_t>(std::llround(segment.length_m * 100));
  NodeId beyond = segment.to;
  const SegmentId next = net.out_segments(segment.to).front();
  beyond = net.segment(next).to;
  w.place(0, *seg, len - 500, {next}, beyond);
  w.step();
  CHECK(w.vehicle(0).offset_cm == len);
  CHECK(w.vehicle(0).waiting);
  w.step();
  CHECK(w.vehicle(0).segment == *seg);
  CHECK(w.vehicle(0).offset_cm == len);
  CHECK(w.vehicle(0).moved_cm == 0);
}

TEST_CASE("accident halts every vehicle on the segment for its duration") {
  Scenario s = lone_driver();
  s.consumers = 2;
  s.accidents = {{0, 0, 10}};
  World w(s);
  const NodeId end = w.network().segment(0).to;
  w.place(0, 0, 0, {}, end);
  w.place(1, 0, 10000, {}, end);
  for (int t = 0; t < 10; ++t) {
    w.step();
    CHECK(w.segment_halted(0));
    CHECK(w.vehicle(0).offset_cm == 0);
    CHECK(w.vehicle(1).offset_cm == 10000);
  }
  w.step();
  CHECK_FALSE(w.segment_halted(0));
  CHECK(w.vehicle(0).offset_cm == 1000);
  int starts = 0, ends = 0;
  for (const Event& e : w.events()) {
    starts += e.type == EventType::accident_start;
    ends += e.type == EventType::accident_end;
  }
  CHECK(starts == 1);
  CHECK(ends == 1);
}

TEST_CASE("per-tick displacement never exceeds the cap") {
  Scenario s = short_run(200);
  s.velocity_cap_mps = 12;
  World w(s);
  const auto cap_cm = static_cast<std::int64_t>(std::llround(12 * s.tick_duration_s * 100));
  while (!w.done()) {
    w.step();
    for (const Vehicle& v : w.vehicles()) {
      CHECK(v.moved_cm <= cap_cm);
      CHECK(v.offset_cm >= 0);
      CHECK(v.offset_cm <= std::llround(w.network().segment(v.segment).length_m * 100));
    }
  }
}

TEST_CASE("same scenario and seed give byte-identical logs") {
  const Scenario s = short_run();
  const RunResult a = run(s);
  const RunResult b = run(s);
  CHECK(csv_of(a.events) == csv_of(b.events));
  CHECK(a.report == b.report);
  Scenario other = s;
  other.rng_seed = 2;
  CHECK(csv_of(run(other).events) != csv_of(a.events));
}

TEST_CASE("every interest ends exactly once") {
  for (Policy p : {Policy::vesonet, Policy::baseline}) {
    Scenario s = short_run(400);
    s.policy = p;
    const RunResult r = run(s);
    std::map<RequestId, int> created, ended;
    for (const Event& e : r.events) {
      if (e.type == EventType::interest_create) ++created[e.request];
      if (e.type == EventType::delivered_v2v || e.type == EventType::delivered_rsu ||
          e.type == EventType::delivery_failure)
        ++ended[e.request];
      if (e.type == EventType::local_hit) CHECK(created.count(e.request) == 0);
    }
    CHECK_FALSE(created.empty());
    CHECK(created.size() == ended.size());
    for (const auto& [id, n] : created) {
      CHECK(n == 1);
      CHECK(ended[id] == 1);
    }
    CHECK(r.report.requested == r.report.delivered + r.report.failures);
  }
}

TEST_CASE("hop counts stay within the limit") {
  const RunResult r = run(short_run());
  for (const Event& e : r.events)
    if (e.type == EventType::interest_forward) CHECK(e.hops <= kMaxHops);
}

TEST_CASE("vesonet consumers stay within the detour budget") {
  Scenario s = short_run(400);
  s.accident_count = 3;
  s.accident_start_tick = 40;
  const RunResult r = run(s);
  CHECK(r.report.trips > 0);
  CHECK(r.report.budget_violations == 0);
}

TEST_CASE("zero consumers gives no delivery data") {
  Scenario s = short_run(100);
  s.consumers = 0;
  const RunResult r = run(s);
  CHECK_FALSE(r.report.has_delivery_data());
  CHECK(std::isnan(r.report.delivery_rate()));
  CHECK(std::isnan(r.report.mean_delay_s()));
  std::ostringstream out;
  write_metrics_csv(out, r.report);
  CHECK(out.str().find("no_delivery_data,1") != std::string::npos);
  CHECK(out.str().find("mean_travel_time_s,") != std::string::npos);
}

TEST_CASE("request streams do not depend on the policy") {
  auto stream = [](Policy p) {
    Scenario s = short_run();
    s.policy = p;
    std::vector<std::tuple<std::int64_t, VehicleId, ContentId>> out;
    for (const Event& e : run(s).events)
      if (e.type == EventType::interest_create || e.type == EventType::local_hit)
        out.emplace_back(e.tick, e.from, e.content);
    return out;
  };
  const auto a = stream(Policy::vesonet);
  CHECK_FALSE(a.empty());
  CHECK(a == stream(Policy::baseline));
}

TEST_CASE("positions agree across policies until a vehicle's routes diverge") {
  Scenario s = short_run(150);
  s.policy = Policy::vesonet;
  World a(s);
  s.policy = Policy::baseline;
  World b(s);
  std::vector<bool> diverged(a.vehicles().size(), false);
  std::size_t compared = 0;
  while (!a.done()) {
    a.step();
    b.step();
    for (std::size_t i = 0; i < diverged.size(); ++i) {
      const Vehicle& x = a.vehicles()[i];
      const Vehicle& y = b.vehicles()[i];
      if (x.route != y.route || x.destination != y.destination) diverged[i] = true;
      if (diverged[i]) continue;
      ++compared;
      CHECK(x.position == y.position);
    }
  }
  CHECK(compared > 0);
}

TEST_CASE("no requests means no dissemination cost") {
  Scenario s = short_run(100);
  s.request_rate_per_s = 0;
  const RunResult r = run(s);
  CHECK(r.report.requested == 0);
  CHECK(r.report.cost.at("dissemination") == 0);
  CHECK(r.cost.dissemination.total() == 0);
  CHECK(r.report.cost.at("planning") > 0);
}

TEST_CASE("cost rows match the subsystem counters") {
  const RunResult r = run(short_run());
  CHECK(r.report.cost.at("planning") == static_cast<std::int64_t>(r.cost.planning.total()));
  CHECK(r.report.cost.at("recommendation") == static_cast<std::int64_t>(r.cost.recommendation.total()));
  CHECK(r.report.cost.at("rl") == static_cast<std::int64_t>(r.cost.rl.total()));
  CHECK(r.report.cost.at("dissemination") == static_cast<std::int64_t>(r.cost.dissemination.total()));
  CHECK(r.cost.rl.nn_forward > 0);
  Scenario b = short_run();
  b.policy = Policy::baseline;
  const RunResult base = run(b);
  CHECK(base.report.cost.at("rl") == 0);
  CHECK(base.report.cost.at("recommendation") == 0);
}

TEST_CASE("doubling consumers at most doubles recommendation work plus a catalog term") {
  Rng rng(5);
  const int items = 40, dim = 6;
  std::vector<ContentId> ids;
  std::vector<double> vec;
  for (int i = 0; i < items; ++i) {
    ids.push_back(i);
    for (int k = 0; k < dim; ++k) vec.push_back(rng.uniform(-1, 1));
  }
  const EmbeddingModel model(ids, dim, vec);
  std::vector<NearbyProvider> nearby{{1, {}}, {2, {}}};
  for (int k = 0; k < 10; ++k) nearby[k % 2].catalog.push_back(static_cast<ContentId>(rng.below(items)));
  std::vector<Vehicle2Vec> consumers;
  for (int c = 0; c < 16; ++c) {
    std::vector<ContentId> h;
    for (int k = 0; k < 5; ++k) h.push_back(static_cast<ContentId>(rng.below(items)));
    consumers.push_back(vehicle2vec(model, 100 + c, h));
  }
  for (std::size_t n : {2u, 4u, 8u}) {
    std::uint64_t one = 0, two = 0;
    intersection_recommendation(model, {}, nearby, std::span(consumers).first(n), SimilarityThreshold{0.3}, &one);
    intersection_recommendation(model, {}, nearby, std::span(consumers).first(2 * n), SimilarityThreshold{0.3}, &two);
    CHECK(two <= 2 * one + static_cast<std::uint64_t>(items));
    CHECK(two >= one);
  }
}

TEST_CASE("delivery rate is one when every request is answered") {
  const std::vector<Event> log{
      {0, EventType::interest_create, 1, 5, 3},
      {2, EventType::delivered_rsu, 1, 5, 1000000, 3},
      {4, EventType::local_hit, 2, 6, 3, 3},
  };
  const MetricsReport r = compute_metrics(log, 1.0);
  CHECK(r.delivery_rate() == 1.0);
  CHECK(r.mean_delay_s() == doctest::Approx(1.0));
}

TEST_CASE("sweep returns one row per value, policy and seed in a fixed order") {
  Scenario s = short_run(80);
  const std::vector<double> values{30, 60};
  const auto rows = sweep(s, SweepAxis::density, values, 2, 1);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].value == 30);
  CHECK(rows[0].policy == Policy::vesonet);
  CHECK(rows[1].seed == s.rng_seed + 1);
  CHECK(rows[2].policy == Policy::baseline);
  CHECK(rows[7].value == 60);
  const auto parallel = sweep(s, SweepAxis::density, values, 2, 3);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(parallel[i].report == rows[i].report);
  std::ostringstream out;
  write_sweep_csv(out, rows);
  CHECK(out.str().rfind("axis,value,policy,seed,", 0) == 0);
  CHECK_THROWS_AS(sweep(s, SweepAxis::density, std::span(values).first(1)), ConfigError);
}

TEST_CASE("invalid scenarios are rejected with every error") {
  Scenario s;
  s.epsilon_s = -1;
  s.tick_duration_s = 0;
  try {
    run(s);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("epsilon_s") != std::string::npos);
    CHECK(what.find("tick_duration_s") != std::string::npos);
  }
  World w(lone_driver());
  CHECK_THROWS_AS(w.place(0, 0, -5, {}, 0), ConfigError);
}
