#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "vesonet/content_embed.hpp"
#include "vesonet/cost.hpp"
#include "vesonet/dissemination.hpp"
#include "vesonet/metrics.hpp"
#include "vesonet/provider_rl.hpp"
#include "vesonet/scenario.hpp"
#include "vesonet/social_path.hpp"

namespace vesonet {

enum class Role { consumer, provider, meta };

struct Vehicle {
  VehicleId id = 0;
  Role role = Role::consumer;
  Rng trip_rng;
  Rng request_rng;

  SegmentId segment = 0;
  std::int64_t offset_cm = 0;
  /// Distance covered during the last tick.
  std::int64_t moved_cm = 0;
  /// Pinned at the segment end by a red light.
  bool waiting = false;
  Position position;

  NodeId trip_source = 0;
  NodeId destination = 0;
  std::deque<SegmentId> plan;       // segments after the current one
  std::vector<SegmentId> route;     // segments entered this trip, current one last
  double route_time_s = 0.0;        // modelled travel time of `route`
  std::int64_t trip_start_tick = 0;
  double bound_s = 0.0;
  double shortest_s = 0.0;

  // Providers.
  ProviderCache cache;
  std::vector<SegmentId> expected;  // declared remaining path, current segment first
  bool stop_handled = false;
  struct Pending {
    bool valid = false;
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
  } pending;

  // Consumers.
  std::set<ContentId> held;
  std::vector<ContentId> wishlist;
  Vehicle2Vec profile;

  // Metadata vehicles.
  MetaDataIndex index;
};

struct SubsystemCost {
  CostCounter planning;
  CostCounter recommendation;
  CostCounter rl;
  CostCounter dissemination;
};

/// Deterministic fixed-step world. Phase order per tick: accidents and replanning,
/// signals and motion (with intersection decisions), location reports, requests,
/// interest forwarding, RSU fallback, transfers, intersection recommendation.
class World {
 public:
  explicit World(const Scenario& scenario);
  ~World();
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  void step();
  /// Runs to the end and appends the per-subsystem cost rows.
  void finish();

  std::int64_t tick() const { return tick_; }
  bool done() const { return tick_ >= scenario_.run_length_ticks; }
  const Scenario& scenario() const { return scenario_; }
  const RoadNetwork& network() const { return net_; }
  const std::vector<Event>& events() const { return events_; }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  Vehicle& vehicle(VehicleId id) { return vehicles_.at(static_cast<std::size_t>(id)); }
  const SubsystemCost& cost() const { return cost_; }
  const std::vector<RsuSite>& rsus() const { return rsus_; }
  bool segment_halted(SegmentId s) const { return halted_.at(s); }
  std::int64_t item_size(ContentId c) const;
  const DQNAgent* agent() const { return agents_.empty() ? nullptr : agents_.front().get(); }

  /// Places a moving vehicle on `segment` at `offset_cm` with the remaining plan and
  /// destination given (test and tooling hook).
  void place(VehicleId id, SegmentId segment, std::int64_t offset_cm, std::vector<SegmentId> plan, NodeId destination);

 private:
  struct Request;

  void log(EventType type, RequestId req, ContentId content, VehicleId from, VehicleId to, std::int64_t hops,
           std::int64_t bytes);
  void setup_content();
  void update_accidents();
  void replan_consumers();
  void move(Vehicle& v);
  void start_trip(Vehicle& v, NodeId at);
  void end_trip(Vehicle& v);
  void enter(Vehicle& v, SegmentId next);
  SegmentId next_segment(Vehicle& v, NodeId node);
  SegmentId rl_decision(Vehicle& v, NodeId node);
  void refresh_positions();
  void report_locations();
  void issue_requests();
  void forward_packets();
  void start_rsu_downloads();
  void run_transfers();
  void recommend();
  const std::vector<int>& planning_counts();
  const std::vector<double>& times_to_dest(NodeId dest);
  std::size_t radio_index(VehicleId id) const;
  VehicleId nearest_meta(const Vehicle& from) const;
  Position segment_point(SegmentId s, std::int64_t offset_cm) const;
  double now_s() const { return static_cast<double>(tick_) * scenario_.tick_duration_s; }

  Scenario scenario_;
  RoadNetwork net_;         // physics, and planning for the social policy (knows closures)
  RoadNetwork static_net_;  // planning for the baseline (never sees closures)
  std::int64_t tick_ = 0;
  std::vector<Event> events_;
  std::vector<Vehicle> vehicles_;
  std::vector<VehicleId> consumers_, providers_, metas_;
  std::vector<RsuSite> rsus_;
  std::vector<Accident> accidents_;
  std::vector<bool> halted_;
  std::vector<std::int64_t> length_cm_;
  std::vector<std::int64_t> speed_cm_;

  std::vector<ContentItem> catalog_;
  std::map<ContentId, std::int64_t> sizes_;
  std::unique_ptr<EmbeddingModel> model_;
  std::vector<std::unique_ptr<DQNAgent>> agents_;

  std::vector<int> seg_consumers_, seg_providers_;
  std::vector<int> plan_counts_;
  bool plan_counts_dirty_ = true;
  std::map<NodeId, std::vector<double>> times_to_cache_;

  std::vector<Position> radio_nodes_;
  Adjacency adjacency_;
  std::vector<std::uint32_t> component_;

  RequestId next_request_ = 0;
  std::map<RequestId, Request> requests_;

  std::int64_t retry_ticks_ = 30;
  std::int64_t deadline_ticks_ = 120;
  std::int64_t latency_ticks_ = 2;
  std::int64_t range_cm_ = 45000;
  SubsystemCost cost_;
  SearchStats search_stats_;
  bool finished_ = false;
};

struct RunResult {
  MetricsReport report;
  std::vector<Event> events;
  std::vector<TrainingCurvePoint> rl_curve;
  SubsystemCost cost;
};

/// Runs the scenario to completion. Throws ConfigError listing every validation failure.
RunResult run(const Scenario& scenario);

struct SweepRow {
  SweepAxis axis = SweepAxis::density;
  double value = 0.0;
  Policy policy = Policy::vesonet;
  std::uint64_t seed = 0;
  MetricsReport report;
};

/// One run per (value, policy, seed); seeds are base, base+1, ... Runs execute on up to
/// `jobs` threads; rows come back in (value, policy, seed) order whatever the thread count.
std::vector<SweepRow> sweep(const Scenario& base, SweepAxis axis, std::span<const double> values, int seeds = 1,
                            int jobs = 1, std::span<const Policy> policies = {});

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace vesonet
