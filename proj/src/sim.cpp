#include "vesonet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>

#include "vesonet/error.hpp"
#include "vesonet/synthetic.hpp"

namespace vesonet {

struct World::Request {
  enum class Stage { routing, waiting, awaiting_rsu, transferring };
  RequestId id = 0;
  VehicleId consumer = 0;
  ContentId content = 0;
  std::int64_t created = 0;
  int retries = 0;
  std::int64_t next_retry = 0;
  Stage stage = Stage::routing;
  InterestPacket packet;
  ContentMessage message;
  int answer_hops = 0;
  bool paused = false;
};

namespace {

std::int64_t to_cm(double m) { return std::llround(m * 100.0); }
std::int64_t to_ms(double s) { return std::llround(s * 1000.0); }

std::int64_t ticks_for(double seconds, double tick_s) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(seconds / tick_s - 1e-9)));
}

}  // namespace

World::World(const Scenario& scenario) : scenario_(scenario) {
  const auto errors = validate_scenario(scenario_);
  if (!errors.empty()) {
    std::string all = "invalid scenario:";
    for (const auto& e : errors) all += "\n  " + e;
    throw ConfigError(all);
  }
  net_ = build_network(scenario_);
  static_net_ = net_;
  const double dt = scenario_.tick_duration_s;
  retry_ticks_ = ticks_for(scenario_.retry_s, dt);
  deadline_ticks_ = ticks_for(scenario_.deadline_s, dt);
  latency_ticks_ = scenario_.rsu_latency_s > 0 ? ticks_for(scenario_.rsu_latency_s, dt) : 0;
  range_cm_ = to_cm(scenario_.radio_range_m);

  const std::size_t nseg = net_.segment_count();
  halted_.assign(nseg, false);
  seg_consumers_.assign(nseg, 0);
  seg_providers_.assign(nseg, 0);
  for (SegmentId s = 0; s < nseg; ++s) {
    const auto& seg = net_.segment(s);
    length_cm_.push_back(to_cm(seg.length_m));
    speed_cm_.push_back(std::max<std::int64_t>(1, to_cm(seg.speed_limit_mps * dt)));
  }

  for (const RsuPlacement& p : effective_rsus(scenario_, net_)) {
    const double off = p.offset_m < 0 ? net_.segment(p.segment).length_m / 2 : p.offset_m;
    rsus_.push_back({kRsuIdBase + static_cast<VehicleId>(rsus_.size()), segment_point(p.segment, to_cm(off))});
  }
  accidents_ = effective_accidents(scenario_, net_);

  // Vehicles: consumers, then providers, then metadata hosts.
  const int total = scenario_.consumers + scenario_.providers + scenario_.meta;
  for (int i = 0; i < total; ++i) {
    Vehicle v;
    v.id = i;
    v.role = i < scenario_.consumers ? Role::consumer
             : i < scenario_.consumers + scenario_.providers ? Role::provider
                                                             : Role::meta;
    v.trip_rng = Rng(scenario_.rng_seed, 0x10000 + static_cast<std::uint64_t>(i));
    v.request_rng = Rng(scenario_.rng_seed, 0x20000 + static_cast<std::uint64_t>(i));
    (v.role == Role::consumer ? consumers_ : v.role == Role::provider ? providers_ : metas_).push_back(v.id);
    vehicles_.push_back(std::move(v));
  }

  setup_content();

  if (scenario_.policy == Policy::vesonet && !providers_.empty()) {
    const std::size_t count = scenario_.dqn.shared_policy ? 1 : providers_.size();
    for (std::size_t k = 0; k < count; ++k) {
      DQNConfig c = scenario_.dqn;
      c.rng_seed = Rng::mix(scenario_.dqn.rng_seed ^ Rng::mix(scenario_.rng_seed + k));
      agents_.push_back(std::make_unique<DQNAgent>(c));
    }
  }

  // Metadata hosts park on distinct intersections where possible.
  std::vector<NodeId> nodes;
  for (const auto& n : net_.intersections()) nodes.push_back(n.id);
  Rng park(scenario_.rng_seed, 0x6d657461);
  for (std::size_t i = nodes.size(); i > 1; --i) std::swap(nodes[i - 1], nodes[park.below(i)]);
  for (std::size_t k = 0; k < metas_.size(); ++k) {
    Vehicle& m = vehicle(metas_[k]);
    const auto& node = net_.intersection(nodes[k % nodes.size()]);
    m.position = {to_cm(node.x), to_cm(node.y)};
    m.index = MetaDataIndex(m.id, m.position);
  }

  for (VehicleId id : providers_) {
    Vehicle& p = vehicle(id);
    p.cache = ProviderCache(id, scenario_.cache_capacity_bytes);
    log(EventType::provider_join, -1, -1, -1, id, 0, scenario_.cache_capacity_bytes);
  }
  if (scenario_.policy == Policy::vesonet && scenario_.warm_top_p > 0) {
    std::vector<ContentItem> ranked = catalog_;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const ContentItem& a, const ContentItem& b) { return a.popularity > b.popularity; });
    ranked.resize(std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(scenario_.warm_top_p)));
    for (VehicleId id : providers_) {
      Vehicle& p = vehicle(id);
      for (const ContentItem& item : ranked) {
        const auto evicted = p.cache.insert(item.id, item.size_bytes);
        if (!evicted) continue;
        for (ContentId e : *evicted) log(EventType::evict, -1, e, -1, id, 0, item_size(e));
        log(EventType::cache_fill, -1, item.id, -1, id, 0, item.size_bytes);
      }
    }
  }

  for (auto& v : vehicles_) {
    if (v.role == Role::meta) continue;
    const NodeId at = net_.intersections()[v.trip_rng.below(net_.intersection_count())].id;
    start_trip(v, at);
  }
  refresh_positions();
}

World::~World() = default;

std::int64_t World::item_size(ContentId c) const { return sizes_.at(c); }

void World::log(EventType type, RequestId req, ContentId content, VehicleId from, VehicleId to, std::int64_t hops,
                std::int64_t bytes) {
  events_.push_back({tick_, type, req, content, from, to, hops, bytes});
}

void World::setup_content() {
  ConsumptionLog log_records;
  if (!scenario_.consumption_log.empty()) {
    std::string file = scenario_.consumption_log;
    if (!scenario_.base_dir.empty() && file.front() != '/') file = scenario_.base_dir + "/" + file;
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open consumption log " + file);
    log_records = read_consumption_csv(in);
  } else {
    log_records = gen_log(scenario_.synthetic).log;
  }
  if (log_records.empty()) throw ConfigError("empty consumption log");

  std::map<ContentId, std::int64_t> popularity;
  std::map<UserId, std::vector<ConsumptionRecord>> by_user;
  for (const auto& r : log_records) {
    ++popularity[r.content];
    by_user[r.user].push_back(r);
  }
  const std::int64_t span = scenario_.item_size_max_bytes - scenario_.item_size_min_bytes;
  for (const auto& [id, pop] : popularity) {
    Rng size_rng(scenario_.rng_seed, 0x73697a65ULL + static_cast<std::uint64_t>(id));
    const std::int64_t size =
        scenario_.item_size_min_bytes + static_cast<std::int64_t>(size_rng.below(static_cast<std::uint64_t>(span) + 1));
    sizes_[id] = size;
    catalog_.push_back({id, size, pop});
  }

  std::vector<UserId> users;
  for (auto& [u, recs] : by_user) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const ConsumptionRecord& a, const ConsumptionRecord& b) { return a.timestamp < b.timestamp; });
    users.push_back(u);
  }

  if (scenario_.policy == Policy::vesonet && catalog_.size() > static_cast<std::size_t>(scenario_.embedding.dimension)) {
    const ContentGraph graph = build_content_graph(log_records, 1);
    model_ = std::make_unique<EmbeddingModel>(train_embeddings(graph, scenario_.embedding));
  }

  // Each consumer vehicle carries two passengers; older listens form the profile, newer ones the wishes.
  for (VehicleId id : consumers_) {
    Vehicle& v = vehicle(id);
    Rng pick(scenario_.rng_seed, 0x75736572ULL + static_cast<std::uint64_t>(id));
    std::vector<ContentId> history;
    for (int k = 0; k < 2; ++k) {
      const auto& recs = by_user.at(users[pick.below(users.size())]);
      const std::size_t half = recs.size() / 2;
      for (std::size_t i = 0; i < recs.size(); ++i) (i < half ? history : v.wishlist).push_back(recs[i].content);
    }
    if (model_) v.profile = vehicle2vec(*model_, id, history);
  }
}

Position World::segment_point(SegmentId s, std::int64_t offset_cm) const {
  const auto& seg = net_.segment(s);
  const auto& a = net_.intersection(seg.from);
  const auto& b = net_.intersection(seg.to);
  const std::int64_t ax = to_cm(a.x), ay = to_cm(a.y), bx = to_cm(b.x), by = to_cm(b.y);
  const std::int64_t len = std::max<std::int64_t>(1, length_cm_.empty() ? to_cm(seg.length_m) : length_cm_[s]);
  return {ax + (bx - ax) * offset_cm / len, ay + (by - ay) * offset_cm / len};
}

const std::vector<double>& World::times_to_dest(NodeId dest) {
  auto it = times_to_cache_.find(dest);
  if (it == times_to_cache_.end()) it = times_to_cache_.emplace(dest, times_to(net_, dest)).first;
  return it->second;
}

const std::vector<int>& World::planning_counts() {
  if (plan_counts_dirty_) {
    plan_counts_.assign(net_.segment_count(), 0);
    std::vector<SegmentId> seen;
    for (VehicleId id : providers_) {
      const Vehicle& p = vehicle(id);
      seen.assign(p.expected.begin(), p.expected.end());
      seen.push_back(p.segment);
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      for (SegmentId s : seen) ++plan_counts_[s];
    }
    plan_counts_dirty_ = false;
  }
  return plan_counts_;
}

// ---------------------------------------------------------------------------
// Trips and motion

void World::start_trip(Vehicle& v, NodeId at) {
  const bool social = scenario_.policy == Policy::vesonet;
  const RoadNetwork& plan_net = social ? net_ : static_net_;
  const std::size_t n = net_.intersection_count();
  Path sh;
  NodeId dest = at;
  for (int attempt = 0; attempt < 8; ++attempt) {
    NodeId cand = net_.intersections()[v.trip_rng.below(n - 1)].id;
    if (cand == at) cand = net_.intersections()[n - 1].id;
    try {
      sh = shortest_path(plan_net, at, cand);
      dest = cand;
      break;
    } catch (const NoPathError&) {
    }
  }
  if (dest == at) {
    // Everything reachable is closed off; fall back to the static map.
    NodeId cand = net_.intersections()[v.trip_rng.below(n - 1)].id;
    if (cand == at) cand = net_.intersections()[n - 1].id;
    sh = shortest_path(static_net_, at, cand);
    dest = cand;
  }

  v.trip_source = at;
  v.destination = dest;
  v.trip_start_tick = tick_;
  v.shortest_s = travel_time(sh, plan_net);
  v.bound_s = v.shortest_s + scenario_.epsilon_s;
  v.route.clear();
  v.route_time_s = 0.0;

  Path plan = sh;
  if (v.role == Role::consumer && social) {
    SocialSearchOptions opts;
    opts.segment_providers = planning_counts();
    opts.stats = &search_stats_;
    plan = shortest_social_path(net_, at, dest, DetourBudget{scenario_.epsilon_s}, opts);
  }
  if (v.role == Role::provider) {
    v.expected = sh.segments;
    plan_counts_dirty_ = true;
  }
  v.plan.assign(plan.segments.begin(), plan.segments.end());
  if (v.role == Role::consumer)
    log(EventType::trip_start, -1, -1, v.id, -1, static_cast<std::int64_t>(plan.segments.size()), to_ms(v.bound_s));

  SegmentId first;
  if (v.role == Role::provider && social) {
    first = rl_decision(v, at);
  } else {
    first = v.plan.front();
    v.plan.pop_front();
  }
  v.segment = first;
  v.offset_cm = 0;
  enter(v, first);
}

void World::enter(Vehicle& v, SegmentId next) {
  const RoadSegment& seg = net_.segment(next);
  if (!v.route.empty()) v.route_time_s += net_.signal_wait(seg.from);
  v.route_time_s += seg.base_travel_time_s;
  v.route.push_back(next);
  v.segment = next;
  v.offset_cm = 0;
  v.stop_handled = false;
  if (v.role == Role::provider) {
    if (!v.expected.empty() && v.expected.front() == next) v.expected.erase(v.expected.begin());
    plan_counts_dirty_ = true;
  }
}

void World::end_trip(Vehicle& v) {
  if (v.role == Role::consumer)
    log(EventType::trip_end, -1, -1, v.id, -1, static_cast<std::int64_t>(v.route.size()), to_ms(v.route_time_s));
  if (v.role == Role::provider && v.pending.valid) {
    DQNAgent& agent = *agents_[scenario_.dqn.shared_policy ? 0 : static_cast<std::size_t>(v.id - providers_.front())];
    agent.remember({v.pending.state, v.pending.action, v.pending.reward,
                    std::vector<double>(agent.state_size(), 0.0), {}, true});
    agent.train_step();
    v.pending.valid = false;
  }
}

SegmentId World::rl_decision(Vehicle& v, NodeId node) {
  DQNAgent& agent = *agents_[scenario_.dqn.shared_policy ? 0 : static_cast<std::size_t>(v.id - providers_.front())];
  const std::size_t K = scenario_.dqn.max_actions;
  const auto& out = net_.out_segments(node);
  const std::size_t count = std::min(out.size(), K);
  const auto& tt = times_to_dest(v.destination);
  const double elapsed = v.route_time_s + (v.route.empty() ? 0.0 : net_.signal_wait(node));
  std::vector<double> cd(count);
  std::vector<bool> feasible(count, false);
  for (std::size_t i = 0; i < count; ++i) {
    const SegmentId e = out[i];
    const RoadSegment& seg = net_.segment(e);
    cd[i] = seg_consumers_[e] - seg_providers_[e];
    if (net_.closed(e)) continue;
    double rest = 0.0;
    if (seg.to != v.destination) {
      const double t = tt[net_.index_of(seg.to)];
      if (!std::isfinite(t)) continue;
      rest = net_.signal_wait(seg.to) + t;
    }
    feasible[i] = elapsed + seg.base_travel_time_s + rest <= v.bound_s + kTimeTolerance;
  }
  const double here = tt[net_.index_of(node)];
  const RLState state =
      make_state(cd, feasible, (v.bound_s - elapsed - here) / std::max(scenario_.epsilon_s, 1e-9),
                 here / std::max(v.shortest_s, 1e-9), K, scenario_.dqn.cd_scale);

  SegmentId chosen;
  if (!state.any_feasible()) {
    // Budget already exhausted (closures): take the open shortest path and widen the bound.
    Path rest;
    try {
      rest = shortest_path(net_, node, v.destination);
    } catch (const NoPathError&) {
      rest = shortest_path(static_net_, node, v.destination);
    }
    chosen = rest.segments.front();
    v.bound_s = elapsed + travel_time(rest, static_net_) + scenario_.epsilon_s;
    v.pending.valid = false;
  } else {
    if (v.pending.valid) {
      agent.remember({v.pending.state, v.pending.action, v.pending.reward, state.features, state.feasible, false});
      agent.train_step();
    }
    const int a = agent.act(state);
    const double old_cd = v.route.empty() ? 0.0 : seg_consumers_[v.segment] - seg_providers_[v.segment];
    v.pending = {true, state.features, a, reward(old_cd, cd[static_cast<std::size_t>(a)], scenario_.dqn.reward_mode)};
    chosen = out[static_cast<std::size_t>(a)];
  }
  // Declared path: the chosen exit, then the quickest way on.
  v.expected.assign(1, chosen);
  const NodeId next = net_.segment(chosen).to;
  if (next != v.destination) {
    try {
      const Path rest = shortest_path(net_, next, v.destination);
      v.expected.insert(v.expected.end(), rest.segments.begin(), rest.segments.end());
    } catch (const NoPathError&) {
    }
  }
  plan_counts_dirty_ = true;
  return chosen;
}

SegmentId World::next_segment(Vehicle& v, NodeId node) {
  if (v.role == Role::provider && scenario_.policy == Policy::vesonet) return rl_decision(v, node);
  if (v.plan.empty() || net_.segment(v.plan.front()).from != node) {
    // Plan lost sync (should not happen); rejoin the shortest path.
    throw IntegrityError("vehicle " + std::to_string(v.id) + " has no plan at intersection " + std::to_string(node));
  }
  const SegmentId s = v.plan.front();
  v.plan.pop_front();
  return s;
}

void World::move(Vehicle& v) {
  v.moved_cm = 0;
  v.waiting = false;
  if (halted_[v.segment]) return;
  std::int64_t budget = speed_cm_[v.segment];
  for (int guard = 0; guard < 64; ++guard) {
    const std::int64_t len = length_cm_[v.segment];
    if (v.offset_cm < len) {
      const std::int64_t adv = std::min(budget, len - v.offset_cm);
      v.offset_cm += adv;
      v.moved_cm += adv;
      budget -= adv;
      if (v.offset_cm < len) break;
    }
    const NodeId node = net_.segment(v.segment).to;
    if (node == v.destination) {
      end_trip(v);
      start_trip(v, node);
      break;
    }
    const auto& signal = net_.intersection(node).signal;
    if (signal && !signal->is_green(now_s())) {
      v.waiting = true;
      break;
    }
    enter(v, next_segment(v, node));
    if (halted_[v.segment] || budget == 0) break;
  }
  if (v.offset_cm < 0 || v.offset_cm > length_cm_[v.segment])
    throw IntegrityError("vehicle " + std::to_string(v.id) + " left its segment");
}

void World::place(VehicleId id, SegmentId segment, std::int64_t offset_cm, std::vector<SegmentId> plan,
                  NodeId destination) {
  Vehicle& v = vehicle(id);
  if (v.role == Role::meta) throw ConfigError("metadata vehicles do not move");
  if (offset_cm < 0 || offset_cm > length_cm_.at(segment)) throw ConfigError("offset outside the segment");
  v.segment = segment;
  v.offset_cm = offset_cm;
  v.plan.assign(plan.begin(), plan.end());
  v.destination = destination;
  v.trip_source = net_.segment(segment).from;
  v.route.assign(1, segment);
  v.route_time_s = net_.segment(segment).base_travel_time_s;
  v.position = segment_point(segment, offset_cm);
  plan_counts_dirty_ = true;
}

// ---------------------------------------------------------------------------
// Accidents

void World::update_accidents() {
  bool changed = false;
  for (const Accident& a : accidents_) {
    if (a.start_tick == tick_) {
      halted_[a.segment] = true;
      changed = true;
      log(EventType::accident_start, -1, -1, -1, -1, static_cast<std::int64_t>(a.segment), a.duration_ticks);
    }
    if (a.start_tick + a.duration_ticks == tick_) {
      halted_[a.segment] = false;
      changed = true;
      log(EventType::accident_end, -1, -1, -1, -1, static_cast<std::int64_t>(a.segment), 0);
    }
  }
  // Overlapping accidents on one segment keep it halted.
  if (changed) {
    for (const Accident& a : accidents_)
      if (tick_ >= a.start_tick && tick_ < a.start_tick + a.duration_ticks) halted_[a.segment] = true;
  }
  if (!changed || scenario_.policy != Policy::vesonet) return;
  for (SegmentId s = 0; s < net_.segment_count(); ++s) net_.set_closed(s, halted_[s]);
  times_to_cache_.clear();
  replan_consumers();
}

void World::replan_consumers() {
  for (VehicleId id : consumers_) {
    Vehicle& v = vehicle(id);
    if (std::none_of(v.plan.begin(), v.plan.end(), [&](SegmentId s) { return net_.closed(s); })) continue;
    const NodeId from = net_.segment(v.segment).to;
    const double elapsed = v.route_time_s + net_.signal_wait(from);
    SocialSearchOptions opts;
    opts.segment_providers = planning_counts();
    opts.stats = &search_stats_;
    if (auto p = social_graph_pruning(net_, from, v.destination, v.bound_s - elapsed, std::nullopt, opts)) {
      v.plan.assign(p->segments.begin(), p->segments.end());
      continue;
    }
    // No detour fits the budget: keep the plan and wait at the closure.
  }
}

// ---------------------------------------------------------------------------
// Radio and index

std::size_t World::radio_index(VehicleId id) const {
  if (id >= kRsuIdBase) return vehicles_.size() + static_cast<std::size_t>(id - kRsuIdBase);
  return static_cast<std::size_t>(id);
}

void World::refresh_positions() {
  std::fill(seg_consumers_.begin(), seg_consumers_.end(), 0);
  std::fill(seg_providers_.begin(), seg_providers_.end(), 0);
  radio_nodes_.resize(vehicles_.size() + rsus_.size());
  for (auto& v : vehicles_) {
    if (v.role != Role::meta) {
      v.position = segment_point(v.segment, v.offset_cm);
      (v.role == Role::consumer ? seg_consumers_ : seg_providers_)[v.segment] += 1;
    }
    radio_nodes_[static_cast<std::size_t>(v.id)] = v.position;
  }
  for (std::size_t k = 0; k < rsus_.size(); ++k) radio_nodes_[vehicles_.size() + k] = rsus_[k].position;
  adjacency_ = kernels::unit_disk_parallel(radio_nodes_, range_cm_);
  component_ = components(adjacency_);
}

void World::report_locations() {
  if (tick_ % scenario_.report_period_ticks != 0) return;
  for (VehicleId id : providers_) {
    const Vehicle& p = vehicle(id);
    IndexEntry entry{id, p.position, Path{p.trip_source, p.destination, p.expected}, tick_, p.cache.catalog()};
    entry.expected_path.segments.insert(entry.expected_path.segments.begin(), p.segment);
    for (VehicleId m : metas_)
      if (component_[radio_index(m)] == component_[radio_index(id)]) vehicle(m).index.report(entry);
  }
  const std::int64_t horizon = scenario_.staleness_periods * scenario_.report_period_ticks;
  for (VehicleId m : metas_)
    for (VehicleId gone : vehicle(m).index.purge(tick_, horizon)) log(EventType::index_purge, -1, -1, gone, m, 0, 0);
}

// ---------------------------------------------------------------------------
// Requests

void World::issue_requests() {
  using Stage = Request::Stage;
  for (auto it = requests_.begin(); it != requests_.end();) {
    Request& r = it->second;
    if (tick_ >= r.created + deadline_ticks_) {
      log(EventType::delivery_failure, r.id, r.content, -1, r.consumer, r.retries, 0);
      it = requests_.erase(it);
      continue;
    }
    if (r.stage != Stage::transferring && tick_ >= r.next_retry && r.retries < scenario_.max_retries) {
      ++r.retries;
      r.next_retry += retry_ticks_;
      Vehicle& v = vehicle(r.consumer);
      const Path planned{net_.segment(v.segment).from, v.destination, {v.route.back()}};
      r.packet = *create_interest(r.id, r.consumer, {}, planned, r.content, r.created);
      r.packet.requester_path.segments.insert(r.packet.requester_path.segments.end(), v.plan.begin(), v.plan.end());
      r.packet.ttl_hops = scenario_.ttl_hops;
      r.packet.requester_position = v.position;
      r.stage = Stage::routing;
      log(EventType::interest_retry, r.id, r.content, r.consumer, -1, 0, 0);
    }
    ++it;
  }

  if (tick_ >= scenario_.run_length_ticks - deadline_ticks_) return;
  const double p = scenario_.request_rate_per_s * scenario_.tick_duration_s;
  if (p <= 0) return;
  for (VehicleId id : consumers_) {
    Vehicle& v = vehicle(id);
    if (v.wishlist.empty() || !v.request_rng.bernoulli(p)) continue;
    const ContentId c = v.wishlist[v.request_rng.below(v.wishlist.size())];
    const RequestId rid = next_request_++;
    Path planned{net_.segment(v.segment).from, v.destination, {v.segment}};
    planned.segments.insert(planned.segments.end(), v.plan.begin(), v.plan.end());
    auto packet = create_interest(rid, id, v.held, planned, c, tick_);
    if (!packet) {
      log(EventType::local_hit, rid, c, id, id, 0, 0);
      continue;
    }
    packet->ttl_hops = scenario_.ttl_hops;
    packet->requester_position = v.position;
    Request r;
    r.id = rid;
    r.consumer = id;
    r.content = c;
    r.created = tick_;
    r.next_retry = tick_ + retry_ticks_;
    r.packet = std::move(*packet);
    log(EventType::interest_create, rid, c, id, -1, 0, 0);
    requests_.emplace(rid, std::move(r));
  }
}

void World::forward_packets() {
  using Stage = Request::Stage;
  std::vector<RadioContact> meta_hosts;
  for (VehicleId m : metas_) meta_hosts.push_back({m, vehicle(m).position});
  std::vector<RadioContact> neighbors;

  for (auto& [rid, r] : requests_) {
    if (r.stage != Stage::routing) continue;
    InterestPacket& pk = r.packet;
    for (int guard = 0; guard < 2 * kMaxHops + 4 && r.stage == Stage::routing; ++guard) {
      Vehicle& holder = vehicle(pk.holder);
      const bool stores = holder.role == Role::provider && holder.cache.contains(pk.content);
      if (holder.id == pk.provider && !stores) pk.provider = kNoVehicle;  // stale index entry
      HolderView view{holder.id, holder.position, stores, holder.role == Role::meta ? &holder.index : nullptr,
                      range_cm_, {}};
      if (view.index) {
        // Route discovery from the metadata vehicle: only providers it can currently reach.
        const std::uint32_t at = component_[radio_index(holder.id)];
        view.reachable = [this, at](VehicleId p) { return component_[radio_index(p)] == at; };
      }

      if (scenario_.flood && !stores && pk.hop_count < pk.ttl_hops && !(view.index && pk.provider == kNoVehicle)) {
        // Broadcast: the nearest holder of the content (or metadata vehicle) inside the hop budget.
        const auto hops = hop_distances(adjacency_, static_cast<std::uint32_t>(radio_index(holder.id)),
                                        pk.ttl_hops - pk.hop_count);
        VehicleId best = kNoVehicle;
        int best_hops = 0;
        for (int pass = 0; pass < 2 && best == kNoVehicle; ++pass) {
          for (const Vehicle& c : vehicles_) {
            const int h = hops[radio_index(c.id)];
            if (h <= 0) continue;
            const bool hit = pass == 0 ? c.role == Role::provider && c.cache.contains(pk.content)
                                       : c.role == Role::meta && pk.provider == kNoVehicle;
            if (hit && (best == kNoVehicle || h < best_hops)) {
              best = c.id;
              best_hops = h;
            }
          }
        }
        if (best == kNoVehicle) break;
        log(EventType::interest_forward, rid, pk.content, holder.id, best, pk.hop_count + best_hops, 0);
        pk.holder = best;
        pk.hop_count += best_hops;
        continue;
      }

      if (!stores && pk.hop_count < pk.ttl_hops) {
        // One-hop probe: a neighbouring provider holding the item answers directly.
        const auto at = static_cast<std::uint32_t>(radio_index(holder.id));
        VehicleId direct = kNoVehicle;
        for (std::uint32_t j : adjacency_[at]) {
          if (j >= vehicles_.size()) continue;
          const Vehicle& n = vehicles_[j];
          if (n.role == Role::provider && n.cache.contains(pk.content) &&
              (direct == kNoVehicle || squared_distance(n.position, holder.position) <
                                           squared_distance(vehicles_[direct].position, holder.position)))
            direct = n.id;
        }
        if (direct != kNoVehicle) {
          pk.holder = direct;
          pk.provider = direct;
          ++pk.hop_count;
          log(EventType::interest_forward, rid, pk.content, holder.id, direct, pk.hop_count, 0);
          continue;
        }
      }
      if (!stores && pk.hop_count < pk.ttl_hops && !(view.index && pk.provider == kNoVehicle)) {
        // Goal reachable over the current radio graph: take the fewest-hop route.
        const VehicleId goal = pk.provider != kNoVehicle ? pk.provider : nearest_meta(holder);
        const auto at = static_cast<std::uint32_t>(radio_index(holder.id));
        if (goal != kNoVehicle && component_[radio_index(goal)] == component_[at]) {
          const auto dist = hop_distances(adjacency_, static_cast<std::uint32_t>(radio_index(goal)), -1);
          std::uint32_t next = at;
          for (std::uint32_t j : adjacency_[at])
            if (j < vehicles_.size() && dist[j] >= 0 && dist[j] < dist[next]) next = j;
          if (next != at) {
            pk.holder = static_cast<VehicleId>(next);
            ++pk.hop_count;
            log(EventType::interest_forward, rid, pk.content, holder.id, pk.holder, pk.hop_count, 0);
            continue;
          }
        }
      }

      neighbors.clear();
      for (std::uint32_t j : adjacency_[radio_index(holder.id)])
        if (j < vehicles_.size()) neighbors.push_back({static_cast<VehicleId>(j), radio_nodes_[j]});
      const VehicleId before = holder.id;
      const RouteOutcome out = forward_interest(pk, view, neighbors, meta_hosts, &cost_.dissemination.index_lookups);
      switch (out.action) {
        case RouteAction::answer: {
          holder.cache.touch(pk.content);
          const std::int64_t size = item_size(pk.content);
          r.message = ContentMessage{rid, pk.content, size, size, holder.id, r.consumer, tick_, std::nullopt};
          r.answer_hops = pk.hop_count;
          r.paused = false;
          r.stage = Stage::transferring;
          log(EventType::transfer_start, rid, pk.content, holder.id, r.consumer, pk.hop_count, size);
          break;
        }
        case RouteAction::redirect:
          log(EventType::index_hit, rid, pk.content, before, out.next, pk.hop_count, 0);
          break;
        case RouteAction::index_miss:
          log(EventType::index_miss, rid, pk.content, before, -1, pk.hop_count, 0);
          r.answer_hops = pk.hop_count;
          r.stage = Stage::awaiting_rsu;
          break;
        case RouteAction::forward:
          log(EventType::interest_forward, rid, pk.content, before, out.next, pk.hop_count, 0);
          break;
        case RouteAction::carry:
          guard = 1 << 20;
          break;
        case RouteAction::drop:
          log(EventType::interest_drop, rid, pk.content, before, -1, pk.hop_count, 0);
          r.stage = Stage::waiting;
          break;
      }
    }
  }
}

VehicleId World::nearest_meta(const Vehicle& from) const {
  VehicleId best = kNoVehicle;
  for (VehicleId m : metas_) {
    if (m == from.id) continue;
    if (best == kNoVehicle || squared_distance(vehicles_[m].position, from.position) <
                                  squared_distance(vehicles_[best].position, from.position))
      best = m;
  }
  return best;
}

void World::start_rsu_downloads() {
  using Stage = Request::Stage;
  if (rsus_.empty()) return;
  for (auto& [rid, r] : requests_) {
    if (r.stage != Stage::awaiting_rsu) continue;
    const Vehicle& v = vehicle(r.consumer);
    const RsuSite* best = nullptr;
    for (const RsuSite& s : rsus_) {
      if (component_[radio_index(s.id)] != component_[radio_index(v.id)]) continue;
      if (!best || squared_distance(s.position, v.position) < squared_distance(best->position, v.position)) best = &s;
    }
    if (!best) continue;
    r.message = resolve_via_rsu(r.packet, *best, item_size(r.content), tick_, latency_ticks_);
    r.paused = false;
    r.stage = Stage::transferring;
    log(EventType::transfer_start, rid, r.content, best->id, r.consumer, r.answer_hops, r.message.size_bytes);
  }
}

void World::run_transfers() {
  using Stage = Request::Stage;
  std::map<VehicleId, int> sharers;
  auto linked = [&](const Request& r) {
    return component_[radio_index(r.message.source)] == component_[radio_index(r.message.destination)];
  };
  for (const auto& [rid, r] : requests_)
    if (r.stage == Stage::transferring && tick_ >= r.message.ready_tick && linked(r)) ++sharers[r.message.source];

  for (auto it = requests_.begin(); it != requests_.end();) {
    Request& r = it->second;
    if (r.stage != Stage::transferring || tick_ < r.message.ready_tick) {
      ++it;
      continue;
    }
    const bool from_rsu = r.message.source >= kRsuIdBase;
    if (!linked(r)) {
      if (!r.paused) log(EventType::transfer_pause, r.id, r.content, r.message.source, r.consumer, 0, r.message.remaining_bytes);
      r.paused = true;
      ++it;
      continue;
    }
    if (r.paused) {
      log(EventType::transfer_resume, r.id, r.content, r.message.source, r.consumer, 0, r.message.remaining_bytes);
      r.paused = false;
    }
    const double rate = from_rsu ? scenario_.rsu_rate_bytes_per_s : scenario_.v2v_rate_bytes_per_s;
    const auto bytes = static_cast<std::int64_t>(rate * scenario_.tick_duration_s / sharers.at(r.message.source));
    if (transfer_step(r.message, tick_, bytes) > 0) {
      ++it;
      continue;
    }
    Vehicle& consumer = vehicle(r.consumer);
    consumer.held.insert(r.content);
    log(from_rsu ? EventType::delivered_rsu : EventType::delivered_v2v, r.id, r.content, r.message.source, r.consumer,
        r.answer_hops, 0);
    if (from_rsu && scenario_.policy == Policy::vesonet) {
      std::vector<ProviderSite> sites;
      for (VehicleId id : providers_) {
        const Vehicle& p = vehicle(id);
        if (!p.cache.contains(r.content)) sites.push_back({id, p.position, &p.cache});
      }
      const RsuSite& rsu = rsus_[static_cast<std::size_t>(r.message.source - kRsuIdBase)];
      if (auto target = replica_holder(rsu, sites, range_cm_, r.message.size_bytes)) {
        Vehicle& p = vehicle(*target);
        const auto evicted = p.cache.insert(r.content, r.message.size_bytes);
        for (ContentId e : evicted.value_or(std::vector<ContentId>{}))
          log(EventType::evict, -1, e, -1, p.id, 0, item_size(e));
        log(EventType::replicate, r.id, r.content, rsu.id, p.id, 0, r.message.size_bytes);
      }
    }
    it = requests_.erase(it);
  }
}

void World::recommend() {
  if (scenario_.policy != Policy::vesonet || !model_) return;
  for (VehicleId id : providers_) {
    Vehicle& p = vehicle(id);
    if (!p.waiting || p.stop_handled) continue;
    p.stop_handled = true;
    std::vector<NearbyProvider> nearby;
    std::vector<Vehicle2Vec> consumers;
    for (std::uint32_t j : adjacency_[radio_index(id)]) {
      if (j >= vehicles_.size()) continue;
      const Vehicle& o = vehicles_[j];
      if (o.role == Role::provider) nearby.push_back({o.id, o.cache.catalog()});
      if (o.role == Role::consumer && !o.profile.rows.empty()) consumers.push_back(o.profile);
    }
    if (nearby.empty() || consumers.empty()) continue;
    const auto own = p.cache.catalog();
    const auto recs = intersection_recommendation(*model_, own, nearby, consumers, SimilarityThreshold{scenario_.alpha},
                                                  &cost_.recommendation.similarity_evals);
    const auto& signal = net_.intersection(net_.segment(p.segment).to).signal;
    double budget = (signal ? signal->remaining_red(now_s()) : 0.0) * scenario_.v2v_rate_bytes_per_s;
    for (const Recommendation& rec : recs) {
      const std::int64_t size = item_size(rec.content);
      if (static_cast<double>(size) > budget || p.cache.contains(rec.content)) continue;
      const auto evicted = p.cache.insert(rec.content, size);
      if (!evicted) continue;
      for (ContentId e : *evicted) log(EventType::evict, -1, e, -1, id, 0, item_size(e));
      log(EventType::recommend_download, -1, rec.content, rec.source, id, 0, size);
      budget -= static_cast<double>(size);
    }
  }
}

// ---------------------------------------------------------------------------

void World::step() {
  if (done()) return;
  update_accidents();
  for (auto& v : vehicles_)
    if (v.role != Role::meta) move(v);
  refresh_positions();
  report_locations();
  issue_requests();
  forward_packets();
  start_rsu_downloads();
  run_transfers();
  recommend();
  ++tick_;
}

void World::finish() {
  while (!done()) step();
  if (finished_) return;
  finished_ = true;
  cost_.planning.search_expansions += search_stats_.expansions;
  for (const auto& a : agents_) cost_.rl += a->cost();
  log(EventType::cost_planning, -1, -1, -1, -1, 0, static_cast<std::int64_t>(cost_.planning.total()));
  log(EventType::cost_recommendation, -1, -1, -1, -1, 0, static_cast<std::int64_t>(cost_.recommendation.total()));
  log(EventType::cost_rl, -1, -1, -1, -1, 0, static_cast<std::int64_t>(cost_.rl.total()));
  log(EventType::cost_dissemination, -1, -1, -1, -1, 0, static_cast<std::int64_t>(cost_.dissemination.total()));
}

RunResult run(const Scenario& scenario) {
  World world(scenario);
  world.finish();
  RunResult out;
  out.events = world.events();
  out.report = compute_metrics(out.events, scenario.tick_duration_s);
  out.cost = world.cost();
  if (const DQNAgent* a = world.agent()) out.rl_curve = a->curve();
  return out;
}

std::vector<SweepRow> sweep(const Scenario& base, SweepAxis axis, std::span<const double> values, int seeds, int jobs,
                            std::span<const Policy> policies) {
  if (values.size() < 2) throw ConfigError("a sweep needs at least two axis values");
  if (seeds < 1) throw ConfigError("a sweep needs at least one seed");
  static const Policy kBoth[] = {Policy::vesonet, Policy::baseline};
  if (policies.empty()) policies = kBoth;
  std::vector<SweepRow> rows;
  for (double v : values)
    for (Policy p : policies)
      for (int k = 0; k < seeds; ++k) rows.push_back({axis, v, p, base.rng_seed + static_cast<std::uint64_t>(k), {}});

  std::vector<std::exception_ptr> failures(rows.size());
  const std::int64_t n = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, jobs))
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      Scenario s = base;
      apply_axis(s, rows[i].axis, rows[i].value);
      s.policy = rows[i].policy;
      s.rng_seed = rows[i].seed;
      rows[i].report = run(s).report;
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "axis,value,policy,seed,requested,delivered,delivery_rate,mean_delivery_delay_s,trips,mean_travel_time_s,"
         "computation_cost,budget_violations\n";
  char buf[320];
  for (const SweepRow& r : rows) {
    const MetricsReport& m = r.report;
    std::snprintf(buf, sizeof buf, "%s,%g,%s,%llu,%lld,%lld,%.6f,%.6f,%lld,%.6f,%lld,%lld\n", to_string(r.axis).c_str(),
                  r.value, to_string(r.policy).c_str(), static_cast<unsigned long long>(r.seed),
                  static_cast<long long>(m.requested), static_cast<long long>(m.delivered), m.delivery_rate(),
                  m.mean_delay_s(), static_cast<long long>(m.trips), m.mean_travel_time_s(),
                  static_cast<long long>(m.computation_cost()), static_cast<long long>(m.budget_violations));
    out << buf;
  }
}

}  // namespace vesonet
