#include "vesonet/dissemination.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <ostream>

#include "vesonet/error.hpp"

namespace vesonet {

ProviderCache::ProviderCache(VehicleId provider, std::int64_t capacity_bytes)
    : provider_(provider), capacity_(capacity_bytes) {
  if (capacity_bytes < 0) throw ConfigError("cache capacity must be non-negative");
}

void ProviderCache::touch(ContentId id) {
  auto it = sizes_.find(id);
  if (it == sizes_.end()) return;
  order_.splice(order_.end(), order_, it->second.second);
}

std::optional<std::vector<ContentId>> ProviderCache::insert(ContentId id, std::int64_t size_bytes) {
  if (size_bytes <= 0) throw ConfigError("content size must be positive");
  if (contains(id)) {
    touch(id);
    return std::vector<ContentId>{};
  }
  if (size_bytes > capacity_) return std::nullopt;
  std::vector<ContentId> evicted;
  while (used_ + size_bytes > capacity_) {
    const ContentId victim = order_.front();
    order_.pop_front();
    used_ -= sizes_.at(victim).first;
    sizes_.erase(victim);
    evicted.push_back(victim);
  }
  order_.push_back(id);
  sizes_.emplace(id, std::make_pair(size_bytes, std::prev(order_.end())));
  used_ += size_bytes;
  return evicted;
}

std::vector<ContentId> ProviderCache::catalog() const {
  std::vector<ContentId> ids;
  ids.reserve(sizes_.size());
  for (const auto& [id, v] : sizes_) ids.push_back(id);
  return ids;
}

// ---------------------------------------------------------------------------

const IndexEntry* MetaDataIndex::entry(VehicleId provider) const {
  auto it = entries_.find(provider);
  return it == entries_.end() ? nullptr : &it->second;
}

void MetaDataIndex::unlink(const IndexEntry& e) {
  for (ContentId c : e.catalog) {
    auto it = by_content_.find(c);
    if (it == by_content_.end()) continue;
    it->second.erase(e.provider);
    if (it->second.empty()) by_content_.erase(it);
  }
}

void MetaDataIndex::report(IndexEntry entry) {
  auto it = entries_.find(entry.provider);
  if (it != entries_.end()) {
    unlink(it->second);
    entries_.erase(it);
  }
  for (ContentId c : entry.catalog) by_content_[c].insert(entry.provider);
  const VehicleId id = entry.provider;
  entries_.emplace(id, std::move(entry));
}

std::vector<VehicleId> MetaDataIndex::purge(std::int64_t now, std::int64_t horizon_ticks) {
  std::vector<VehicleId> removed;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (now - it->second.report_tick > horizon_ticks) {
      unlink(it->second);
      removed.push_back(it->first);
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

std::vector<const IndexEntry*> MetaDataIndex::lookup(ContentId content) const {
  std::vector<const IndexEntry*> hits;
  auto it = by_content_.find(content);
  if (it == by_content_.end()) return hits;
  for (VehicleId p : it->second) hits.push_back(&entries_.at(p));
  return hits;
}

// ---------------------------------------------------------------------------

std::optional<InterestPacket> create_interest(RequestId id, VehicleId consumer, const std::set<ContentId>& held,
                                              const Path& planned, ContentId content, std::int64_t tick) {
  if (held.count(content)) return std::nullopt;
  InterestPacket p;
  p.id = id;
  p.content = content;
  p.requester = consumer;
  p.requester_path = planned;
  p.created_tick = tick;
  p.holder = consumer;
  return p;
}

const IndexEntry* choose_provider(std::span<const IndexEntry* const> hits, const InterestPacket& packet,
                                  std::int64_t radio_range_cm) {
  const std::set<SegmentId> wanted(packet.requester_path.segments.begin(), packet.requester_path.segments.end());
  const double range = static_cast<double>(std::max<std::int64_t>(radio_range_cm, 1));
  const IndexEntry* best = nullptr;
  std::tuple<std::int64_t, std::int64_t, std::int64_t, VehicleId> best_key;
  for (const IndexEntry* e : hits) {
    std::int64_t shared = 0;
    for (SegmentId s : std::set<SegmentId>(e->expected_path.segments.begin(), e->expected_path.segments.end()))
      shared += static_cast<std::int64_t>(wanted.count(s));
    const std::int64_t dist = squared_distance(e->position, packet.requester_position);
    const auto band = static_cast<std::int64_t>(std::sqrt(static_cast<double>(dist)) / range);
    const auto key = std::make_tuple(band, -shared, dist, e->provider);
    if (!best || key < best_key) {
      best = e;
      best_key = key;
    }
  }
  return best;
}

RouteOutcome forward_interest(InterestPacket& packet, const HolderView& holder,
                              std::span<const RadioContact> neighbors, std::span<const RadioContact> meta_hosts,
                              std::uint64_t* index_lookups) {
  if (packet.hop_count >= packet.ttl_hops) return {RouteAction::drop, kNoVehicle};
  if (holder.stores_content) return {RouteAction::answer, holder.id};

  if (holder.index && packet.provider == kNoVehicle) {
    if (index_lookups) ++*index_lookups;
    const auto hits = holder.index->lookup(packet.content);
    std::vector<const IndexEntry*> others;
    for (const IndexEntry* e : hits)
      if (e->provider != holder.id && (!holder.reachable || holder.reachable(e->provider))) others.push_back(e);
    const IndexEntry* pick = choose_provider(others, packet, holder.radio_range_cm);
    if (!pick) return {RouteAction::index_miss, holder.id};
    packet.provider = pick->provider;
    packet.provider_position = pick->position;
    return {RouteAction::redirect, pick->provider};
  }

  auto hop_to = [&](VehicleId next) {
    packet.holder = next;
    ++packet.hop_count;
    return RouteOutcome{RouteAction::forward, next};
  };

  Position goal;
  if (packet.provider != kNoVehicle) {
    for (const RadioContact& n : neighbors)
      if (n.id == packet.provider) return hop_to(n.id);
    goal = packet.provider_position;
  } else {
    // Nearest metadata neighbour first, otherwise head for the nearest metadata vehicle.
    const RadioContact* direct = nullptr;
    for (const RadioContact& n : neighbors)
      for (const RadioContact& m : meta_hosts)
        if (n.id == m.id && (!direct || squared_distance(n.position, holder.position) <
                                            squared_distance(direct->position, holder.position)))
          direct = &n;
    if (direct) return hop_to(direct->id);
    const RadioContact* nearest = nullptr;
    for (const RadioContact& m : meta_hosts) {
      if (m.id == holder.id) continue;
      if (!nearest || squared_distance(m.position, holder.position) < squared_distance(nearest->position, holder.position))
        nearest = &m;
    }
    if (!nearest) return {RouteAction::carry, holder.id};
    goal = nearest->position;
  }

  const RadioContact* best = nullptr;
  for (const RadioContact& n : neighbors) {
    if (!best || squared_distance(n.position, goal) < squared_distance(best->position, goal)) best = &n;
  }
  if (best && squared_distance(best->position, goal) < squared_distance(holder.position, goal)) return hop_to(best->id);
  return {RouteAction::carry, holder.id};
}

ContentMessage resolve_via_rsu(const InterestPacket& packet, const RsuSite& rsu, std::int64_t size_bytes,
                               std::int64_t now, std::int64_t latency_ticks) {
  ContentMessage m;
  m.request = packet.id;
  m.content = packet.content;
  m.size_bytes = size_bytes;
  m.remaining_bytes = size_bytes;
  m.source = rsu.id;
  m.destination = packet.requester;
  m.ready_tick = now + latency_ticks;
  return m;
}

std::optional<VehicleId> replica_holder(const RsuSite& rsu, std::span<const ProviderSite> providers,
                                        std::int64_t range_cm, std::int64_t size_bytes) {
  const ProviderSite* best = nullptr;
  for (const ProviderSite& p : providers) {
    if (!p.cache || p.cache->capacity() < size_bytes) continue;
    if (!in_range(p.position, rsu.position, range_cm)) continue;
    if (!best || p.cache->used() < best->cache->used() || (p.cache->used() == best->cache->used() && p.id < best->id))
      best = &p;
  }
  if (!best) return std::nullopt;
  return best->id;
}

std::int64_t transfer_step(ContentMessage& message, std::int64_t tick, std::int64_t bytes) {
  if (message.completed_tick || tick < message.ready_tick || bytes <= 0) return message.remaining_bytes;
  message.remaining_bytes = std::max<std::int64_t>(0, message.remaining_bytes - bytes);
  if (message.remaining_bytes == 0) message.completed_tick = tick;
  return message.remaining_bytes;
}

std::int64_t transfer_step(ContentMessage& message, std::int64_t tick, const Position& a, const Position& b,
                           std::int64_t range_cm, std::int64_t bytes) {
  if (!in_range(a, b, range_cm)) return message.remaining_bytes;
  return transfer_step(message, tick, bytes);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 28> kEventNames{
    "interest_create",  "interest_retry",   "interest_forward",    "interest_drop", "index_hit",
    "index_miss",       "index_purge",      "local_hit",           "transfer_start", "transfer_pause",
    "transfer_resume",  "delivered_v2v",    "delivered_rsu",       "delivery_failure", "provider_join",
    "cache_fill",       "replicate",        "recommend_download",  "evict",         "trip_start",
    "trip_rebound",     "trip_end",         "accident_start",      "accident_end",  "cost_planning",
    "cost_recommendation", "cost_rl",       "cost_dissemination",
};
static_assert(kEventNames.size() == static_cast<std::size_t>(EventType::cost_dissemination) + 1);

}  // namespace

std::string_view to_string(EventType type) { return kEventNames.at(static_cast<std::size_t>(type)); }

std::optional<EventType> event_type_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i)
    if (kEventNames[i] == name) return static_cast<EventType>(i);
  return std::nullopt;
}

void write_event_log_csv(std::ostream& out, std::span<const Event> events) {
  out << kEventLogHeader << '\n';
  std::string line;
  auto id = [&line](std::int64_t v) {
    if (v >= 0) line += std::to_string(v);
  };
  for (const Event& e : events) {
    line.clear();
    line += std::to_string(e.tick);
    line += ',';
    line += to_string(e.type);
    line += ',';
    id(e.request);
    line += ',';
    id(e.content);
    line += ',';
    id(e.from);
    line += ',';
    id(e.to);
    line += ',';
    line += std::to_string(e.hops);
    line += ',';
    line += std::to_string(e.bytes);
    line += '\n';
    out << line;
  }
}

}  // namespace vesonet
