#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vesonet/content_embed.hpp"
#include "vesonet/radio.hpp"
#include "vesonet/road_net.hpp"

namespace vesonet {

using RequestId = std::int64_t;

inline constexpr int kMaxHops = 15;
inline constexpr VehicleId kRsuIdBase = 1000000;
inline constexpr VehicleId kNoVehicle = -1;

struct InterestPacket {
  RequestId id = 0;
  ContentId content = 0;
  VehicleId requester = 0;
  Path requester_path;
  std::int64_t created_tick = 0;
  int hop_count = 0;
  int ttl_hops = kMaxHops;
  VehicleId holder = 0;
  /// Set once a metadata index has pointed the packet at a provider.
  VehicleId provider = kNoVehicle;
  Position provider_position;
  /// Requester's position when the packet was (re)issued.
  Position requester_position;
};

struct ContentMessage {
  RequestId request = 0;
  ContentId content = 0;
  std::int64_t size_bytes = 0;
  std::int64_t remaining_bytes = 0;
  VehicleId source = 0;
  VehicleId destination = 0;
  /// No bytes move before this tick (RSU backhaul latency).
  std::int64_t ready_tick = 0;
  std::optional<std::int64_t> completed_tick;
};

/// Byte-bounded cache with least-recently-used eviction.
class ProviderCache {
 public:
  ProviderCache() = default;
  ProviderCache(VehicleId provider, std::int64_t capacity_bytes);

  VehicleId provider() const { return provider_; }
  std::int64_t capacity() const { return capacity_; }
  std::int64_t used() const { return used_; }
  std::size_t size() const { return sizes_.size(); }
  bool contains(ContentId id) const { return sizes_.count(id) != 0; }
  /// Marks the item most recently used; no effect when absent.
  void touch(ContentId id);
  /// Stores the item, evicting least recently used items until it fits. Returns the
  /// evicted ids in eviction order, or nullopt when the item is larger than the cache.
  std::optional<std::vector<ContentId>> insert(ContentId id, std::int64_t size_bytes);
  /// Sorted ids.
  std::vector<ContentId> catalog() const;
  /// Ids from least to most recently used.
  std::vector<ContentId> eviction_order() const { return {order_.begin(), order_.end()}; }

 private:
  VehicleId provider_ = 0;
  std::int64_t capacity_ = 0;
  std::int64_t used_ = 0;
  std::list<ContentId> order_;
  std::map<ContentId, std::pair<std::int64_t, std::list<ContentId>::iterator>> sizes_;
};

struct IndexEntry {
  VehicleId provider = 0;
  Position position;
  Path expected_path;
  std::int64_t report_tick = 0;
  std::vector<ContentId> catalog;
};

/// Content table kept by a stationary metadata vehicle.
class MetaDataIndex {
 public:
  MetaDataIndex() = default;
  MetaDataIndex(VehicleId host, Position position) : host_(host), position_(position) {}

  VehicleId host() const { return host_; }
  const Position& position() const { return position_; }
  std::size_t providers() const { return entries_.size(); }
  const IndexEntry* entry(VehicleId provider) const;

  /// Replaces the provider's previous entry (last writer wins).
  void report(IndexEntry entry);
  /// Drops entries whose report is more than `horizon_ticks` old. Returns the providers removed.
  std::vector<VehicleId> purge(std::int64_t now, std::int64_t horizon_ticks);
  /// Entries listing the content, by provider id.
  std::vector<const IndexEntry*> lookup(ContentId content) const;

 private:
  void unlink(const IndexEntry& e);

  VehicleId host_ = 0;
  Position position_;
  std::map<VehicleId, IndexEntry> entries_;
  std::map<ContentId, std::set<VehicleId>> by_content_;
};

/// Fresh packet held by the requester, or nullopt for a local hit.
std::optional<InterestPacket> create_interest(RequestId id, VehicleId consumer, const std::set<ContentId>& held,
                                              const Path& planned, ContentId content, std::int64_t tick);

struct RadioContact {
  VehicleId id = 0;
  Position position;
};

struct HolderView {
  VehicleId id = 0;
  Position position;
  bool stores_content = false;
  /// Non-null when the holder is a metadata vehicle.
  const MetaDataIndex* index = nullptr;
  /// Providers closer to the requester than whole multiples of this count as equally near.
  std::int64_t radio_range_cm = 45000;
  /// Index hits failing this test are ignored (empty: every provider qualifies).
  std::function<bool(VehicleId)> reachable;
};

enum class RouteAction { answer, redirect, index_miss, forward, carry, drop };

struct RouteOutcome {
  RouteAction action = RouteAction::carry;
  VehicleId next = kNoVehicle;
};

/// One routing decision for the packet at its holder. `neighbors` are the holder's radio
/// contacts, `meta_hosts` every metadata vehicle. Forwarding moves the packet and adds
/// one hop; a redirect records the chosen provider in the packet.
RouteOutcome forward_interest(InterestPacket& packet, const HolderView& holder,
                              std::span<const RadioContact> neighbors, std::span<const RadioContact> meta_hosts,
                              std::uint64_t* index_lookups = nullptr);

/// Index hit preference: fewest radio ranges from the requester, then most segments shared
/// with the requester's path, then nearest, then id.
const IndexEntry* choose_provider(std::span<const IndexEntry* const> hits, const InterestPacket& packet,
                                  std::int64_t radio_range_cm);

struct RsuSite {
  VehicleId id = 0;
  Position position;
};

/// Download of the packet's content from the RSU; bytes start flowing after the backhaul latency.
ContentMessage resolve_via_rsu(const InterestPacket& packet, const RsuSite& rsu, std::int64_t size_bytes,
                               std::int64_t now, std::int64_t latency_ticks);

struct ProviderSite {
  VehicleId id = 0;
  Position position;
  const ProviderCache* cache = nullptr;
};

/// Least-loaded provider within radio range of the RSU whose cache can hold the item.
std::optional<VehicleId> replica_holder(const RsuSite& rsu, std::span<const ProviderSite> providers,
                                        std::int64_t range_cm, std::int64_t size_bytes);

/// Moves `bytes` of the message; records the completion tick. Returns remaining bytes.
std::int64_t transfer_step(ContentMessage& message, std::int64_t tick, std::int64_t bytes);
/// Direct link: no progress when the endpoints are out of range.
std::int64_t transfer_step(ContentMessage& message, std::int64_t tick, const Position& a, const Position& b,
                           std::int64_t range_cm, std::int64_t bytes);

// ---------------------------------------------------------------------------
// Event log

enum class EventType {
  interest_create,
  interest_retry,
  interest_forward,
  interest_drop,
  index_hit,
  index_miss,
  index_purge,
  local_hit,
  transfer_start,
  transfer_pause,
  transfer_resume,
  delivered_v2v,
  delivered_rsu,
  delivery_failure,
  provider_join,
  cache_fill,
  replicate,
  recommend_download,
  evict,
  trip_start,
  trip_rebound,
  trip_end,
  accident_start,
  accident_end,
  cost_planning,
  cost_recommendation,
  cost_rl,
  cost_dissemination,
};

std::string_view to_string(EventType type);
std::optional<EventType> event_type_from_string(std::string_view name);

/// One log row. Id columns hold -1 when not applicable (written as empty cells).
struct Event {
  std::int64_t tick = 0;
  EventType type = EventType::interest_create;
  RequestId request = -1;
  ContentId content = -1;
  VehicleId from = -1;
  VehicleId to = -1;
  std::int64_t hops = 0;
  std::int64_t bytes = 0;
  friend bool operator==(const Event&, const Event&) = default;
};

inline constexpr const char* kEventLogHeader =
    "tick,event_type,request_id,content_id,vehicle_from,vehicle_to,hops,bytes_remaining";

void write_event_log_csv(std::ostream& out, std::span<const Event> events);

}  // namespace vesonet
