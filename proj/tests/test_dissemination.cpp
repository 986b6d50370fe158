#include <doctest.h>

#include <sstream>

#include "vesonet/dissemination.hpp"
#include "vesonet/rng.hpp"

using namespace vesonet;

namespace {

Position at_m(double x, double y) { return {static_cast<std::int64_t>(x * 100), static_cast<std::int64_t>(y * 100)}; }

constexpr std::int64_t kRange = 450 * 100;

InterestPacket packet_for(ContentId c, VehicleId requester) {
  return *create_interest(1, requester, {}, Path{0, 0, {}}, c, 0);
}

}  // namespace

TEST_CASE("unit disk kernels agree and respect the range") {
  Rng rng(3);
  std::vector<Position> nodes;
  for (int i = 0; i < 300; ++i) nodes.push_back(at_m(rng.uniform(0, 3000), rng.uniform(0, 3000)));
  const Adjacency a = kernels::unit_disk_serial(nodes, kRange);
  const Adjacency b = kernels::unit_disk_parallel(nodes, kRange);
  CHECK(a == b);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::uint32_t j : a[i]) {
      CHECK(in_range(nodes[i], nodes[j], kRange));
      CHECK(std::find(a[j].begin(), a[j].end(), i) != a[j].end());
    }
  CHECK(in_range(at_m(0, 0), at_m(450, 0), kRange));
  CHECK_FALSE(in_range(at_m(0, 0), at_m(450.01, 0), kRange));
}

TEST_CASE("components and hop distances") {
  const std::vector<Position> nodes{at_m(0, 0), at_m(400, 0), at_m(800, 0), at_m(5000, 0)};
  const Adjacency adj = kernels::unit_disk_serial(nodes, kRange);
  const auto label = components(adj);
  CHECK(label == std::vector<std::uint32_t>{0, 0, 0, 3});
  CHECK(hop_distances(adj, 0, 15) == std::vector<int>{0, 1, 2, -1});
  CHECK(hop_distances(adj, 0, 1) == std::vector<int>{0, 1, -1, -1});
}

TEST_CASE("interest creation") {
  const Path planned{0, 2, {0, 1}};
  CHECK_FALSE(create_interest(1, 7, {5}, planned, 5, 10).has_value());
  const auto p = create_interest(2, 7, {5}, planned, 6, 10);
  REQUIRE(p.has_value());
  CHECK(p->hop_count == 0);
  CHECK(p->requester_path == planned);
  CHECK(p->holder == 7);
  CHECK(p->created_tick == 10);
  CHECK(p->ttl_hops == 15);
  const auto q = create_interest(3, 7, {}, planned, 8, 10);
  CHECK(q->id != p->id);
}

TEST_CASE("forwarding drops at the hop limit") {
  InterestPacket p = packet_for(4, 1);
  p.hop_count = 15;
  const std::vector<RadioContact> neighbors{{2, at_m(100, 0)}};
  const auto out = forward_interest(p, {1, at_m(0, 0), true, nullptr}, neighbors, {});
  CHECK(out.action == RouteAction::drop);
}

TEST_CASE("holder with the content answers without a hop") {
  InterestPacket p = packet_for(4, 1);
  p.hop_count = 3;
  p.holder = 9;
  const auto out = forward_interest(p, {9, at_m(0, 0), true, nullptr}, {}, {});
  CHECK(out.action == RouteAction::answer);
  CHECK(p.hop_count == 3);
}

TEST_CASE("empty neighbourhood means store and carry") {
  InterestPacket p = packet_for(4, 1);
  const std::vector<RadioContact> meta{{50, at_m(2000, 0)}};
  const auto out = forward_interest(p, {1, at_m(0, 0), false, nullptr}, {}, meta);
  CHECK(out.action == RouteAction::carry);
  CHECK(p.holder == 1);
  CHECK(p.hop_count == 0);
}

TEST_CASE("greedy forwarding toward the nearest metadata vehicle") {
  InterestPacket p = packet_for(4, 1);
  const std::vector<RadioContact> meta{{50, at_m(2000, 0)}, {51, at_m(-3000, 0)}};
  const std::vector<RadioContact> neighbors{{2, at_m(-300, 0)}, {3, at_m(400, 0)}, {4, at_m(200, 0)}};
  auto out = forward_interest(p, {1, at_m(0, 0), false, nullptr}, neighbors, meta);
  CHECK(out.action == RouteAction::forward);
  CHECK(out.next == 3);
  CHECK(p.holder == 3);
  CHECK(p.hop_count == 1);

  // A metadata vehicle in range takes the packet directly.
  const std::vector<RadioContact> with_meta{{3, at_m(400, 0)}, {50, at_m(300, 0)}};
  InterestPacket q = packet_for(4, 1);
  out = forward_interest(q, {1, at_m(0, 0), false, nullptr}, with_meta, std::span(meta).first(1));
  CHECK(out.next == 50);

  // No neighbour closer to the goal: keep carrying.
  InterestPacket r = packet_for(4, 1);
  const std::vector<RadioContact> behind{{2, at_m(-300, 0)}};
  out = forward_interest(r, {1, at_m(0, 0), false, nullptr}, behind, meta);
  CHECK(out.action == RouteAction::carry);
}

TEST_CASE("metadata vehicle redirects toward an indexed provider") {
  MetaDataIndex index(50, at_m(0, 0));
  index.report({20, at_m(400, 0), Path{0, 1, {7}}, 0, {4, 5}});
  index.report({21, at_m(300, 0), Path{0, 1, {8}}, 0, {4}});
  index.report({22, at_m(1000, 0), Path{0, 1, {7}}, 0, {5}});
  InterestPacket p = *create_interest(1, 1, {}, Path{0, 1, {7}}, 4, 0);
  p.holder = 50;
  std::uint64_t lookups = 0;
  auto out = forward_interest(p, {50, at_m(0, 0), false, &index}, {}, {}, &lookups);
  CHECK(out.action == RouteAction::redirect);
  // Both within one radio range; sharing segment 7 beats the nearer provider.
  CHECK(p.provider == 20);
  CHECK(lookups == 1);
  const std::vector<RadioContact> neighbors{{30, at_m(400, 0)}, {20, at_m(440, 0)}};
  p.provider_position = at_m(440, 0);
  out = forward_interest(p, {50, at_m(0, 0), false, &index}, neighbors, {}, &lookups);
  CHECK(out.next == 20);
  CHECK(lookups == 1);
  lookups = 0;

  // A provider on the path but three ranges away loses to one nearby.
  InterestPacket far = *create_interest(2, 1, {}, Path{0, 1, {7}}, 5, 0);
  far.holder = 50;
  far.requester_position = at_m(-200, 0);
  out = forward_interest(far, {50, at_m(0, 0), false, &index}, {}, {}, &lookups);
  CHECK(out.action == RouteAction::redirect);
  CHECK(far.provider == 20);
  far = *create_interest(3, 1, {}, Path{0, 1, {7}}, 5, 0);
  far.holder = 50;
  far.requester_position = at_m(900, 0);
  forward_interest(far, {50, at_m(0, 0), false, &index}, {}, {}, &lookups);
  CHECK(far.provider == 22);

  InterestPacket miss = packet_for(99, 1);
  miss.holder = 50;
  out = forward_interest(miss, {50, at_m(0, 0), false, &index}, {}, {}, &lookups);
  CHECK(out.action == RouteAction::index_miss);
}

TEST_CASE("index reports replace entries and stale ones are purged") {
  MetaDataIndex index(50, at_m(0, 0));
  index.report({20, at_m(0, 0), {}, 0, {1, 2}});
  index.report({20, at_m(10, 0), {}, 5, {2, 3}});
  CHECK(index.providers() == 1);
  CHECK(index.lookup(1).empty());
  REQUIRE(index.lookup(3).size() == 1);
  CHECK(index.lookup(3)[0]->position == at_m(10, 0));

  // Report period 10, horizon 3 periods.
  CHECK(index.purge(35, 30).empty());
  const auto removed = index.purge(45, 30);
  CHECK(removed == std::vector<VehicleId>{20});
  CHECK(index.lookup(2).empty());
  CHECK(index.providers() == 0);
  InterestPacket p = packet_for(2, 1);
  p.holder = 50;
  CHECK(forward_interest(p, {50, at_m(0, 0), false, &index}, {}, {}).action == RouteAction::index_miss);
}

TEST_CASE("LRU cache never exceeds capacity") {
  ProviderCache cache(7, 10);
  CHECK(cache.insert(1, 4)->empty());
  CHECK(cache.insert(2, 4)->empty());
  cache.touch(1);
  const auto evicted = cache.insert(3, 4);
  REQUIRE(evicted.has_value());
  CHECK(*evicted == std::vector<ContentId>{2});
  CHECK(cache.contains(1));
  CHECK(cache.contains(3));
  CHECK_FALSE(cache.insert(9, 11).has_value());
  CHECK(cache.insert(1, 4)->empty());
  CHECK(cache.eviction_order() == std::vector<ContentId>{3, 1});

  Rng rng(5);
  ProviderCache big(8, 1000);
  for (int i = 0; i < 5000; ++i) {
    big.insert(static_cast<ContentId>(rng.below(200)), 1 + static_cast<std::int64_t>(rng.below(300)));
    REQUIRE(big.used() <= big.capacity());
  }
}

TEST_CASE("rsu download and replica placement") {
  const InterestPacket p = packet_for(4, 1);
  const RsuSite rsu{kRsuIdBase, at_m(0, 0)};
  ContentMessage m = resolve_via_rsu(p, rsu, 3'000'000, 10, 2);
  CHECK(m.source == kRsuIdBase);
  CHECK(m.destination == 1);
  CHECK(m.remaining_bytes == 3'000'000);
  CHECK(transfer_step(m, 11, 10'000'000) == 3'000'000);
  CHECK(transfer_step(m, 12, 10'000'000) == 0);
  CHECK(*m.completed_tick == 12);

  ProviderCache a(20, 10'000'000), b(21, 10'000'000), far(22, 10'000'000);
  a.insert(1, 5'000'000);
  const std::vector<ProviderSite> sites{{20, at_m(100, 0), &a}, {21, at_m(0, 300), &b}, {22, at_m(900, 0), &far}};
  CHECK(replica_holder(rsu, sites, kRange, 3'000'000) == std::optional<VehicleId>(21));
  CHECK_FALSE(replica_holder(rsu, std::span(sites).last(1), kRange, 3'000'000).has_value());
}

TEST_CASE("transfer pacing") {
  ContentMessage m{1, 2, 1'000'000, 1'000'000, 3, 4, 0, std::nullopt};
  CHECK(transfer_step(m, 0, 1'000'000) == 0);
  CHECK(*m.completed_tick == 0);

  ContentMessage n{1, 2, 1'000'000, 1'000'000, 3, 4, 0, std::nullopt};
  CHECK(transfer_step(n, 0, 400'000) == 600'000);
  // Link broken: nothing moves.
  CHECK(transfer_step(n, 1, at_m(0, 0), at_m(500, 0), kRange, 400'000) == 600'000);
  CHECK(transfer_step(n, 2, at_m(0, 0), at_m(449, 0), kRange, 400'000) == 200'000);
  CHECK(transfer_step(n, 3, 400'000) == 0);
  CHECK(*n.completed_tick == 3);
}

TEST_CASE("event log csv") {
  const std::vector<Event> events{{0, EventType::interest_create, 1, 4, 7, -1, 0, 0},
                                  {3, EventType::delivered_v2v, 1, 4, 20, 7, 2, 0}};
  std::stringstream ss;
  write_event_log_csv(ss, events);
  CHECK(ss.str() ==
        "tick,event_type,request_id,content_id,vehicle_from,vehicle_to,hops,bytes_remaining\n"
        "0,interest_create,1,4,7,,0,0\n"
        "3,delivered_v2v,1,4,20,7,2,0\n");
  for (int i = 0; i <= static_cast<int>(EventType::cost_dissemination); ++i) {
    const auto t = static_cast<EventType>(i);
    CHECK(event_type_from_string(to_string(t)) == t);
  }
  CHECK_FALSE(event_type_from_string("bogus").has_value());
}
