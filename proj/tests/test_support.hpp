#pragma once

// Test-only generators and oracles. Nothing here calls the planners under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "vesonet/rng.hpp"
#include "vesonet/road_net.hpp"

namespace vesonet::testing {

struct RandomGraphSpec {
  int max_nodes = 12;
  int max_segments = 30;
  int max_providers_per_segment = 4;
  bool signals = true;
};

/// Random directed graph with 4..max_nodes intersections, a spanning chain 0 -> 1 -> ...
/// so that node 0 reaches every node, and extra random segments up to max_segments.
inline RoadNetwork random_graph(std::uint64_t seed, const RandomGraphSpec& spec = {}) {
  Rng rng(seed, 77);
  const int n = 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_nodes - 3)));
  RoadNetwork net;
  for (int i = 0; i < n; ++i) {
    Intersection node{i, rng.uniform(0, 1000), rng.uniform(0, 1000), std::nullopt};
    if (spec.signals && rng.bernoulli(0.6)) {
      node.signal = SignalCycle{rng.uniform(10, 40), std::floor(rng.uniform(0, 30)), 0.0};
    }
    net.add_intersection(node);
  }
  auto add = [&](int a, int b) {
    if (a == b || net.find_segment(a, b)) return;
    const double length = std::floor(rng.uniform(50, 600));
    const double speed = std::floor(rng.uniform(5, 20));
    const SegmentId sid = net.add_segment(a, b, length, speed);
    net.set_occupancy(sid, SegmentOccupancy{0, static_cast<int>(rng.below(spec.max_providers_per_segment + 1)), 0});
  };
  for (int i = 0; i + 1 < n; ++i) add(i, i + 1);
  const int target = std::min(spec.max_segments, n * (n - 1));
  int guard = 0;
  while (static_cast<int>(net.segment_count()) < target && guard++ < 1000) {
    add(static_cast<int>(rng.below(n)), static_cast<int>(rng.below(n)));
  }
  return net;
}

struct EnumeratedPath {
  std::vector<SegmentId> segments;
  std::vector<NodeId> nodes;
  double time = 0.0;
  int providers = 0;
};

/// Every simple path from source to dest, with travel time and providers summed by hand.
inline std::vector<EnumeratedPath> enumerate_simple_paths(const RoadNetwork& net, NodeId source, NodeId dest) {
  std::vector<EnumeratedPath> out;
  EnumeratedPath cur;
  cur.nodes = {source};
  std::function<void(NodeId)> dfs = [&](NodeId here) {
    if (here == dest) {
      out.push_back(cur);
      return;
    }
    for (SegmentId sid : net.out_segments(here)) {
      if (net.closed(sid)) continue;
      const auto& seg = net.segment(sid);
      if (std::find(cur.nodes.begin(), cur.nodes.end(), seg.to) != cur.nodes.end()) continue;
      const auto saved_time = cur.time;
      const auto saved_prov = cur.providers;
      const auto& node = net.intersection(here);
      if (!cur.segments.empty() && node.signal) {
        const double r = node.signal->red_s;
        const double g = node.signal->green_s;
        cur.time += r * r / (2 * (g + r));
      }
      cur.time += seg.base_travel_time_s;
      cur.providers += net.occupancy(sid).providers;
      cur.segments.push_back(sid);
      cur.nodes.push_back(seg.to);
      dfs(seg.to);
      cur.segments.pop_back();
      cur.nodes.pop_back();
      cur.time = saved_time;
      cur.providers = saved_prov;
    }
  };
  if (source == dest) {
    out.push_back(cur);
    return out;
  }
  dfs(source);
  return out;
}

inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace vesonet::testing
