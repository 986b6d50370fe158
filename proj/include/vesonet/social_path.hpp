#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vesonet/road_net.hpp"

namespace vesonet {

struct DetourBudget {
  double epsilon_s = 0.0;
};

struct SearchStats {
  std::uint64_t expansions = 0;
  std::uint64_t pruned_by_time = 0;
  std::uint64_t pruned_by_dominance = 0;

  SearchStats& operator+=(const SearchStats& o) {
    expansions += o.expansions;
    pruned_by_time += o.pruned_by_time;
    pruned_by_dominance += o.pruned_by_dominance;
    return *this;
  }
};

struct SocialSearchOptions {
  /// Provider count per segment id used for scoring. Empty means the occupancy snapshot.
  /// This is the relevance-weighting hook: callers may pass any non-negative counts.
  std::vector<int> segment_providers;
  /// Intersections the returned path must not visit.
  std::vector<NodeId> avoid;
  /// Accumulates search work when set.
  SearchStats* stats = nullptr;
};

/// Provider count of `path` under the options' scoring.
int path_providers(const Path& path, const RoadNetwork& network, const SocialSearchOptions& options = {});

/// Provider-maximizing simple s -> d path whose travel time is at most
/// travel_time(shortest_path(s, d)) + epsilon. Starts from the traffic-only shortest
/// path and replaces it only on a strict provider improvement (or equal providers and
/// strictly shorter time). Throws NoPathError when d is unreachable.
Path alternative_social_path(const RoadNetwork& network, NodeId source, NodeId dest, DetourBudget budget,
                             const SocialSearchOptions& options = {});

/// Pruned depth-first search over simple paths bounded by an absolute travel time.
/// `incumbent` seeds the best known path. Returns nullopt when no simple path that
/// avoids `options.avoid` fits the bound.
std::optional<Path> social_graph_pruning(const RoadNetwork& network, NodeId source, NodeId dest,
                                         double time_bound, const std::optional<Path>& incumbent,
                                         const SocialSearchOptions& options);

/// Sweeps the shortest path segment by segment, choosing at each step between the
/// current social prefix extended by a local detour and a fresh social path from the
/// source, under a whole-trip detour budget.
Path shortest_social_path(const RoadNetwork& network, NodeId source, NodeId dest, DetourBudget budget,
                          const SocialSearchOptions& options = {});

/// Exhaustive simple-path enumeration (networks with at most 12 intersections).
/// Ties on providers: shorter time, fewer segments, lexicographic intersection ids.
Path brute_force_social_path(const RoadNetwork& network, NodeId source, NodeId dest, DetourBudget budget,
                             const SocialSearchOptions& options = {});

inline constexpr std::size_t kBruteForceMaxIntersections = 12;

}  // namespace vesonet
