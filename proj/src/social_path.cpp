#include "vesonet/social_path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vesonet/error.hpp"

namespace vesonet {

namespace {

int segment_score(const RoadNetwork& network, const SocialSearchOptions& options, SegmentId sid) {
  if (options.segment_providers.empty()) return network.occupancy(sid).providers;
  return options.segment_providers.at(sid);
}

/// Set of visited intersection indices.
class NodeSet {
 public:
  explicit NodeSet(std::size_t n) : words_((n + 63) / 64, 0) {}
  void insert(std::size_t i) { words_[i / 64] |= (std::uint64_t{1} << (i % 64)); }
  void erase(std::size_t i) { words_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
  bool contains(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  bool subset_of(const NodeSet& o) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if (words_[w] & ~o.words_[w]) return false;
    }
    return true;
  }

 private:
  std::vector<std::uint64_t> words_;
};

struct VisitRecord {
  double time;
  int providers;
  NodeSet visited;
};

class PruningSearch {
 public:
  PruningSearch(const RoadNetwork& network, NodeId source, NodeId dest, double bound,
                const SocialSearchOptions& options)
      : net_(network),
        opts_(options),
        source_(source),
        dest_(dest),
        dest_index_(network.index_of(dest)),
        bound_(bound),
        to_dest_(times_to(network, dest)),
        visited_(network.intersection_count()),
        records_(network.intersection_count()),
        avoid_(network.intersection_count()) {
    for (NodeId id : options.avoid) {
      if (network.has_intersection(id)) avoid_.insert(network.index_of(id));
    }
  }

  void seed(const Path& incumbent) {
    best_ = incumbent;
    best_time_ = travel_time(incumbent, net_);
    best_providers_ = path_providers(incumbent, net_, opts_);
  }

  std::optional<Path> run() {
    const std::size_t src = net_.index_of(source_);
    if (avoid_.contains(src)) return best_;
    partial_ = Path{source_, source_, {}};
    visited_.insert(src);
    visit(source_, src, 0.0, 0);
    if (opts_.stats) *opts_.stats += stats_;
    return best_;
  }

 private:
  void visit(NodeId here, std::size_t here_index, double elapsed, int providers) {
    if (dominated(here_index, elapsed, providers)) {
      ++stats_.pruned_by_dominance;
      return;
    }
    if (here_index == dest_index_) {
      if (elapsed <= bound_ + kTimeTolerance &&
          (!best_ || providers > best_providers_ ||
           (providers == best_providers_ && elapsed < best_time_ - kTimeTolerance))) {
        best_ = partial_;
        best_time_ = elapsed;
        best_providers_ = providers;
      }
      return;
    }
    ++stats_.expansions;
    const double wait = here == source_ ? 0.0 : net_.signal_wait(here);
    for (SegmentId sid : net_.out_segments(here)) {
      if (net_.closed(sid)) continue;
      const auto& seg = net_.segment(sid);
      const std::size_t next = net_.index_of(seg.to);
      if (visited_.contains(next) || avoid_.contains(next)) continue;
      const double t_new = elapsed + wait + seg.base_travel_time_s;
      const double rest = next == dest_index_ ? 0.0 : net_.signal_wait(seg.to) + to_dest_[next];
      if (!(t_new + rest <= bound_ + kTimeTolerance)) {
        ++stats_.pruned_by_time;
        continue;
      }
      partial_.segments.push_back(sid);
      partial_.destination = seg.to;
      visited_.insert(next);
      visit(seg.to, next, t_new, providers + segment_score(net_, opts_, sid));
      visited_.erase(next);
      partial_.segments.pop_back();
      partial_.destination = here;
    }
  }

  // A record dominates when it arrived no later, with no fewer providers, having
  // blocked a subset of the current path's intersections: every simple completion
  // open to the current state is then also open to the record.
  bool dominated(std::size_t node, double elapsed, int providers) {
    auto& recs = records_[node];
    for (const auto& rec : recs) {
      if (rec.time <= elapsed + kTimeTolerance && rec.providers >= providers && rec.visited.subset_of(visited_)) {
        return true;
      }
    }
    std::erase_if(recs, [&](const VisitRecord& rec) {
      return elapsed <= rec.time + kTimeTolerance && providers >= rec.providers && visited_.subset_of(rec.visited);
    });
    recs.push_back(VisitRecord{elapsed, providers, visited_});
    return false;
  }

  const RoadNetwork& net_;
  const SocialSearchOptions& opts_;
  NodeId source_;
  NodeId dest_;
  std::size_t dest_index_;
  double bound_;
  std::vector<double> to_dest_;
  NodeSet visited_;
  std::vector<std::vector<VisitRecord>> records_;
  NodeSet avoid_;
  Path partial_;
  std::optional<Path> best_;
  double best_time_ = std::numeric_limits<double>::infinity();
  int best_providers_ = -1;
  SearchStats stats_;
};

void check_budget(DetourBudget budget) {
  if (!(budget.epsilon_s >= 0.0)) throw ConfigError("detour budget epsilon must be >= 0");
}

}  // namespace

int path_providers(const Path& path, const RoadNetwork& network, const SocialSearchOptions& options) {
  int total = 0;
  for (SegmentId sid : path.segments) total += segment_score(network, options, sid);
  return total;
}

std::optional<Path> social_graph_pruning(const RoadNetwork& network, NodeId source, NodeId dest,
                                         double time_bound, const std::optional<Path>& incumbent,
                                         const SocialSearchOptions& options) {
  PruningSearch search(network, source, dest, time_bound, options);
  if (incumbent) search.seed(*incumbent);
  return search.run();
}

Path alternative_social_path(const RoadNetwork& network, NodeId source, NodeId dest, DetourBudget budget,
                             const SocialSearchOptions& options) {
  check_budget(budget);
  Path shortest = shortest_path(network, source, dest);
  if (source == dest) return shortest;
  const double bound = travel_time(shortest, network) + budget.epsilon_s;
  std::optional<Path> incumbent;
  if (options.avoid.empty()) incumbent = shortest;
  auto best = social_graph_pruning(network, source, dest, bound, incumbent, options);
  if (!best) throw NoPathError("no path within the detour budget avoids the excluded intersections");
  return *best;
}

Path shortest_social_path(const RoadNetwork& network, NodeId source, NodeId dest, DetourBudget budget,
                          const SocialSearchOptions& options) {
  check_budget(budget);
  const Path shortest = shortest_path(network, source, dest);
  if (shortest.empty()) return shortest;

  const auto sh_nodes = path_nodes(shortest, network);
  // Travel time of the shortest path's prefix ending at sh_nodes[i].
  std::vector<double> sh_prefix_time(sh_nodes.size(), 0.0);
  for (std::size_t i = 0; i < shortest.segments.size(); ++i) {
    const auto& seg = network.segment(shortest.segments[i]);
    sh_prefix_time[i + 1] =
        sh_prefix_time[i] + (i > 0 ? network.signal_wait(seg.from) : 0.0) + seg.base_travel_time_s;
  }

  SocialSearchOptions local = options;
  Path social{source, source, {}};
  for (std::size_t i = 0; i + 1 < sh_nodes.size(); ++i) {
    const NodeId cur = sh_nodes[i];
    const NodeId next = sh_nodes[i + 1];
    const SegmentId sh_segment = shortest.segments[i];
    const Path sh_step{cur, next, {sh_segment}};
    Path sh_prefix_next{source, next, {shortest.segments.begin(), shortest.segments.begin() + i + 1}};

    // Local detour between cur and next, constrained to keep the whole trip in budget
    // and the concatenation simple.
    const double used = travel_time(social, network) - sh_prefix_time[i];
    const double slack = std::max(0.0, budget.epsilon_s - used);
    local.avoid = options.avoid;
    auto prefix_nodes = path_nodes(social, network);
    prefix_nodes.pop_back();
    local.avoid.insert(local.avoid.end(), prefix_nodes.begin(), prefix_nodes.end());
    const bool step_open = std::find(local.avoid.begin(), local.avoid.end(), next) == local.avoid.end() &&
                           !network.closed(sh_segment);
    const auto temp = social_graph_pruning(network, cur, next, network.segment(sh_segment).base_travel_time_s + slack,
                                           step_open ? std::optional<Path>(sh_step) : std::nullopt, local);

    // Fresh social path from the source to next.
    const Path partial = *social_graph_pruning(network, source, next, sh_prefix_time[i + 1] + budget.epsilon_s,
                                               sh_prefix_next, options);

    if (!temp) {
      social = partial;
      continue;
    }
    const Path candidate = concat(social, *temp);
    if (travel_time(partial, network) - travel_time(candidate, network) <= budget.epsilon_s + kTimeTolerance) {
      social = path_providers(candidate, network, options) < path_providers(partial, network, options) ? partial
                                                                                                        : candidate;
    } else if (step_open) {
      social = concat(social, sh_step);
    } else {
      social = partial;
    }
  }
  return social;
}

Path brute_force_social_path(const RoadNetwork& network, NodeId source, NodeId dest, DetourBudget budget,
                             const SocialSearchOptions& options) {
  check_budget(budget);
  if (network.intersection_count() > kBruteForceMaxIntersections) {
    throw ConfigError("brute-force oracle is limited to 12 intersections");
  }
  const Path shortest = shortest_path(network, source, dest);
  if (source == dest) return shortest;
  const double bound = travel_time(shortest, network) + budget.epsilon_s;

  struct Best {
    Path path;
    int providers = -1;
    double time = 0.0;
    std::vector<NodeId> nodes;
  } best;

  SearchStats stats;
  Path partial{source, source, {}};
  std::vector<bool> on_path(network.intersection_count(), false);
  on_path[network.index_of(source)] = true;

  auto consider = [&] {
    const double t = travel_time(partial, network);
    if (t > bound + kTimeTolerance) return;
    const int p = path_providers(partial, network, options);
    auto nodes = path_nodes(partial, network);
    bool better = p > best.providers;
    if (!better && p == best.providers) {
      if (std::abs(t - best.time) > kTimeTolerance) {
        better = t < best.time;
      } else if (partial.size() != best.path.size()) {
        better = partial.size() < best.path.size();
      } else {
        better = nodes < best.nodes;
      }
    }
    if (better) best = Best{partial, p, t, std::move(nodes)};
  };

  auto dfs = [&](auto&& self, NodeId here) -> void {
    if (here == dest) {
      consider();
      return;
    }
    ++stats.expansions;
    for (SegmentId sid : network.out_segments(here)) {
      if (network.closed(sid)) continue;
      const NodeId next = network.segment(sid).to;
      const std::size_t idx = network.index_of(next);
      if (on_path[idx]) continue;
      on_path[idx] = true;
      partial.segments.push_back(sid);
      partial.destination = next;
      self(self, next);
      partial.segments.pop_back();
      partial.destination = here;
      on_path[idx] = false;
    }
  };
  dfs(dfs, source);
  if (options.stats) *options.stats += stats;
  return best.path;
}

}  // namespace vesonet
