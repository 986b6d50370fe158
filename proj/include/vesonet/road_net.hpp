#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vesonet {

using NodeId = std::int64_t;
using SegmentId = std::size_t;

inline constexpr double kTimeTolerance = 1e-9;

struct SignalCycle {
  double green_s = 30.0;
  double red_s = 30.0;
  double phase_offset_s = 0.0;

  double cycle_s() const { return green_s + red_s; }
  /// Mean residual red time for a uniformly distributed arrival: red^2 / (2 (green + red)).
  double expected_wait() const { return red_s * red_s / (2.0 * cycle_s()); }
  /// Green occupies [0, green) of each cycle after the offset, red the rest.
  bool is_green(double t) const;
  /// Seconds until the light turns green (0 when green).
  double remaining_red(double t) const;
};

struct Intersection {
  NodeId id = 0;
  double x = 0.0;
  double y = 0.0;
  std::optional<SignalCycle> signal;
};

struct RoadSegment {
  NodeId from = 0;
  NodeId to = 0;
  double length_m = 0.0;
  double speed_limit_mps = 0.0;
  double base_travel_time_s = 0.0;
};

struct SegmentOccupancy {
  int consumers = 0;
  int providers = 0;
  std::int64_t as_of_tick = 0;
};

/// Ordered run of connected segments. An empty path has source == destination.
struct Path {
  NodeId source = 0;
  NodeId destination = 0;
  std::vector<SegmentId> segments;

  bool empty() const { return segments.empty(); }
  std::size_t size() const { return segments.size(); }
  friend bool operator==(const Path&, const Path&) = default;
};

class RoadNetwork {
 public:
  /// Adds or replaces an intersection.
  void add_intersection(const Intersection& node);
  /// Adds a directed segment; unknown endpoints are declared implicitly at (0, 0) with
  /// `default_signal`. base_travel_time defaults to length / speed.
  SegmentId add_segment(NodeId from, NodeId to, double length_m, double speed_limit_mps,
                        std::optional<double> base_travel_time_s = std::nullopt);

  std::size_t intersection_count() const { return nodes_.size(); }
  std::size_t segment_count() const { return segments_.size(); }

  bool has_intersection(NodeId id) const { return index_.count(id) != 0; }
  std::size_t index_of(NodeId id) const;
  const Intersection& intersection(NodeId id) const;
  Intersection& intersection(NodeId id);
  const std::vector<Intersection>& intersections() const { return nodes_; }

  const RoadSegment& segment(SegmentId id) const;
  RoadSegment& segment(SegmentId id);
  const std::vector<RoadSegment>& segments() const { return segments_; }
  /// Outgoing segments of a node, sorted by (destination id, segment id).
  const std::vector<SegmentId>& out_segments(NodeId id) const;
  std::optional<SegmentId> find_segment(NodeId from, NodeId to) const;

  double signal_wait(NodeId id) const;

  const SegmentOccupancy& occupancy(SegmentId id) const { return occupancy_.at(id); }
  void set_occupancy(SegmentId id, const SegmentOccupancy& occ) { occupancy_.at(id) = occ; }
  void clear_occupancy(std::int64_t tick);

  bool closed(SegmentId id) const { return closed_.at(id); }
  void set_closed(SegmentId id, bool closed) { closed_.at(id) = closed; }

  std::optional<SignalCycle> default_signal = SignalCycle{};

 private:
  std::vector<Intersection> nodes_;
  std::map<NodeId, std::size_t> index_;
  std::vector<RoadSegment> segments_;
  std::vector<std::vector<SegmentId>> out_;
  std::vector<SegmentOccupancy> occupancy_;
  std::vector<bool> closed_;
};

/// Throws InvalidPathError unless the segments exist and chain from source to destination.
void validate_path(const Path& path, const RoadNetwork& network);
bool is_simple(const Path& path, const RoadNetwork& network);
/// Intersection sequence source, ..., destination.
std::vector<NodeId> path_nodes(const Path& path, const RoadNetwork& network);
Path concat(const Path& head, const Path& tail);
/// Prefix of `path` ending at the first visit of `node`.
Path prefix_until(const Path& path, const RoadNetwork& network, NodeId node);

/// Sum of base travel times plus the expected signal wait at every intermediate
/// intersection. Accepts non-simple routes (realized vehicle trajectories).
double travel_time(const Path& path, const RoadNetwork& network);

/// Minimum travel-time path over open segments. Ties: fewer segments, then the
/// lexicographically smallest intersection-id sequence. Throws NoPathError.
Path shortest_path(const RoadNetwork& network, NodeId source, NodeId dest);

/// Travel time from every intersection (by index) to `dest`, excluding the wait at the
/// starting intersection itself; +inf when unreachable. Closed segments are skipped.
std::vector<double> times_to(const RoadNetwork& network, NodeId dest);

int providers_on_path(const Path& path, const RoadNetwork& network);

/// Edge list: `from to length_m speed_mps` per line, `#` comments. `node id x y` lines
/// optionally place intersections.
RoadNetwork load_edge_list(std::istream& in);
RoadNetwork load_edge_list_file(const std::string& file);
void write_edge_list(std::ostream& out, const RoadNetwork& network);

struct GridSpec {
  int rows = 4;
  int cols = 4;
  double block_m = 250.0;
  double speed_limit_mps = 20.0;
  /// Each road's limit is scaled by a factor drawn uniformly from [1 - spread, 1].
  double speed_spread = 0.0;
  std::uint64_t seed = 1;
};

/// Bidirectional rows x cols grid; node id = row * cols + col.
RoadNetwork make_grid(const GridSpec& spec);

}  // namespace vesonet
