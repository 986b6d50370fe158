#include "vesonet/road_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "vesonet/error.hpp"
#include "vesonet/rng.hpp"

namespace vesonet {

bool SignalCycle::is_green(double t) const {
  if (red_s <= 0.0) return true;
  double phase = std::fmod(t - phase_offset_s, cycle_s());
  if (phase < 0.0) phase += cycle_s();
  return phase < green_s;
}

double SignalCycle::remaining_red(double t) const {
  if (is_green(t)) return 0.0;
  double phase = std::fmod(t - phase_offset_s, cycle_s());
  if (phase < 0.0) phase += cycle_s();
  return cycle_s() - phase;
}

void RoadNetwork::add_intersection(const Intersection& node) {
  if (node.signal && (node.signal->green_s <= 0.0 || node.signal->red_s < 0.0)) {
    throw ConfigError("intersection " + std::to_string(node.id) + ": green must be > 0 and red >= 0");
  }
  if (auto it = index_.find(node.id); it != index_.end()) {
    nodes_[it->second] = node;
    return;
  }
  index_.emplace(node.id, nodes_.size());
  nodes_.push_back(node);
  out_.emplace_back();
}

SegmentId RoadNetwork::add_segment(NodeId from, NodeId to, double length_m, double speed_limit_mps,
                                   std::optional<double> base_travel_time_s) {
  if (!(length_m > 0.0)) throw ConfigError("segment length must be > 0");
  if (!(speed_limit_mps > 0.0)) throw ConfigError("segment speed limit must be > 0");
  const double free_flow = length_m / speed_limit_mps;
  const double base = base_travel_time_s.value_or(free_flow);
  if (base < free_flow * (1.0 - 1e-12)) {
    throw ConfigError("segment base travel time below length / speed limit");
  }
  for (NodeId id : {from, to}) {
    if (!has_intersection(id)) add_intersection(Intersection{id, 0.0, 0.0, default_signal});
  }
  const SegmentId sid = segments_.size();
  segments_.push_back(RoadSegment{from, to, length_m, speed_limit_mps, base});
  occupancy_.emplace_back();
  closed_.push_back(false);
  auto& out = out_[index_of(from)];
  out.push_back(sid);
  std::sort(out.begin(), out.end(), [this](SegmentId a, SegmentId b) {
    if (segments_[a].to != segments_[b].to) return segments_[a].to < segments_[b].to;
    return a < b;
  });
  return sid;
}

std::size_t RoadNetwork::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InvalidPathError("unknown intersection " + std::to_string(id));
  return it->second;
}

const Intersection& RoadNetwork::intersection(NodeId id) const { return nodes_[index_of(id)]; }
Intersection& RoadNetwork::intersection(NodeId id) { return nodes_[index_of(id)]; }

const RoadSegment& RoadNetwork::segment(SegmentId id) const {
  if (id >= segments_.size()) throw InvalidPathError("unknown segment " + std::to_string(id));
  return segments_[id];
}

RoadSegment& RoadNetwork::segment(SegmentId id) {
  if (id >= segments_.size()) throw InvalidPathError("unknown segment " + std::to_string(id));
  return segments_[id];
}

const std::vector<SegmentId>& RoadNetwork::out_segments(NodeId id) const { return out_[index_of(id)]; }

std::optional<SegmentId> RoadNetwork::find_segment(NodeId from, NodeId to) const {
  if (!has_intersection(from)) return std::nullopt;
  for (SegmentId sid : out_segments(from)) {
    if (segments_[sid].to == to) return sid;
  }
  return std::nullopt;
}

double RoadNetwork::signal_wait(NodeId id) const {
  const auto& node = intersection(id);
  return node.signal ? node.signal->expected_wait() : 0.0;
}

void RoadNetwork::clear_occupancy(std::int64_t tick) {
  for (auto& occ : occupancy_) occ = SegmentOccupancy{0, 0, tick};
}

void validate_path(const Path& path, const RoadNetwork& network) {
  if (!network.has_intersection(path.source) || !network.has_intersection(path.destination)) {
    throw InvalidPathError("path endpoint is not an intersection of the network");
  }
  NodeId at = path.source;
  for (SegmentId sid : path.segments) {
    if (sid >= network.segment_count()) throw InvalidPathError("unknown segment id " + std::to_string(sid));
    const auto& seg = network.segment(sid);
    if (seg.from != at) throw InvalidPathError("segments do not chain at intersection " + std::to_string(at));
    at = seg.to;
  }
  if (at != path.destination) throw InvalidPathError("path does not end at its destination");
}

std::vector<NodeId> path_nodes(const Path& path, const RoadNetwork& network) {
  std::vector<NodeId> nodes{path.source};
  for (SegmentId sid : path.segments) nodes.push_back(network.segment(sid).to);
  return nodes;
}

bool is_simple(const Path& path, const RoadNetwork& network) {
  auto nodes = path_nodes(path, network);
  std::sort(nodes.begin(), nodes.end());
  return std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end();
}

Path concat(const Path& head, const Path& tail) {
  if (head.destination != tail.source) throw InvalidPathError("paths are not concatenable");
  Path out{head.source, tail.destination, head.segments};
  out.segments.insert(out.segments.end(), tail.segments.begin(), tail.segments.end());
  return out;
}

Path prefix_until(const Path& path, const RoadNetwork& network, NodeId node) {
  Path out{path.source, path.source, {}};
  if (node == path.source) return out;
  for (SegmentId sid : path.segments) {
    out.segments.push_back(sid);
    out.destination = network.segment(sid).to;
    if (out.destination == node) return out;
  }
  throw InvalidPathError("intersection " + std::to_string(node) + " is not on the path");
}

double travel_time(const Path& path, const RoadNetwork& network) {
  validate_path(path, network);
  double total = 0.0;
  for (std::size_t i = 0; i < path.segments.size(); ++i) {
    const auto& seg = network.segment(path.segments[i]);
    if (i > 0) total += network.signal_wait(seg.from);
    total += seg.base_travel_time_s;
  }
  return total;
}

namespace {

struct Label {
  double time = std::numeric_limits<double>::infinity();
  std::vector<NodeId> nodes;
  std::vector<SegmentId> segments;
};

bool label_less(const Label& a, const Label& b) {
  if (std::abs(a.time - b.time) > kTimeTolerance) return a.time < b.time;
  if (a.segments.size() != b.segments.size()) return a.segments.size() < b.segments.size();
  return a.nodes < b.nodes;
}

}  // namespace

Path shortest_path(const RoadNetwork& network, NodeId source, NodeId dest) {
  const std::size_t n = network.intersection_count();
  const std::size_t src = network.index_of(source);
  const std::size_t dst = network.index_of(dest);
  if (src == dst) return Path{source, dest, {}};

  std::vector<Label> best(n);
  std::vector<bool> settled(n, false);
  best[src].time = 0.0;
  best[src].nodes = {source};

  for (;;) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (settled[i] || !std::isfinite(best[i].time)) continue;
      if (pick == n || label_less(best[i], best[pick])) pick = i;
    }
    if (pick == n) break;
    settled[pick] = true;
    if (pick == dst) break;
    const auto& here = network.intersections()[pick];
    const double wait = pick == src ? 0.0 : network.signal_wait(here.id);
    for (SegmentId sid : network.out_segments(here.id)) {
      if (network.closed(sid)) continue;
      const auto& seg = network.segment(sid);
      const std::size_t next = network.index_of(seg.to);
      if (settled[next]) continue;
      Label cand;
      cand.time = best[pick].time + wait + seg.base_travel_time_s;
      cand.nodes = best[pick].nodes;
      cand.nodes.push_back(seg.to);
      cand.segments = best[pick].segments;
      cand.segments.push_back(sid);
      if (label_less(cand, best[next])) best[next] = std::move(cand);
    }
  }
  if (!settled[dst]) {
    throw NoPathError("no path from " + std::to_string(source) + " to " + std::to_string(dest));
  }
  return Path{source, dest, std::move(best[dst].segments)};
}

std::vector<double> times_to(const RoadNetwork& network, NodeId dest) {
  const std::size_t n = network.intersection_count();
  const std::size_t dst = network.index_of(dest);
  std::vector<std::vector<SegmentId>> in(n);
  for (SegmentId sid = 0; sid < network.segment_count(); ++sid) {
    if (!network.closed(sid)) in[network.index_of(network.segment(sid).to)].push_back(sid);
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> done(n, false);
  dist[dst] = 0.0;
  for (;;) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && std::isfinite(dist[i]) && (pick == n || dist[i] < dist[pick])) pick = i;
    }
    if (pick == n) break;
    done[pick] = true;
    const NodeId here = network.intersections()[pick].id;
    const double wait = pick == dst ? 0.0 : network.signal_wait(here);
    for (SegmentId sid : in[pick]) {
      const std::size_t prev = network.index_of(network.segment(sid).from);
      const double cand = dist[pick] + wait + network.segment(sid).base_travel_time_s;
      if (cand < dist[prev]) dist[prev] = cand;
    }
  }
  return dist;
}

int providers_on_path(const Path& path, const RoadNetwork& network) {
  int total = 0;
  for (SegmentId sid : path.segments) total += network.occupancy(sid).providers;
  return total;
}

RoadNetwork load_edge_list(std::istream& in) {
  RoadNetwork net;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string first;
    if (!(tokens >> first)) continue;
    if (first == "node") {
      Intersection node;
      node.signal = net.default_signal;
      if (!(tokens >> node.id >> node.x >> node.y)) {
        throw ParseError("expected `node id x y`", line_no);
      }
      net.add_intersection(node);
      continue;
    }
    NodeId from = 0;
    NodeId to = 0;
    double length = 0.0;
    double speed = 0.0;
    std::istringstream head(first);
    if (!(head >> from) || !head.eof() || !(tokens >> to >> length >> speed)) {
      throw ParseError("expected `from_id to_id length_m speed_mps`", line_no);
    }
    std::string extra;
    if (tokens >> extra) throw ParseError("trailing token `" + extra + "`", line_no);
    try {
      net.add_segment(from, to, length, speed);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return net;
}

RoadNetwork load_edge_list_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open network file " + file);
  return load_edge_list(in);
}

void write_edge_list(std::ostream& out, const RoadNetwork& network) {
  out.precision(17);
  for (const auto& node : network.intersections()) {
    out << "node " << node.id << ' ' << node.x << ' ' << node.y << '\n';
  }
  for (const auto& seg : network.segments()) {
    out << seg.from << ' ' << seg.to << ' ' << seg.length_m << ' ' << seg.speed_limit_mps << '\n';
  }
}

RoadNetwork make_grid(const GridSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) throw ConfigError("grid needs at least one row and column");
  RoadNetwork net;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      net.add_intersection(Intersection{r * spec.cols + c, c * spec.block_m, r * spec.block_m, net.default_signal});
    }
  }
  Rng rng(spec.seed, 0x67726964);
  auto road = [&](NodeId a, NodeId b) {
    const double factor = 1.0 - spec.speed_spread * rng.uniform();
    const double speed = spec.speed_limit_mps * factor;
    net.add_segment(a, b, spec.block_m, speed);
    net.add_segment(b, a, spec.block_m, speed);
  };
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const NodeId id = r * spec.cols + c;
      if (c + 1 < spec.cols) road(id, id + 1);
      if (r + 1 < spec.rows) road(id, id + spec.cols);
    }
  }
  return net;
}

}  // namespace vesonet
