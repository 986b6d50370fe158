#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace vesonet {

/// Planar position in centimetres; integer so every platform agrees on distances.
struct Position {
  std::int64_t x_cm = 0;
  std::int64_t y_cm = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

inline std::int64_t squared_distance(const Position& a, const Position& b) {
  const std::int64_t dx = a.x_cm - b.x_cm;
  const std::int64_t dy = a.y_cm - b.y_cm;
  return dx * dx + dy * dy;
}

inline bool in_range(const Position& a, const Position& b, std::int64_t range_cm) {
  return squared_distance(a, b) <= range_cm * range_cm;
}

/// Sorted neighbour lists of the unit-disk graph.
using Adjacency = std::vector<std::vector<std::uint32_t>>;

namespace kernels {

Adjacency unit_disk_serial(std::span<const Position> nodes, std::int64_t range_cm);
Adjacency unit_disk_parallel(std::span<const Position> nodes, std::int64_t range_cm);

}  // namespace kernels

/// Component label per node: the smallest node index in its component.
std::vector<std::uint32_t> components(const Adjacency& adj);

/// Breadth-first hop counts from `source` (-1 when unreachable or farther than max_hops).
std::vector<int> hop_distances(const Adjacency& adj, std::uint32_t source, int max_hops);

}  // namespace vesonet
