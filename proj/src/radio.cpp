#include "vesonet/radio.hpp"

#include <queue>

namespace vesonet {

namespace kernels {

Adjacency unit_disk_serial(std::span<const Position> nodes, std::int64_t range_cm) {
  const std::size_t n = nodes.size();
  Adjacency adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && in_range(nodes[i], nodes[j], range_cm)) adj[i].push_back(static_cast<std::uint32_t>(j));
  return adj;
}

Adjacency unit_disk_parallel(std::span<const Position> nodes, std::int64_t range_cm) {
  const std::int64_t n = static_cast<std::int64_t>(nodes.size());
  Adjacency adj(nodes.size());
  // Rows are independent, so the result matches the serial kernel exactly.
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& row = adj[i];
    for (std::int64_t j = 0; j < n; ++j)
      if (i != j && in_range(nodes[i], nodes[j], range_cm)) row.push_back(static_cast<std::uint32_t>(j));
  }
  return adj;
}

}  // namespace kernels

std::vector<std::uint32_t> components(const Adjacency& adj) {
  const std::uint32_t none = UINT32_MAX;
  std::vector<std::uint32_t> label(adj.size(), none);
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < adj.size(); ++s) {
    if (label[s] != none) continue;
    label[s] = s;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::uint32_t u = stack.back();
      stack.pop_back();
      for (std::uint32_t v : adj[u])
        if (label[v] == none) {
          label[v] = s;
          stack.push_back(v);
        }
    }
  }
  return label;
}

std::vector<int> hop_distances(const Adjacency& adj, std::uint32_t source, int max_hops) {
  std::vector<int> hops(adj.size(), -1);
  std::queue<std::uint32_t> q;
  hops[source] = 0;
  q.push(source);
  while (!q.empty()) {
    const std::uint32_t u = q.front();
    q.pop();
    if (hops[u] == max_hops) continue;
    for (std::uint32_t v : adj[u])
      if (hops[v] < 0) {
        hops[v] = hops[u] + 1;
        q.push(v);
      }
  }
  return hops;
}

}  // namespace vesonet
