#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "vesonet/content_embed.hpp"

namespace vesonet {

struct LogSpec {
  int users = 200;
  int items = 200;
  int clusters = 2;
  std::uint64_t seed = 1;
  int history_length = 20;
  /// Probability that a pick stays inside the user's own cluster.
  double intra_probability = 0.9;
  /// Popularity skew inside a cluster (Zipf exponent over item rank).
  double zipf_exponent = 0.8;
};

/// Consumption log with planted user/item clusters and the ground-truth labels.
struct PlantedLog {
  ConsumptionLog log;
  std::vector<int> user_cluster;
  std::vector<int> item_cluster;
};

/// Users and items are split into contiguous, near-equal clusters; item ids are
/// 0..items-1 and user ids 0..users-1.
PlantedLog gen_log(const LogSpec& spec);

/// `kind,id,cluster` rows for users then items.
void write_cluster_labels_csv(std::ostream& out, const PlantedLog& planted);

}  // namespace vesonet
