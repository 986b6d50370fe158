#include "vesonet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "vesonet/error.hpp"
#include "vesonet/rng.hpp"

namespace vesonet {

PlantedLog gen_log(const LogSpec& spec) {
  if (spec.users <= 0 || spec.items <= 0 || spec.clusters <= 0 || spec.history_length <= 0) {
    throw ConfigError("gen-log: users, items, clusters and history length must be > 0");
  }
  if (spec.clusters > spec.items) throw ConfigError("gen-log: more clusters than items");
  if (!(spec.intra_probability >= 0.0 && spec.intra_probability <= 1.0)) {
    throw ConfigError("gen-log: intra-cluster probability must be in [0, 1]");
  }
  PlantedLog out;
  out.user_cluster.resize(spec.users);
  out.item_cluster.resize(spec.items);
  const auto k = static_cast<std::int64_t>(spec.clusters);
  for (int u = 0; u < spec.users; ++u) out.user_cluster[u] = static_cast<int>(u * k / spec.users);
  std::vector<std::vector<ContentId>> members(spec.clusters);
  for (int i = 0; i < spec.items; ++i) {
    out.item_cluster[i] = static_cast<int>(i * k / spec.items);
    members[out.item_cluster[i]].push_back(i);
  }
  std::vector<std::vector<double>> cdf(spec.clusters);
  for (int c = 0; c < spec.clusters; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < members[c].size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
      cdf[c].push_back(acc);
    }
  }
  auto pick_in = [&](int cluster, Rng& rng) {
    const auto& table = cdf[cluster];
    const double u = rng.uniform() * table.back();
    const auto r = static_cast<std::size_t>(std::upper_bound(table.begin(), table.end(), u) - table.begin());
    return members[cluster][std::min(r, table.size() - 1)];
  };

  Rng rng(spec.seed, 0x6c6f67ULL);
  out.log.reserve(static_cast<std::size_t>(spec.users) * spec.history_length);
  for (int u = 0; u < spec.users; ++u) {
    const int home = out.user_cluster[u];
    for (int h = 0; h < spec.history_length; ++h) {
      int cluster = home;
      if (spec.clusters > 1 && !rng.bernoulli(spec.intra_probability)) {
        cluster = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.clusters - 1)));
        if (cluster >= home) ++cluster;
      }
      out.log.push_back({u, pick_in(cluster, rng), static_cast<std::int64_t>(u) * spec.history_length + h});
    }
  }
  return out;
}

void write_cluster_labels_csv(std::ostream& out, const PlantedLog& planted) {
  out << "kind,id,cluster\n";
  for (std::size_t u = 0; u < planted.user_cluster.size(); ++u) out << "user," << u << ',' << planted.user_cluster[u] << '\n';
  for (std::size_t i = 0; i < planted.item_cluster.size(); ++i) out << "item," << i << ',' << planted.item_cluster[i] << '\n';
}

}  // namespace vesonet
