#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vesonet {

using ContentId = std::int64_t;
using UserId = std::int64_t;
using VehicleId = std::int64_t;

struct ContentItem {
  ContentId id = 0;
  std::int64_t size_bytes = 1;
  std::int64_t popularity = 0;
};

struct ConsumptionRecord {
  UserId user = 0;
  ContentId content = 0;
  std::int64_t timestamp = 0;
  friend bool operator==(const ConsumptionRecord&, const ConsumptionRecord&) = default;
};

using ConsumptionLog = std::vector<ConsumptionRecord>;

/// `user_id,content_id,timestamp` with a header row.
void write_consumption_csv(std::ostream& out, const ConsumptionLog& log);
ConsumptionLog read_consumption_csv(std::istream& in);

/// Undirected similarity graph over content ids; weights in (0, 1].
class ContentGraph {
 public:
  struct Neighbor {
    ContentId id;
    double weight;
  };

  void add_node(ContentId id);
  void add_edge(ContentId a, ContentId b, double weight);

  /// Sorted ascending.
  const std::vector<ContentId>& nodes() const { return ids_; }
  std::size_t node_count() const { return ids_.size(); }
  std::size_t edge_count() const;
  bool contains(ContentId id) const { return index_.count(id) != 0; }
  std::size_t index_of(ContentId id) const;
  /// Sorted by neighbor id.
  const std::vector<Neighbor>& neighbors(ContentId id) const;
  double weight(ContentId a, ContentId b) const;  // 0 when absent

 private:
  std::vector<ContentId> ids_;
  std::map<ContentId, std::size_t> index_;
  std::vector<std::vector<Neighbor>> adj_;
};

/// Edge (a, b) iff at least `min_cooccurrence` (>= 1) users consumed both; weight is the
/// Jaccard similarity of their consumer sets.
ContentGraph build_content_graph(const ConsumptionLog& log, int min_cooccurrence = 1);

struct EmbeddingParams {
  int dimension = 16;
  int walk_length = 10;
  int walks_per_node = 10;
  int window = 3;
  double learning_rate = 2.0;
  int epochs = 5;
  std::uint64_t rng_seed = 1;
  double init_scale = 0.5;
  /// Above this many nodes training switches to negative sampling.
  std::size_t full_softmax_limit = 5000;
  int negative_samples = 5;
  bool parallel = false;
};

/// Window-context multiset of `c` from walks_per_node weighted random walks of
/// walk_length intersections started at `c`. Deterministic in (rng_seed, c).
std::vector<ContentId> neighborhood(const ContentGraph& graph, ContentId c, const EmbeddingParams& params);

class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::vector<ContentId> ids, int dimension, std::vector<double> vectors);

  int dimension() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<ContentId>& ids() const { return ids_; }
  bool contains(ContentId id) const { return index_.count(id) != 0; }
  std::size_t row_of(ContentId id) const;
  std::span<const double> vector(ContentId id) const;
  std::span<double> vector(ContentId id);
  std::span<const double> data() const { return vectors_; }
  std::span<double> data() { return vectors_; }

  EmbeddingParams params;
  /// Mean per-context log-likelihood observed during each epoch.
  std::vector<double> epoch_objective;

 private:
  std::vector<ContentId> ids_;
  std::map<ContentId, std::size_t> index_;
  int dim_ = 0;
  std::vector<double> vectors_;
};

/// exp(f(n) . f(c)) / sum_m exp(f(m) . f(c)).
double softmax_prob(const EmbeddingModel& model, ContentId context, ContentId center);

/// Gradient of log Pr(context | center) with respect to every vector (row-major, model
/// layout).
std::vector<double> log_prob_gradient(const EmbeddingModel& model, ContentId context, ContentId center);

/// Skip-gram training by SGD, one step per center node over its whole neighborhood,
/// learning rate decaying linearly to 1% of the start. Full softmax up to
/// full_softmax_limit nodes, negative sampling above.
EmbeddingModel train_embeddings(const ContentGraph& graph, const EmbeddingParams& params);

/// `content_id,v1,...,vd` with a header row; values round-trip exactly.
void write_embedding_csv(std::ostream& out, const EmbeddingModel& model);
EmbeddingModel read_embedding_csv(std::istream& in);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct Vehicle2Vec {
  VehicleId vehicle = 0;
  std::vector<std::vector<double>> rows;
};

/// Rows for the distinct history items present in the model, in first-seen order.
Vehicle2Vec vehicle2vec(const EmbeddingModel& model, VehicleId vehicle, std::span<const ContentId> history);

/// Mean cosine similarity of `item` against the matrix rows, summed in sorted order so
/// the value does not depend on row order. Throws on an empty matrix.
double mean_similarity(const Vehicle2Vec& consumer, std::span<const double> item);

struct SimilarityThreshold {
  double alpha = 0.5;
};

struct NearbyProvider {
  VehicleId id = 0;
  std::vector<ContentId> catalog;
};

struct Recommendation {
  ContentId content = 0;
  double score = 0.0;
  VehicleId source = 0;
};

/// Items held by nearby providers whose mean similarity against some expected consumer's
/// vehicle2vec matrix strictly exceeds alpha. Excludes `own_cache`; consumers with an
/// empty matrix are skipped. Ordered by descending best score, then content id.
/// `similarity_evals` accumulates the number of cosine evaluations.
std::vector<Recommendation> intersection_recommendation(const EmbeddingModel& model,
                                                        std::span<const ContentId> own_cache,
                                                        std::span<const NearbyProvider> nearby,
                                                        std::span<const Vehicle2Vec> expected_consumers,
                                                        SimilarityThreshold threshold,
                                                        std::uint64_t* similarity_evals = nullptr);

}  // namespace vesonet
