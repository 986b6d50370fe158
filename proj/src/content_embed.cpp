#include "vesonet/content_embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "vesonet/embed_kernels.hpp"
#include "vesonet/error.hpp"
#include "vesonet/rng.hpp"

namespace vesonet {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::int64_t parse_int(const std::string& s, std::size_t line_no, std::size_t column) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ParseError("expected an integer, got `" + s + "`", line_no, column);
  }
  if (used != s.size()) throw ParseError("expected an integer, got `" + s + "`", line_no, column);
  return v;
}

double parse_double(const std::string& s, std::size_t line_no, std::size_t column) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError("expected a number, got `" + s + "`", line_no, column);
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void write_consumption_csv(std::ostream& out, const ConsumptionLog& log) {
  out << "user_id,content_id,timestamp\n";
  for (const auto& r : log) out << r.user << ',' << r.content << ',' << r.timestamp << '\n';
}

ConsumptionLog read_consumption_csv(std::istream& in) {
  ConsumptionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("user_id", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
    log.push_back({parse_int(f[0], line_no, 1), parse_int(f[1], line_no, 2), parse_int(f[2], line_no, 3)});
  }
  return log;
}

void ContentGraph::add_node(ContentId id) {
  if (contains(id)) return;
  auto pos = std::lower_bound(ids_.begin(), ids_.end(), id);
  const auto at = static_cast<std::size_t>(pos - ids_.begin());
  ids_.insert(pos, id);
  adj_.insert(adj_.begin() + static_cast<std::ptrdiff_t>(at), std::vector<Neighbor>{});
  for (auto& [key, idx] : index_) {
    if (idx >= at) ++idx;
  }
  index_.emplace(id, at);
}

void ContentGraph::add_edge(ContentId a, ContentId b, double weight) {
  if (a == b) throw ConfigError("content graph: self-loop on " + std::to_string(a));
  if (!(weight > 0.0 && weight <= 1.0)) throw ConfigError("content graph: weight must be in (0, 1]");
  add_node(a);
  add_node(b);
  auto link = [&](ContentId from, ContentId to) {
    auto& list = adj_[index_of(from)];
    auto pos = std::lower_bound(list.begin(), list.end(), to, [](const Neighbor& n, ContentId id) { return n.id < id; });
    if (pos != list.end() && pos->id == to) {
      pos->weight = weight;
    } else {
      list.insert(pos, Neighbor{to, weight});
    }
  };
  link(a, b);
  link(b, a);
}

std::size_t ContentGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& list : adj_) total += list.size();
  return total / 2;
}

std::size_t ContentGraph::index_of(ContentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ConfigError("content " + std::to_string(id) + " is not in the graph");
  return it->second;
}

const std::vector<ContentGraph::Neighbor>& ContentGraph::neighbors(ContentId id) const { return adj_[index_of(id)]; }

double ContentGraph::weight(ContentId a, ContentId b) const {
  if (!contains(a)) return 0.0;
  for (const auto& n : neighbors(a)) {
    if (n.id == b) return n.weight;
  }
  return 0.0;
}

ContentGraph build_content_graph(const ConsumptionLog& log, int min_cooccurrence) {
  if (log.empty()) throw ConfigError("empty consumption log: no content graph");
  min_cooccurrence = std::max(min_cooccurrence, 1);

  std::vector<ContentId> ids;
  for (const auto& r : log) ids.push_back(r.content);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto dense = [&](ContentId c) {
    return static_cast<std::uint64_t>(std::lower_bound(ids.begin(), ids.end(), c) - ids.begin());
  };

  std::map<UserId, std::vector<std::uint64_t>> by_user;
  for (const auto& r : log) by_user[r.user].push_back(dense(r.content));
  std::vector<std::int64_t> consumers(ids.size(), 0);
  std::unordered_map<std::uint64_t, std::int64_t> pair_count;
  for (auto& [user, items] : by_user) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    for (auto c : items) ++consumers[c];
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j) ++pair_count[items[i] << 32 | items[j]];
    }
  }
  std::vector<std::pair<std::uint64_t, std::int64_t>> pairs(pair_count.begin(), pair_count.end());
  std::sort(pairs.begin(), pairs.end());

  ContentGraph graph;
  for (ContentId c : ids) graph.add_node(c);
  for (const auto& [key, both] : pairs) {
    if (both < min_cooccurrence) continue;
    const auto a = key >> 32;
    const auto b = key & 0xffffffffULL;
    const double jaccard = static_cast<double>(both) / static_cast<double>(consumers[a] + consumers[b] - both);
    graph.add_edge(ids[a], ids[b], jaccard);
  }
  return graph;
}

namespace {

std::vector<ContentId> random_walk(const ContentGraph& graph, ContentId start, int length, Rng& rng) {
  std::vector<ContentId> walk{start};
  while (static_cast<int>(walk.size()) < length) {
    const auto& nbrs = graph.neighbors(walk.back());
    if (nbrs.empty()) break;
    double total = 0.0;
    for (const auto& n : nbrs) total += n.weight;
    double pick = rng.uniform() * total;
    ContentId next = nbrs.back().id;
    for (const auto& n : nbrs) {
      if (pick < n.weight) {
        next = n.id;
        break;
      }
      pick -= n.weight;
    }
    walk.push_back(next);
  }
  return walk;
}

}  // namespace

std::vector<ContentId> neighborhood(const ContentGraph& graph, ContentId c, const EmbeddingParams& params) {
  graph.index_of(c);
  Rng rng(params.rng_seed, 0x6e6272ULL ^ Rng::mix(static_cast<std::uint64_t>(c)));
  std::vector<ContentId> out;
  for (int w = 0; w < params.walks_per_node; ++w) {
    const auto walk = random_walk(graph, c, params.walk_length, rng);
    const auto len = static_cast<int>(walk.size());
    for (int i = 0; i < len; ++i) {
      if (walk[i] != c) continue;
      for (int j = std::max(0, i - params.window); j <= std::min(len - 1, i + params.window); ++j) {
        if (j != i) out.push_back(walk[j]);
      }
    }
  }
  return out;
}

EmbeddingModel::EmbeddingModel(std::vector<ContentId> ids, int dimension, std::vector<double> vectors)
    : ids_(std::move(ids)), dim_(dimension), vectors_(std::move(vectors)) {
  if (dim_ < 1) throw ConfigError("embedding dimension must be >= 1");
  if (vectors_.size() != ids_.size() * static_cast<std::size_t>(dim_)) {
    throw ConfigError("embedding matrix shape does not match ids x dimension");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw ConfigError("duplicate content id in embedding");
  }
}

std::size_t EmbeddingModel::row_of(ContentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ConfigError("content " + std::to_string(id) + " has no embedding");
  return it->second;
}

std::span<const double> EmbeddingModel::vector(ContentId id) const {
  return std::span<const double>(vectors_).subspan(row_of(id) * dim_, dim_);
}

std::span<double> EmbeddingModel::vector(ContentId id) {
  return std::span<double>(vectors_).subspan(row_of(id) * dim_, dim_);
}

double softmax_prob(const EmbeddingModel& model, ContentId context, ContentId center) {
  std::vector<double> probs(model.size());
  kernels::softmax_row_serial(model.data(), model.size(), model.dimension(), model.row_of(center), probs);
  return probs[model.row_of(context)];
}

std::vector<double> log_prob_gradient(const EmbeddingModel& model, ContentId context, ContentId center) {
  std::vector<double> grad(model.data().size());
  std::vector<double> scratch(model.size());
  const kernels::ContextCount ctx{model.row_of(context), 1.0};
  kernels::skipgram_gradient_serial(model.data(), model.size(), model.dimension(), model.row_of(center),
                                    std::span(&ctx, 1), grad, scratch);
  return grad;
}

namespace {

void train_full_softmax(EmbeddingModel& model, const std::vector<std::vector<kernels::ContextCount>>& contexts,
                        const EmbeddingParams& p, Rng& rng) {
  const std::size_t n = model.size();
  const std::size_t d = static_cast<std::size_t>(p.dimension);
  std::vector<double> grad(n * d);
  std::vector<double> scratch(n);
  std::vector<std::size_t> order(n);
  const double total_steps = static_cast<double>(p.epochs) * static_cast<double>(n);
  double step = 0.0;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double ll_sum = 0.0;
    double seen = 0.0;
    for (std::size_t center : order) {
      const auto& ctx = contexts[center];
      const double lr = p.learning_rate * std::max(0.01, 1.0 - step / total_steps);
      step += 1.0;
      if (ctx.empty()) continue;
      double k = 0.0;
      for (const auto& c : ctx) k += c.count;
      const double ll = p.parallel ? kernels::skipgram_gradient_parallel(model.data(), n, d, center, ctx, grad, scratch)
                                   : kernels::skipgram_gradient_serial(model.data(), n, d, center, ctx, grad, scratch);
      if (p.parallel) {
        kernels::axpy_parallel(model.data(), grad, lr / k);
      } else {
        kernels::axpy_serial(model.data(), grad, lr / k);
      }
      ll_sum += ll;
      seen += k;
    }
    model.epoch_objective.push_back(seen > 0.0 ? ll_sum / seen : 0.0);
  }
}

void train_negative_sampling(EmbeddingModel& model, const std::vector<std::vector<kernels::ContextCount>>& contexts,
                             const EmbeddingParams& p, Rng& rng) {
  const std::size_t n = model.size();
  const std::size_t d = static_cast<std::size_t>(p.dimension);
  auto w = model.data();
  // Unigram^0.75 noise distribution over context frequency.
  std::vector<double> freq(n, 0.0);
  for (const auto& list : contexts) {
    for (const auto& c : list) freq[c.row] += c.count;
  }
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::pow(freq[i] + 1.0, 0.75);
    cdf[i] = acc;
  }
  auto sample = [&] {
    const double u = rng.uniform() * acc;
    return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };
  std::vector<double> gc(d);
  const double total_steps = static_cast<double>(p.epochs) * static_cast<double>(n);
  double step = 0.0;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    double obj = 0.0;
    double seen = 0.0;
    for (std::size_t center = 0; center < n; ++center) {
      const double lr = p.learning_rate * std::max(0.01, 1.0 - step / total_steps);
      step += 1.0;
      double* c = w.data() + center * d;
      double k_total = 0.0;
      for (const auto& ctx : contexts[center]) k_total += ctx.count;
      for (const auto& ctx : contexts[center]) {
        std::fill(gc.begin(), gc.end(), 0.0);
        auto update = [&](std::size_t row, double label, double weight) {
          double* v = w.data() + row * d;
          double z = 0.0;
          for (std::size_t j = 0; j < d; ++j) z += v[j] * c[j];
          const double s = sigmoid(z);
          obj += weight * (label > 0 ? std::log(std::max(s, 1e-300)) : std::log(std::max(1.0 - s, 1e-300)));
          const double g = weight / k_total * (label - s) * lr;
          for (std::size_t j = 0; j < d; ++j) {
            gc[j] += g * v[j];
            if (row != center) v[j] += g * c[j];
          }
        };
        update(ctx.row, 1.0, ctx.count);
        for (int k = 0; k < p.negative_samples; ++k) update(sample(), 0.0, ctx.count);
        for (std::size_t j = 0; j < d; ++j) c[j] += gc[j];
        seen += ctx.count;
      }
    }
    model.epoch_objective.push_back(seen > 0.0 ? obj / seen : 0.0);
  }
}

}  // namespace

EmbeddingModel train_embeddings(const ContentGraph& graph, const EmbeddingParams& params) {
  const std::size_t n = graph.node_count();
  if (n < 2) throw ConfigError("embedding training needs at least 2 content nodes");
  if (params.dimension < 1 || static_cast<std::size_t>(params.dimension) >= n) {
    throw ConfigError("embedding dimension must satisfy 1 <= d < |V_c|");
  }
  if (params.walk_length < 1 || params.walks_per_node < 1 || params.window < 1 || params.epochs < 1 ||
      !(params.learning_rate > 0.0)) {
    throw ConfigError("embedding walk/window/epoch parameters must be positive");
  }
  const std::size_t d = static_cast<std::size_t>(params.dimension);
  Rng rng(params.rng_seed, 0x656d62ULL);
  std::vector<double> init(n * d);
  for (double& v : init) v = (rng.uniform() - 0.5) * params.init_scale;
  EmbeddingModel model(graph.nodes(), params.dimension, std::move(init));
  model.params = params;

  std::vector<std::vector<kernels::ContextCount>> contexts(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::size_t, double> counts;
    for (ContentId ctx : neighborhood(graph, graph.nodes()[i], params)) counts[graph.index_of(ctx)] += 1.0;
    for (const auto& [row, count] : counts) contexts[i].push_back({row, count});
  }
  if (n <= params.full_softmax_limit) {
    train_full_softmax(model, contexts, params, rng);
  } else {
    train_negative_sampling(model, contexts, params, rng);
  }
  for (double v : model.data()) {
    if (!std::isfinite(v)) throw Error("embedding training diverged; lower the learning rate");
  }
  return model;
}

void write_embedding_csv(std::ostream& out, const EmbeddingModel& model) {
  out << "content_id";
  for (int j = 1; j <= model.dimension(); ++j) out << ",v" << j;
  out << '\n';
  for (ContentId id : model.ids()) {
    out << id;
    for (double v : model.vector(id)) out << ',' << format_double(v);
    out << '\n';
  }
}

EmbeddingModel read_embedding_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<ContentId> ids;
  std::vector<double> values;
  int dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (line_no == 1 && !f.empty() && f[0] == "content_id") {
      dim = static_cast<int>(f.size()) - 1;
      continue;
    }
    if (dim < 0) dim = static_cast<int>(f.size()) - 1;
    if (static_cast<int>(f.size()) != dim + 1) throw ParseError("row width does not match the header", line_no);
    ids.push_back(parse_int(f[0], line_no, 1));
    for (int j = 1; j <= dim; ++j) values.push_back(parse_double(f[j], line_no, j + 1));
  }
  if (dim < 1) throw ParseError("embedding file has no vector columns", line_no);
  return EmbeddingModel(std::move(ids), dim, std::move(values));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UndefinedSimilarityError("cosine similarity of vectors with different lengths");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw UndefinedSimilarityError("cosine similarity with a zero vector");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

Vehicle2Vec vehicle2vec(const EmbeddingModel& model, VehicleId vehicle, std::span<const ContentId> history) {
  Vehicle2Vec out{vehicle, {}};
  std::vector<ContentId> seen;
  for (ContentId c : history) {
    if (!model.contains(c) || std::find(seen.begin(), seen.end(), c) != seen.end()) continue;
    seen.push_back(c);
    const auto v = model.vector(c);
    out.rows.emplace_back(v.begin(), v.end());
  }
  return out;
}

double mean_similarity(const Vehicle2Vec& consumer, std::span<const double> item) {
  if (consumer.rows.empty()) throw UndefinedSimilarityError("mean similarity over an empty vehicle2vec matrix");
  std::vector<double> sims;
  sims.reserve(consumer.rows.size());
  for (const auto& row : consumer.rows) sims.push_back(cosine_similarity(row, item));
  std::sort(sims.begin(), sims.end());
  double sum = 0.0;
  for (double s : sims) sum += s;
  return sum / static_cast<double>(sims.size());
}

std::vector<Recommendation> intersection_recommendation(const EmbeddingModel& model,
                                                        std::span<const ContentId> own_cache,
                                                        std::span<const NearbyProvider> nearby,
                                                        std::span<const Vehicle2Vec> expected_consumers,
                                                        SimilarityThreshold threshold,
                                                        std::uint64_t* similarity_evals) {
  if (!(threshold.alpha >= 0.0 && threshold.alpha <= 1.0)) {
    throw ConfigError("content similarity threshold alpha must be in [0, 1]");
  }
  std::map<ContentId, Recommendation> picked;
  for (const auto& provider : nearby) {
    for (ContentId item : provider.catalog) {
      if (std::find(own_cache.begin(), own_cache.end(), item) != own_cache.end()) continue;
      if (!model.contains(item)) continue;
      const auto vec = model.vector(item);
      for (const auto& consumer : expected_consumers) {
        if (consumer.rows.empty()) continue;
        if (similarity_evals) *similarity_evals += consumer.rows.size();
        const double score = mean_similarity(consumer, vec);
        if (score > threshold.alpha) {
          auto [it, fresh] = picked.try_emplace(item, Recommendation{item, score, provider.id});
          if (!fresh && score > it->second.score) it->second.score = score;
        }
      }
    }
  }
  std::vector<Recommendation> out;
  out.reserve(picked.size());
  for (const auto& [id, rec] : picked) out.push_back(rec);
  std::stable_sort(out.begin(), out.end(),
                   [](const Recommendation& a, const Recommendation& b) { return a.score > b.score; });
  return out;
}

}  // namespace vesonet
