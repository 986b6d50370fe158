#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "test_support.hpp"
#include "vesonet/content_embed.hpp"
#include "vesonet/error.hpp"
#include "vesonet/synthetic.hpp"

using namespace vesonet;

namespace {

EmbeddingModel model_from(std::vector<ContentId> ids, int dim, std::vector<double> values) {
  return EmbeddingModel(std::move(ids), dim, std::move(values));
}

EmbeddingModel random_model(std::uint64_t seed, std::size_t n, int dim, double scale = 1.0) {
  Rng rng(seed, 5);
  std::vector<ContentId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<double> v(n * dim);
  for (double& x : v) x = rng.normal() * scale;
  return model_from(ids, dim, v);
}

double log_softmax(const EmbeddingModel& m, ContentId ctx, ContentId center) {
  return std::log(softmax_prob(m, ctx, center));
}

}  // namespace

TEST_CASE("content graph edges use Jaccard similarity of consumer sets") {
  // item 1 and 2: identical consumers; item 3 and 4: {1,2,3} vs {2,3,4}; item 5 alone.
  ConsumptionLog log{{1, 1, 0}, {2, 1, 0}, {1, 2, 0}, {2, 2, 0}, {1, 3, 0}, {2, 3, 0}, {3, 3, 0},
                     {2, 4, 0}, {3, 4, 0}, {4, 4, 0}, {9, 5, 0}};
  const auto g = build_content_graph(log, 1);
  CHECK(g.node_count() == 5);
  CHECK(g.weight(1, 2) == 1.0);
  CHECK(g.weight(3, 4) == doctest::Approx(0.5));
  CHECK(g.weight(2, 1) == g.weight(1, 2));
  CHECK(g.weight(5, 1) == 0.0);
  CHECK(g.neighbors(5).empty());
  // Raising the co-occurrence floor drops pairs with fewer shared users.
  const auto strict = build_content_graph(log, 3);
  CHECK(strict.weight(3, 4) == 0.0);
  CHECK_THROWS_AS(build_content_graph({}, 1), ConfigError);
}

TEST_CASE("content graph rejects self loops and out-of-range weights") {
  ContentGraph g;
  CHECK_THROWS_AS(g.add_edge(1, 1, 0.5), ConfigError);
  CHECK_THROWS_AS(g.add_edge(1, 2, 0.0), ConfigError);
  CHECK_THROWS_AS(g.add_edge(1, 2, 1.5), ConfigError);
}

TEST_CASE("neighborhood cases") {
  ContentGraph g;
  g.add_node(7);
  g.add_edge(1, 2, 1.0);
  EmbeddingParams p;
  p.walk_length = 2;
  p.walks_per_node = 4;
  CHECK(neighborhood(g, 7, p).empty());
  const auto n1 = neighborhood(g, 1, p);
  CHECK(std::set<ContentId>(n1.begin(), n1.end()) == std::set<ContentId>{2});
  const auto n2 = neighborhood(g, 2, p);
  CHECK(std::set<ContentId>(n2.begin(), n2.end()) == std::set<ContentId>{1});

  ContentGraph path;
  path.add_edge(1, 2, 0.7);
  path.add_edge(2, 3, 0.4);
  EmbeddingParams q;
  q.rng_seed = 99;
  const auto a = neighborhood(path, 2, q);
  CHECK(a == neighborhood(path, 2, q));
  CHECK(!a.empty());
  for (ContentId c : a) CHECK((c == 1 || c == 2 || c == 3));
}

TEST_CASE("softmax_prob closed forms") {
  const auto same = model_from({1, 2, 3, 4}, 2, {0.3, 0.1, 0.3, 0.1, 0.3, 0.1, 0.3, 0.1});
  for (ContentId c : same.ids()) CHECK(softmax_prob(same, c, 1) == doctest::Approx(0.25));

  // f(1) . f(1) = 2 and f(2) . f(1) = 0.
  const auto two = model_from({1, 2}, 2, {std::sqrt(2.0), 0.0, 0.0, 1.0});
  CHECK(softmax_prob(two, 1, 1) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(softmax_prob(two, 2, 1) == doctest::Approx(0.1192).epsilon(1e-3));
  CHECK(softmax_prob(two, 1, 1) == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)));
}

TEST_CASE("softmax rows sum to one on random models") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto m = random_model(seed, 25, 6, 1.5);
    for (ContentId c = 0; c < 25; c += 6) {
      double s = 0.0;
      for (ContentId n : m.ids()) s += softmax_prob(m, n, c);
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("log-likelihood gradient matches central finite differences") {
  Rng pick(3, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    auto m = random_model(100 + trial, 8, 3, 0.7);
    const ContentId center = static_cast<ContentId>(pick.below(8));
    const ContentId ctx = static_cast<ContentId>(pick.below(8));  // may equal center
    const auto grad = log_prob_gradient(m, ctx, center);
    const std::size_t k = pick.below(grad.size());
    const double h = 1e-5;
    const double saved = m.data()[k];
    m.data()[k] = saved + h;
    const double up = log_softmax(m, ctx, center);
    m.data()[k] = saved - h;
    const double down = log_softmax(m, ctx, center);
    m.data()[k] = saved;
    worst = std::max(worst, testing::relative_error(grad[k], (up - down) / (2 * h), 1e-6));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training separates planted clusters and improves the objective") {
  LogSpec ls;
  ls.users = 120;
  ls.items = 60;
  ls.clusters = 2;
  ls.seed = 11;
  const auto planted = gen_log(ls);
  const auto graph = build_content_graph(planted.log);
  EmbeddingParams p;
  p.dimension = 8;
  const auto m = train_embeddings(graph, p);
  double intra = 0.0, inter = 0.0;
  int ni = 0, ne = 0;
  for (ContentId a : m.ids()) {
    for (ContentId b : m.ids()) {
      if (a >= b) continue;
      const double c = cosine_similarity(m.vector(a), m.vector(b));
      if (planted.item_cluster[a] == planted.item_cluster[b]) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++ne;
      }
    }
  }
  CHECK(intra / ni > inter / ne);
  REQUIRE(m.epoch_objective.size() == 5);
  CHECK(m.epoch_objective.back() > m.epoch_objective.front());
}

TEST_CASE("two disconnected cliques end up closer inside than across") {
  ContentGraph g;
  for (int base : {0, 10}) {
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) g.add_edge(base + a, base + b, 1.0);
    }
  }
  EmbeddingParams p;
  p.dimension = 3;
  p.epochs = 10;
  const auto m = train_embeddings(g, p);
  double intra = 0.0, inter = 0.0;
  int ni = 0, ne = 0;
  for (ContentId a : m.ids()) {
    for (ContentId b : m.ids()) {
      if (a >= b) continue;
      const double c = cosine_similarity(m.vector(a), m.vector(b));
      if ((a < 10) == (b < 10)) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++ne;
      }
    }
  }
  CHECK(intra / ni > inter / ne);
}

TEST_CASE("single edge with d = 1: the product grows positive") {
  ContentGraph g;
  g.add_edge(1, 2, 1.0);
  EmbeddingParams p;
  p.dimension = 1;
  p.walk_length = 2;
  p.epochs = 1;
  const auto start = train_embeddings(g, p);
  p.epochs = 20;
  const auto end = train_embeddings(g, p);
  const double before = start.vector(1)[0] * start.vector(2)[0];
  const double after = end.vector(1)[0] * end.vector(2)[0];
  CHECK(after > 0.0);
  CHECK(after > before);
}

TEST_CASE("training rejects d >= |V|") {
  ContentGraph g;
  g.add_edge(1, 2, 1.0);
  g.add_edge(2, 3, 1.0);
  EmbeddingParams p;
  p.dimension = 3;
  CHECK_THROWS_AS(train_embeddings(g, p), ConfigError);
}

TEST_CASE("training is bit-reproducible and the OpenMP kernel matches the serial one") {
  LogSpec ls;
  ls.users = 60;
  ls.items = 40;
  const auto graph = build_content_graph(gen_log(ls).log);
  EmbeddingParams p;
  p.dimension = 6;
  const auto a = train_embeddings(graph, p);
  const auto b = train_embeddings(graph, p);
  p.parallel = true;
  const auto c = train_embeddings(graph, p);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  CHECK(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST_CASE("negative sampling path trains above the full-softmax limit") {
  ContentGraph graph;
  for (int b = 0; b < 4; ++b) {
    for (int i = 0; i < 8; ++i) {
      for (int j = i + 1; j < 8; ++j) graph.add_edge(b * 8 + i, b * 8 + j, 1.0);
    }
  }
  EmbeddingParams p;
  p.dimension = 4;
  p.learning_rate = 0.5;
  p.epochs = 8;
  p.full_softmax_limit = 10;
  const auto m = train_embeddings(graph, p);
  CHECK(m.size() == graph.node_count());
  for (double v : m.data()) CHECK(std::isfinite(v));
  CHECK(m.epoch_objective.back() > m.epoch_objective.front());
}

TEST_CASE("cosine similarity cases") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{1.0, 1.0};
  const std::vector<double> o{0.0, 2.0};
  CHECK(cosine_similarity(b, b) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, o) == 0.0);
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.7071).epsilon(1e-4));
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(cosine_similarity(a, zero), UndefinedSimilarityError);
  const std::vector<double> three{1.0, 0.0, 0.0};
  CHECK_THROWS_AS(cosine_similarity(a, three), UndefinedSimilarityError);
}

namespace {

/// Unit vector at a given cosine to (1, 0).
std::vector<double> at_cos(double c) { return {c, std::sqrt(1.0 - c * c)}; }

}  // namespace

TEST_CASE("intersection recommendation thresholds") {
  // item 10 = (1, 0); history items at cosines 0.9, 0.7, 0.5; item 11 identical to item 1.
  std::vector<double> values;
  for (auto v : {std::vector<double>{1.0, 0.0}, at_cos(0.9), at_cos(0.7), at_cos(0.5)}) {
    values.insert(values.end(), v.begin(), v.end());
  }
  const auto m = model_from({10, 1, 2, 3}, 2, values);
  const std::vector<NearbyProvider> nearby{{42, {10}}};

  const std::vector<ContentId> one{10};
  const std::vector<Vehicle2Vec> identical{vehicle2vec(m, 7, one)};
  auto r = intersection_recommendation(m, {}, nearby, identical, SimilarityThreshold{0.8});
  REQUIRE(r.size() == 1);
  CHECK(r[0].content == 10);
  CHECK(r[0].source == 42);
  CHECK(r[0].score == doctest::Approx(1.0));
  CHECK(intersection_recommendation(m, {}, nearby, identical, SimilarityThreshold{1.0}).empty());

  const std::vector<ContentId> history{1, 2, 3};
  const std::vector<Vehicle2Vec> three{vehicle2vec(m, 8, history)};
  CHECK(mean_similarity(three[0], m.vector(10)) == doctest::Approx(0.7));
  CHECK(intersection_recommendation(m, {}, nearby, three, SimilarityThreshold{0.6}).size() == 1);
  CHECK(intersection_recommendation(m, {}, nearby, three, SimilarityThreshold{0.75}).empty());

  // Already cached by the downloading provider.
  CHECK(intersection_recommendation(m, one, nearby, identical, SimilarityThreshold{0.1}).empty());
  // Consumers without history contribute nothing.
  const std::vector<Vehicle2Vec> empty{Vehicle2Vec{9, {}}};
  CHECK(intersection_recommendation(m, {}, nearby, empty, SimilarityThreshold{0.0}).empty());
  CHECK_THROWS_AS(intersection_recommendation(m, {}, nearby, three, SimilarityThreshold{1.5}), ConfigError);
}

TEST_CASE("recommendation is monotone in alpha and counts similarity evaluations") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto m = random_model(seed, 30, 4);
    Rng rng(seed, 9);
    std::vector<NearbyProvider> nearby;
    for (int v = 0; v < 3; ++v) {
      NearbyProvider p{v, {}};
      for (int k = 0; k < 6; ++k) p.catalog.push_back(static_cast<ContentId>(rng.below(30)));
      nearby.push_back(p);
    }
    std::vector<Vehicle2Vec> consumers;
    for (int c = 0; c < 3; ++c) {
      std::vector<ContentId> h;
      for (int k = 0; k < 4; ++k) h.push_back(static_cast<ContentId>(rng.below(30)));
      consumers.push_back(vehicle2vec(m, 100 + c, h));
    }
    std::vector<std::set<ContentId>> sets;
    for (double alpha : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      std::uint64_t evals = 0;
      std::set<ContentId> s;
      const auto recs = intersection_recommendation(m, {}, nearby, consumers, SimilarityThreshold{alpha}, &evals);
      for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i - 1].score >= recs[i].score);
      for (const auto& r : recs) s.insert(r.content);
      CHECK(evals > 0);
      sets.push_back(s);
    }
    for (std::size_t i = 1; i < sets.size(); ++i) {
      CHECK(std::includes(sets[i - 1].begin(), sets[i - 1].end(), sets[i].begin(), sets[i].end()));
    }
  }
}

TEST_CASE("mean similarity does not depend on matrix row order") {
  Rng rng(4, 4);
  for (int trial = 0; trial < 50; ++trial) {
    Vehicle2Vec v{1, {}};
    for (int r = 0; r < 7; ++r) v.rows.push_back({rng.normal(), rng.normal(), rng.normal()});
    const std::vector<double> item{rng.normal(), rng.normal(), rng.normal()};
    const double forward = mean_similarity(v, item);
    std::reverse(v.rows.begin(), v.rows.end());
    std::swap(v.rows[1], v.rows[4]);
    CHECK(mean_similarity(v, item) == forward);
  }
}

TEST_CASE("vehicle2vec keeps distinct embedded history items") {
  const auto m = model_from({1, 2}, 1, {0.5, -0.5});
  const std::vector<ContentId> history{2, 1, 2, 99};
  const auto v = vehicle2vec(m, 3, history);
  REQUIRE(v.rows.size() == 2);
  CHECK(v.rows[0][0] == -0.5);
  CHECK(v.rows[1][0] == 0.5);
}

TEST_CASE("consumption and embedding CSV round trip exactly") {
  const auto planted = gen_log(LogSpec{30, 20, 2, 5, 6, 0.9, 0.8});
  std::stringstream buf;
  write_consumption_csv(buf, planted.log);
  CHECK(read_consumption_csv(buf) == planted.log);

  const auto m = random_model(8, 12, 5);
  std::stringstream emb;
  write_embedding_csv(emb, m);
  const auto back = read_embedding_csv(emb);
  CHECK(back.ids() == m.ids());
  CHECK(std::equal(back.data().begin(), back.data().end(), m.data().begin()));

  std::istringstream bad("user_id,content_id,timestamp\n1,2,3\n1,x,3\n");
  try {
    read_consumption_csv(bad);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
    CHECK(e.column == 2);
  }
}

TEST_CASE("planted log generator") {
  LogSpec ls;
  ls.clusters = 2;
  ls.intra_probability = 1.0;
  const auto planted = gen_log(ls);
  const auto g = build_content_graph(planted.log);
  for (ContentId a : g.nodes()) {
    for (const auto& n : g.neighbors(a)) CHECK(planted.item_cluster[a] == planted.item_cluster[n.id]);
  }
  std::ostringstream x, y;
  write_consumption_csv(x, gen_log(ls).log);
  write_consumption_csv(y, gen_log(ls).log);
  CHECK(x.str() == y.str());

  const auto t0 = std::chrono::steady_clock::now();
  const auto big = gen_log(LogSpec{2000, 5000, 10, 3, 20, 0.9, 0.8});
  std::ostringstream sink;
  write_consumption_csv(sink, big.log);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(big.log.size() == 40000);
  CHECK(seconds < 10.0);
}
