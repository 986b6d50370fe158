#include "vesonet/embed_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace vesonet::kernels {

namespace {

double dot(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) s += a[j] * b[j];
  return s;
}

/// Turns logits into probabilities in place; returns log of the partition function.
double normalize(std::span<double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - top);
    z += v;
  }
  for (double& v : logits) v /= z;
  return top + std::log(z);
}

/// sum_n count_n * logit_n, read before normalization.
double context_logit_sum(std::span<const double> logits, std::span<const ContextCount> contexts, double& total) {
  double s = 0.0;
  total = 0.0;
  for (const auto& ctx : contexts) {
    s += ctx.count * logits[ctx.row];
    total += ctx.count;
  }
  return s;
}

}  // namespace

void softmax_row_serial(std::span<const double> vectors, std::size_t rows, std::size_t dim, std::size_t center,
                        std::span<double> probs) {
  const double* c = vectors.data() + center * dim;
  for (std::size_t m = 0; m < rows; ++m) probs[m] = dot(vectors.data() + m * dim, c, dim);
  normalize(probs.first(rows));
}

// With z_m = w_m . w_c and K = sum of context counts:
//   dLL/dw_x = (count_x - K p_x) w_c                      for x != c
//   dLL/dw_c = sum_n count_n w_n' - K sum_m p_m w_m'       where w_c' = 2 w_c
double skipgram_gradient_serial(std::span<const double> vectors, std::size_t rows, std::size_t dim,
                                std::size_t center, std::span<const ContextCount> contexts,
                                std::span<double> grad, std::span<double> scratch) {
  const double* c = vectors.data() + center * dim;
  auto probs = scratch.first(rows);
  for (std::size_t m = 0; m < rows; ++m) probs[m] = dot(vectors.data() + m * dim, c, dim);
  double total = 0.0;
  const double logit_sum = context_logit_sum(probs, contexts, total);
  const double ll = logit_sum - total * normalize(probs);

  for (std::size_t x = 0; x < rows; ++x) {
    const double coef = -total * probs[x];
    double* g = grad.data() + x * dim;
    for (std::size_t j = 0; j < dim; ++j) g[j] = coef * c[j];
  }
  for (const auto& ctx : contexts) {
    double* g = grad.data() + ctx.row * dim;
    for (std::size_t j = 0; j < dim; ++j) g[j] += ctx.count * c[j];
  }
  // Center row: the loop above wrote (count_c - K p_c) w_c; replace it.
  double* gc = grad.data() + center * dim;
  for (std::size_t j = 0; j < dim; ++j) {
    double acc = 0.0;
    for (std::size_t m = 0; m < rows; ++m) acc += probs[m] * vectors[m * dim + j] * (m == center ? 2.0 : 1.0);
    acc *= -total;
    for (const auto& ctx : contexts) acc += ctx.count * vectors[ctx.row * dim + j] * (ctx.row == center ? 2.0 : 1.0);
    gc[j] = acc;
  }
  return ll;
}

double skipgram_gradient_parallel(std::span<const double> vectors, std::size_t rows, std::size_t dim,
                                  std::size_t center, std::span<const ContextCount> contexts,
                                  std::span<double> grad, std::span<double> scratch) {
  const double* c = vectors.data() + center * dim;
  const double* w = vectors.data();
  double* probs = scratch.data();
  const auto n = static_cast<long>(rows);
  const auto d = static_cast<long>(dim);

#pragma omp parallel for schedule(static)
  for (long m = 0; m < n; ++m) probs[m] = dot(w + m * d, c, dim);
  double total = 0.0;
  const double logit_sum = context_logit_sum(scratch.first(rows), contexts, total);
  const double ll = logit_sum - total * normalize(scratch.first(rows));

#pragma omp parallel for schedule(static)
  for (long x = 0; x < n; ++x) {
    const double coef = -total * probs[x];
    double* g = grad.data() + x * d;
    for (long j = 0; j < d; ++j) g[j] = coef * c[j];
  }
  for (const auto& ctx : contexts) {
    double* g = grad.data() + ctx.row * dim;
    for (std::size_t j = 0; j < dim; ++j) g[j] += ctx.count * c[j];
  }
  double* gc = grad.data() + center * dim;
#pragma omp parallel for schedule(static)
  for (long j = 0; j < d; ++j) {
    double acc = 0.0;
    for (long m = 0; m < n; ++m) {
      acc += probs[m] * w[m * d + j] * (static_cast<std::size_t>(m) == center ? 2.0 : 1.0);
    }
    acc *= -total;
    for (const auto& ctx : contexts) acc += ctx.count * w[ctx.row * dim + j] * (ctx.row == center ? 2.0 : 1.0);
    gc[j] = acc;
  }
  return ll;
}

void axpy_serial(std::span<double> vectors, std::span<const double> grad, double scale) {
  for (std::size_t i = 0; i < vectors.size(); ++i) vectors[i] += scale * grad[i];
}

void axpy_parallel(std::span<double> vectors, std::span<const double> grad, double scale) {
  const auto n = static_cast<long>(vectors.size());
  double* v = vectors.data();
  const double* g = grad.data();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) v[i] += scale * g[i];
}

}  // namespace vesonet::kernels
