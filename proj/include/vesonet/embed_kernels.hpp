#pragma once

#include <cstddef>
#include <span>
#include <utility>

// Full-softmax skip-gram kernels over a row-major (rows x dim) embedding matrix in
// which one vector per node serves as both center and context representation.
// The serial versions are the reference; the OpenMP versions partition rows or
// dimensions across threads but keep every reduction in a fixed order, so both
// produce bit-identical results for any thread count.

namespace vesonet::kernels {

struct ContextCount {
  std::size_t row;
  double count;
};

/// Writes d/dW of sum_n count_n * log Pr(n | center) into `grad` (same shape as
/// `vectors`, overwritten) and returns that log-likelihood. `scratch` needs `rows`
/// entries.
double skipgram_gradient_serial(std::span<const double> vectors, std::size_t rows, std::size_t dim,
                                std::size_t center, std::span<const ContextCount> contexts,
                                std::span<double> grad, std::span<double> scratch);

double skipgram_gradient_parallel(std::span<const double> vectors, std::size_t rows, std::size_t dim,
                                  std::size_t center, std::span<const ContextCount> contexts,
                                  std::span<double> grad, std::span<double> scratch);

/// vectors += scale * grad
void axpy_serial(std::span<double> vectors, std::span<const double> grad, double scale);
void axpy_parallel(std::span<double> vectors, std::span<const double> grad, double scale);

/// Softmax probabilities of every row given the center row, into `probs`.
void softmax_row_serial(std::span<const double> vectors, std::size_t rows, std::size_t dim, std::size_t center,
                        std::span<double> probs);

}  // namespace vesonet::kernels
