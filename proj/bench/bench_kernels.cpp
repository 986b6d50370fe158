#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "vesonet/embed_kernels.hpp"
#include "vesonet/radio.hpp"
#include "vesonet/sim.hpp"

using namespace vesonet;

namespace {

std::vector<double> random_matrix(std::size_t rows, std::size_t dim) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> m(rows * dim);
  for (auto& x : m) x = u(gen);
  return m;
}

std::vector<Position> random_positions(std::size_t n) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<std::int64_t> u(0, 300000);
  std::vector<Position> p(n);
  for (auto& q : p) q = {u(gen), u(gen)};
  return p;
}

template <auto Kernel>
void skipgram(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 32;
  const auto vectors = random_matrix(rows, dim);
  std::vector<kernels::ContextCount> ctx;
  for (std::size_t i = 1; i < rows; i += rows / 16 + 1) ctx.push_back({i, 1.0});
  std::vector<double> grad(vectors.size()), scratch(rows);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(vectors, rows, dim, 0, ctx, grad, scratch));
    benchmark::ClobberMemory();
  }
  state.counters["threads"] = omp_get_max_threads();
}

template <auto Kernel>
void unit_disk(benchmark::State& state) {
  const auto nodes = random_positions(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(nodes, 45000));
  state.counters["threads"] = omp_get_max_threads();
}

void sweep_runs(benchmark::State& state) {
  Scenario s;
  s.run_length_ticks = 200;
  const int jobs = static_cast<int>(state.range(0));
  const std::vector<double> values{50, 100};
  const std::vector<Policy> policies{Policy::vesonet};
  for (auto _ : state)
    benchmark::DoNotOptimize(sweep(s, SweepAxis::density, values, 2, jobs, policies));
}

}  // namespace

BENCHMARK(skipgram<kernels::skipgram_gradient_serial>)->Name("skipgram_gradient/serial")->Arg(200)->Arg(2000);
BENCHMARK(skipgram<kernels::skipgram_gradient_parallel>)->Name("skipgram_gradient/openmp")->Arg(200)->Arg(2000);
BENCHMARK(unit_disk<kernels::unit_disk_serial>)->Name("unit_disk/serial")->Arg(200)->Arg(2000);
BENCHMARK(unit_disk<kernels::unit_disk_parallel>)->Name("unit_disk/openmp")->Arg(200)->Arg(2000);
BENCHMARK(sweep_runs)->Name("sweep/jobs")->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
