// Serial reference vs. OpenMP kernels on the flat sentence scan.

#include <benchmark/benchmark.h>

#include <vector>

#include "dcsr/index.hpp"
#include "dcsr/kernels.hpp"
#include "dcsr/rng.hpp"

namespace {

struct Corpus {
  std::size_t dim;
  std::vector<float> rows;
  std::vector<double> queries;
};

Corpus make_corpus(std::size_t rows, std::size_t dim, std::size_t queries) {
  dcsr::Rng rng(42);
  Corpus c{dim, std::vector<float>(rows * dim), std::vector<double>(queries * dim)};
  for (auto& v : c.rows) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : c.queries) v = rng.uniform(-1.0, 1.0);
  return c;
}

void BM_InnerProductsSerial(benchmark::State& state) {
  const auto c = make_corpus(static_cast<std::size_t>(state.range(0)), 64, 1);
  std::vector<double> out(c.rows.size() / c.dim);
  for (auto _ : state) {
    dcsr::kernels::inner_products_serial(c.rows, c.dim, c.queries, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_InnerProductsParallel(benchmark::State& state) {
  const auto c = make_corpus(static_cast<std::size_t>(state.range(0)), 64, 1);
  std::vector<double> out(c.rows.size() / c.dim);
  for (auto _ : state) {
    dcsr::kernels::inner_products(c.rows, c.dim, c.queries, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreMatrixSerial(benchmark::State& state) {
  const auto c = make_corpus(static_cast<std::size_t>(state.range(0)), 64, 32);
  std::vector<double> out(32 * c.rows.size() / c.dim);
  for (auto _ : state) {
    dcsr::kernels::score_matrix_serial(c.rows, c.dim, c.queries, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 32);
}

void BM_ScoreMatrixParallel(benchmark::State& state) {
  const auto c = make_corpus(static_cast<std::size_t>(state.range(0)), 64, 32);
  std::vector<double> out(32 * c.rows.size() / c.dim);
  for (auto _ : state) {
    dcsr::kernels::score_matrix(c.rows, c.dim, c.queries, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 32);
}

void BM_SelectTop(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  dcsr::Rng rng(7);
  std::vector<double> scores(n);
  std::vector<std::size_t> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    ranks[i] = i;
  }
  for (auto _ : state) {
    auto top = dcsr::kernels::select_top(scores, ranks, 300);
    benchmark::DoNotOptimize(top.data());
  }
}

}  // namespace

BENCHMARK(BM_InnerProductsSerial)->Arg(10'000)->Arg(100'000)->Arg(1'000'000);
BENCHMARK(BM_InnerProductsParallel)->Arg(10'000)->Arg(100'000)->Arg(1'000'000);
BENCHMARK(BM_ScoreMatrixSerial)->Arg(10'000)->Arg(100'000);
BENCHMARK(BM_ScoreMatrixParallel)->Arg(10'000)->Arg(100'000);
BENCHMARK(BM_SelectTop)->Arg(10'000)->Arg(1'000'000);

BENCHMARK_MAIN();
