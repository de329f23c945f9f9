// Serial reference kernels against their OpenMP counterparts, plus the
// dense solve behind a visual-to-semantic fit at ResNet feature width.
//
//   zsl_bench --benchmark_filter=gram

#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "zsl/data_io.hpp"
#include "zsl/kernels.hpp"
#include "zsl/ridge.hpp"

namespace {

using namespace zsl;

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

FeatureMatrix random_features(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  return make_feature_matrix(random_matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim), seed), {});
}

void set_threads(benchmark::State& state) { state.counters["threads"] = omp_get_max_threads(); }

// ---------------------------------------------------------------------------

template <auto Kernel>
void BM_class_sums(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t classes = 1000;
  const auto x = random_features(n, 2048, 1);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = (i * 7919) % classes;
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(x, labels, classes));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
  set_threads(state);
}
BENCHMARK(BM_class_sums<kernels::serial::class_sums>)->Name("class_sums/serial")->Arg(4096)->Arg(16384);
BENCHMARK(BM_class_sums<kernels::omp::class_sums>)->Name("class_sums/omp")->Arg(4096)->Arg(16384);

template <auto Kernel>
void BM_gram(benchmark::State& state) {
  const auto x = random_matrix(4096, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(x));
  set_threads(state);
}
BENCHMARK(BM_gram<kernels::serial::gram>)->Name("gram/serial")->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram<kernels::omp::gram>)->Name("gram/omp")->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

template <auto Kernel>
void BM_rank_nearest(benchmark::State& state) {
  const auto queries = random_matrix(state.range(0), 300, 3);
  const auto targets = random_matrix(500, 300, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(queries, targets, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  set_threads(state);
}
BENCHMARK(BM_rank_nearest<kernels::serial::rank_nearest>)->Name("rank_nearest/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_rank_nearest<kernels::omp::rank_nearest>)->Name("rank_nearest/omp")->Arg(1000)->Arg(10000);

template <auto Kernel>
void BM_mean_centroid_distances(benchmark::State& state) {
  std::vector<FeatureMatrix> bundles;
  for (std::int64_t i = 0; i < state.range(0); ++i) bundles.push_back(random_features(100, 512, 10 + i));
  std::vector<const FeatureMatrix*> sets;
  for (const auto& b : bundles) sets.push_back(&b);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(sets));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  set_threads(state);
}
BENCHMARK(BM_mean_centroid_distances<kernels::serial::mean_centroid_distances>)
    ->Name("mean_centroid_distances/serial")
    ->Arg(200)
    ->Arg(1000);
BENCHMARK(BM_mean_centroid_distances<kernels::omp::mean_centroid_distances>)
    ->Name("mean_centroid_distances/omp")
    ->Arg(200)
    ->Arg(1000);

// ---------------------------------------------------------------------------

void BM_solve_spd(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  const auto x = random_matrix(2 * d, d, 5);
  const Eigen::MatrixXd a = kernels::omp::gram(x) + 1e-2 * static_cast<double>(x.rows()) *
                                                        Eigen::MatrixXd::Identity(d, d);
  const auto b = random_matrix(d, 300, 6);
  for (auto _ : state) benchmark::DoNotOptimize(solve_spd(a, b));
  set_threads(state);
}
BENCHMARK(BM_solve_spd)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
