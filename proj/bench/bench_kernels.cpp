// Serial references against the OpenMP kernels. Thread count follows OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <random>

#include "parahom/environment.hpp"
#include "parahom/heat_kernel.hpp"
#include "parahom/lattice.hpp"
#include "parahom/parabolic.hpp"

using namespace parahom;

namespace {

ScalarField random_field(const LatticeBox& box) {
  std::mt19937_64 g(7);
  std::normal_distribution<double> n;
  ScalarField f(box);
  for (std::size_t i = 0; i < box.size(); ++i) f[i] = n(g);
  return f;
}

void BM_divergence_form_parallel(benchmark::State& st) {
  const auto box = LatticeBox::cube(2, static_cast<int>(st.range(0)));
  const auto a = CoefficientSlice::constant(box, 0.1, EllipticityBounds(0.1, 0.1, 2));
  const auto u = random_field(box);
  for (auto _ : st) benchmark::DoNotOptimize(apply_divergence_form(a, u));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(box.size()));
}

void BM_divergence_form_serial(benchmark::State& st) {
  const auto box = LatticeBox::cube(2, static_cast<int>(st.range(0)));
  const auto a = CoefficientSlice::constant(box, 0.1, EllipticityBounds(0.1, 0.1, 2));
  const auto u = random_field(box);
  for (auto _ : st) benchmark::DoNotOptimize(serial::apply_divergence_form(a, u));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(box.size()));
}

void BM_discrete_kernel_parallel(benchmark::State& st) {
  const auto box = LatticeBox::cube(2, 128);
  for (auto _ : st) benchmark::DoNotOptimize(discrete_kernel(2, 0.125, box, static_cast<int>(st.range(0)), 8));
}

void BM_discrete_kernel_serial(benchmark::State& st) {
  const auto box = LatticeBox::cube(2, 128);
  for (auto _ : st) benchmark::DoNotOptimize(serial::discrete_kernel(2, 0.125, box, static_cast<int>(st.range(0)), 8));
}

void BM_green_mc_parallel(benchmark::State& st) {
  const auto box = LatticeBox::cube(1, 128);
  const auto spec = EnvironmentSpec::bernoulli(1, 0.125, 0.5, 3);
  const double times[2] = {32, 64};
  for (auto _ : st) benchmark::DoNotOptimize(green_mc_estimate(spec, box, times, static_cast<std::size_t>(st.range(0))));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_green_mc_serial(benchmark::State& st) {
  const auto box = LatticeBox::cube(1, 128);
  const auto spec = EnvironmentSpec::bernoulli(1, 0.125, 0.5, 3);
  const double times[2] = {32, 64};
  for (auto _ : st)
    benchmark::DoNotOptimize(serial::green_mc_estimate(spec, box, times, static_cast<std::size_t>(st.range(0))));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_divergence_form_parallel)->Arg(64)->Arg(256);
BENCHMARK(BM_divergence_form_serial)->Arg(64)->Arg(256);
BENCHMARK(BM_discrete_kernel_parallel)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_discrete_kernel_serial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_green_mc_parallel)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_green_mc_serial)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
