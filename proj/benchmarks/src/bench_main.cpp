// Microbenchmarks for the hot paths: the backward Gram recursion that every
// verdict rides on, the moment recursion, path simulation, and the
// feasibility solver's projection sweep.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "ftstab/criteria.hpp"
#include "ftstab/lmi.hpp"
#include "ftstab/lyapunov.hpp"
#include "ftstab/mcsim.hpp"
#include "ftstab/model.hpp"
#include "ftstab/stm.hpp"

namespace {

using namespace ftstab;

Mat random_mat(std::mt19937_64& eng, std::size_t r, std::size_t c, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = scale * gauss(eng);
  return m;
}

struct BenchSystem {
  PlantParams plant;
  GainPackage gp;
  FtSpec spec;
  UncRealization real;
};

BenchSystem make_system(std::size_t n, std::size_t T) {
  std::mt19937_64 eng(7);
  const double ps = 0.6 / std::sqrt(static_cast<double>(n));
  PlantParams plant(random_mat(eng, n, n, ps), random_mat(eng, n, n, 0.4 * ps),
                    random_mat(eng, n, n, ps), random_mat(eng, n, n, 0.5 * ps),
                    random_mat(eng, n, n, 0.3 * ps), random_mat(eng, n, n, 0.4 * ps));
  GainPackage gp(random_mat(eng, n, n, 0.4), random_mat(eng, n, n, 0.3),
                 random_mat(eng, n, n, 0.3), random_mat(eng, n, n, 0.3),
                 random_mat(eng, n, n, 0.3), 0.5);
  FtSpec spec(1.0, 4.0, T, exp_decay_weights(n, T, 1.0, 0.1));
  std::vector<Mat> F;
  for (std::size_t k = 0; k < T; ++k) {
    Mat f = random_mat(eng, n, n, 0.4);
    const double nrm = spectral_norm(f);
    if (nrm > 1.0) f *= 1.0 / nrm;
    F.push_back(std::move(f));
  }
  return BenchSystem{std::move(plant), std::move(gp), std::move(spec),
                     UncRealization(std::move(F))};
}

void bm_gram_adjoint(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t T = static_cast<std::size_t>(state.range(1));
  const BenchSystem sys = make_system(n, T);
  const std::vector<StepFactors> factors =
      scaled_factor_sequence(sys.plant, sys.gp, sys.real, sys.spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram_adjoint_backward(factors, 0, T));
  }
}
BENCHMARK(bm_gram_adjoint)->Args({1, 20})->Args({2, 20})->Args({4, 40})->Args({8, 40});

void bm_pbar_sequence(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t T = static_cast<std::size_t>(state.range(1));
  const BenchSystem sys = make_system(n, T);
  const std::vector<StepFactors> factors =
      scaled_factor_sequence(sys.plant, sys.gp, sys.real, sys.spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pbar_sequence(factors, T));
  }
}
BENCHMARK(bm_pbar_sequence)->Args({1, 20})->Args({2, 20})->Args({4, 40})->Args({8, 40});

void bm_exact_verdict(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t T = static_cast<std::size_t>(state.range(1));
  const BenchSystem sys = make_system(n, T);
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_ft_verdict(sys.plant, sys.gp, sys.spec, sys.real));
  }
}
BENCHMARK(bm_exact_verdict)->Args({1, 20})->Args({2, 20})->Args({4, 40});

void bm_simulate_paths(benchmark::State& state) {
  const std::size_t runs = static_cast<std::size_t>(state.range(0));
  const BenchSystem sys = make_system(1, 20);
  const std::vector<double> x0(1, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate_paths(sys.plant, sys.gp, sys.real, sys.spec, x0, runs, RngSpec{11, 0}));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(runs) * 20);
}
BENCHMARK(bm_simulate_paths)->Arg(100)->Arg(1000)->Arg(10000);

void bm_solver_sweep(benchmark::State& state) {
  const std::size_t iters = static_cast<std::size_t>(state.range(0));
  const BenchSystem sys = make_system(1, 10);
  const UncChannel channel = sys.gp.channel();
  const LmiProblem pb = assemble_synthesis_lmi(sys.plant, sys.spec, channel, 0.7);
  for (auto _ : state) {
    SolveParams sp;
    sp.max_iters = iters;
    benchmark::DoNotOptimize(solve_feasibility(pb, sp));
  }
}
BENCHMARK(bm_solver_sweep)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
