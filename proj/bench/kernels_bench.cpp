#include <map>

#include <benchmark/benchmark.h>

#include "splinebeta/design.hpp"
#include "splinebeta/kernels.hpp"
#include "splinebeta/simulator.hpp"
#include "splinebeta/tlp_select.hpp"
#include "splinebeta/tuning.hpp"

using namespace splinebeta;
using kernels::Exec;

namespace {

struct Fixture {
  Increments inc;
  DesignSystem sys;
};

// One simulated day-count window of the default design, untruncated.
const Fixture& fixture(int p, int k) {
  static std::map<std::pair<int, int>, Fixture> cache;
  auto it = cache.find({p, k});
  if (it == cache.end()) {
    const SimulationOutput sim = simulate_panel(SimulationSpec::default_design(p, 1));
    Increments inc = increments(sim.panel);
    DesignSystem sys =
        build_design(truncate(inc, TruncationSpec::none(p)), SplineBasis::uniform(3, k, inc.horizon()));
    it = cache.emplace(std::make_pair(p, k), Fixture{std::move(inc), std::move(sys)}).first;
  }
  return it->second;
}

Exec exec_of(const benchmark::State& st) { return st.range(1) ? Exec::Parallel : Exec::Serial; }

void label(benchmark::State& st) {
  st.SetLabel(st.range(1) ? "parallel" : "serial");
}

void BM_Apply(benchmark::State& st) {
  const DesignSystem& sys = fixture(static_cast<int>(st.range(0)), 8).sys;
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(sys.width(), -1.0, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::apply(sys, g, exec_of(st)));
  label(st);
}

void BM_ApplyTranspose(benchmark::State& st) {
  const DesignSystem& sys = fixture(static_cast<int>(st.range(0)), 8).sys;
  for (auto _ : st) benchmark::DoNotOptimize(kernels::apply_transpose(sys, sys.response, exec_of(st)));
  label(st);
}

void BM_Gram(benchmark::State& st) {
  const DesignSystem& sys = fixture(static_cast<int>(st.range(0)), 8).sys;
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gram(sys, nullptr, {}, exec_of(st)));
  label(st);
}

void BM_BlockGrams(benchmark::State& st) {
  const DesignSystem& sys = fixture(static_cast<int>(st.range(0)), 8).sys;
  for (auto _ : st) benchmark::DoNotOptimize(kernels::block_grams(sys, exec_of(st)));
  label(st);
}

void BM_RowGram(benchmark::State& st) {
  const DesignSystem& sys = fixture(static_cast<int>(st.range(0)), 8).sys;
  for (auto _ : st) benchmark::DoNotOptimize(kernels::row_gram(sys, exec_of(st)));
  label(st);
}

void BM_DcSolve(benchmark::State& st) {
  const Fixture& f = fixture(static_cast<int>(st.range(0)), 4);
  const PenaltyConfig cfg = make_penalty(f.inc, 0.01, 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(dc_solve(f.sys, cfg));
}

void kernel_args(benchmark::internal::Benchmark* b) {
  for (int p : {10, 100})
    for (int par : {0, 1}) b->Args({p, par});
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_Apply)->Apply(kernel_args);
BENCHMARK(BM_ApplyTranspose)->Apply(kernel_args);
BENCHMARK(BM_Gram)->Apply(kernel_args);
BENCHMARK(BM_BlockGrams)->Apply(kernel_args);
BENCHMARK(BM_RowGram)->Args({10, 0})->Args({10, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DcSolve)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
