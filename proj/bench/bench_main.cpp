// Serial reference vs OpenMP kernels. Both paths produce identical output,
// so the comparison is wall time only.

#include <benchmark/benchmark.h>

#include "vbdiag/affine.hpp"
#include "vbdiag/imh.hpp"
#include "vbdiag/marginal.hpp"
#include "vbdiag/models.hpp"
#include "vbdiag/stepwise.hpp"

using namespace vbdiag;

namespace {

Execution exec_of(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

const char* label_of(const benchmark::State& state) { return state.range(0) ? "parallel" : "serial"; }

models::MvnTarget mvn_3d() {
  Matrix rho(3, 3);
  rho << 1, 0.51, 0.37, 0.51, 1, -0.30, 0.37, -0.30, 1;
  Vector sd(3);
  sd << 0.1, 1.3, 4.0;
  return models::MvnTarget(Vector::LinSpaced(3, 1, 3), models::covariance_from(sd, rho));
}

VBApproximation shrunk_vb(const models::MvnTarget& t) {
  const double ratio[3] = {2.2, 5.1, 6.9};
  std::vector<MarginalFamily> f;
  for (Eigen::Index i = 0; i < 3; ++i)
    f.push_back(MarginalFamily::normal(t.mean()[i], t.covariance()(i, i) / ratio[i]));
  return VBApproximation(std::move(f));
}

const EARTable& table() {
  static const EARTable t = build_ear_table(default_ear_grid());
  return t;
}

void BM_EarTable(benchmark::State& state) {
  const auto grid = default_ear_grid();
  for (auto _ : state) benchmark::DoNotOptimize(build_ear_table(grid, exec_of(state)));
  state.SetLabel(label_of(state));
}
BENCHMARK(BM_EarTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_StepwiseReads(benchmark::State& state) {
  const auto t = mvn_3d();
  const auto vb = shrunk_vb(t);
  table();  // build outside the timed loop
  StepwiseOptions o;
  o.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_stepwise(t.as_model(), vb, table(), RngPolicy{1, 0}, o));
  state.SetLabel(label_of(state));
}
BENCHMARK(BM_StepwiseReads)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MarginalReads(benchmark::State& state) {
  const auto t = mvn_3d();
  const auto vb = shrunk_vb(t);
  table();
  MarginalOptions o;
  o.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_marginal(t.as_model(), vb, table(), RngPolicy{1, 0}, o));
  state.SetLabel(label_of(state));
}
BENCHMARK(BM_MarginalReads)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_AffineFit(benchmark::State& state) {
  const auto data = models::make_mixture_data({}, RngPolicy{3891, 0});
  const models::MixtureModel model(data, {});
  const auto vb = models::mixture_vb(167.35, 232.67, 1.13, 168.34, 3.57, 233.66, 85.66, 76.56, 118.33, 50.31);
  AffineOptions o;
  o.execution = exec_of(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        fit_affine(model.as_model(), vb, AffineStructure{AffineClass::LowerTriangular, 5}, RngPolicy{1, 0}, o));
  state.SetLabel(label_of(state));
}
BENCHMARK(BM_AffineFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
