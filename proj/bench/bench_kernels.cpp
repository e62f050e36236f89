// Serial reference vs OpenMP kernels, and one engine iteration each way.

#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "efhc/config.hpp"
#include "efhc/data.hpp"
#include "efhc/kernels.hpp"
#include "efhc/suite.hpp"

using namespace efhc;

namespace {

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
}

void set_label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "omp"); }

void BM_Matmul(benchmark::State& state) {
  const auto n = state.range(1);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(n, n);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, n);
  Eigen::MatrixXd out;
  for (auto _ : state) {
    kernels::matmul(exec_of(state), a, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_label(state);
}
BENCHMARK(BM_Matmul)->ArgsProduct({{0, 1}, {20, 100, 300}});

void BM_Hinge(benchmark::State& state) {
  const int samples = static_cast<int>(state.range(1));
  const auto data = synth_classification(samples, 10, 784, 0.2, 1);
  std::vector<int> rows(samples);
  for (int i = 0; i < samples; ++i) rows[i] = i;
  const kernels::HingeBatch batch{&data.features, data.labels, rows, 10, 1.0 / samples};
  std::vector<double> w(10 * 784, 0.01), g(w.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::hinge_loss_grad(exec_of(state), batch, w, g));
  }
  set_label(state);
}
BENCHMARK(BM_Hinge)->ArgsProduct({{0, 1}, {64, 1024}});

void BM_EngineStep(benchmark::State& state) {
  ExperimentConfig c;
  c.m = 20;
  c.n = static_cast<int>(state.range(1));
  c.rows_per_device = 2 * c.n;
  c.connectivity = 0.5;
  auto setup = build_setup(c, PolicyKind::efhc, 1, {});
  setup.options.exec = exec_of(state);
  Simulation sim(setup);
  for (auto _ : state) benchmark::DoNotOptimize(sim.step().broadcasts);
  set_label(state);
}
BENCHMARK(BM_EngineStep)->ArgsProduct({{0, 1}, {10, 200}});

}  // namespace

BENCHMARK_MAIN();
