#include <benchmark/benchmark.h>

#include "gridsplit/admm.hpp"
#include "gridsplit/case_io.hpp"
#include "gridsplit/harness.hpp"

using namespace gridsplit;

namespace {

const NetworkCase& case30() {
  static NetworkCase net = load_case(std::string(GRIDSPLIT_CASE_DIR) + "/case30.m");
  return net;
}

}  // namespace

static void BuildAdmittance(benchmark::State& state) {
  const NetworkCase& net = case30();
  for (auto _ : state) {
    auto Y = build_admittance(net);
    benchmark::DoNotOptimize(Y);
  }
}
BENCHMARK(BuildAdmittance);

static void PowerFlowResidual(benchmark::State& state) {
  const NetworkCase& net = case30();
  const AdmittanceMatrix Y = build_admittance(net);
  OpfVariables x = OpfVariables::flat(static_cast<int>(net.buses.size()),
                                      static_cast<int>(net.generators.size()));
  for (auto _ : state) {
    auto r = power_flow_residual(net, Y, x);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(PowerFlowResidual);

static void NewtonPowerFlow(benchmark::State& state) {
  const NetworkCase& net = case30();
  const AdmittanceMatrix Y = build_admittance(net);
  OpfVariables flat = OpfVariables::flat(static_cast<int>(net.buses.size()),
                                         static_cast<int>(net.generators.size()));
  const Dispatch d = Dispatch::from_case(net);
  for (auto _ : state) {
    auto x = solve_power_flow(net, Y, d, flat);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(NewtonPowerFlow);

static void CentralizedOpf(benchmark::State& state) {
  const NetworkCase& net = case30();
  for (auto _ : state) {
    auto sol = solve_centralized_opf(net);
    benchmark::DoNotOptimize(sol);
  }
}
BENCHMARK(CentralizedOpf)->Unit(benchmark::kMillisecond);

static void SpectralPartitionCase30(benchmark::State& state) {
  const NetworkCase& net = case30();
  const AdmittanceMatrix Y = build_admittance(net);
  const Eigen::MatrixXd A = admittance_only_affinity(Y);
  SpectralOptions opts;
  opts.trials = 30;
  for (auto _ : state) {
    auto p = spectral_partition(A, static_cast<int>(state.range(0)), opts);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(SpectralPartitionCase30)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void AdmmIterationCase30(benchmark::State& state) {
  const NetworkCase& net = case30();
  const AdmittanceMatrix Y = build_admittance(net);
  const Eigen::MatrixXd A = admittance_only_affinity(Y);
  Partition part = spectral_partition(A, 2, {}).first;
  AdmmOptions opts;
  opts.max_iterations = 1;
  opts.parallel = false;
  for (auto _ : state) {
    auto res = run_admm(net, part, opts);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(AdmmIterationCase30)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
