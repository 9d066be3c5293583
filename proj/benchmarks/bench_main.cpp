#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "sdcascade/discretize.hpp"
#include "sdcascade/unicycle.hpp"

using namespace sdc;

namespace {

ReferenceSignal refs() { return ReferenceSignal::make(ScalarSignal::constant(0.5), ScalarSignal::sine(0.5)); }
ControllerGains gains() { return {1.0, 1.0, 0.1, CorrectionKind::full, 0.5}; }

void BM_EulerStep(benchmark::State& state) {
  const auto F = euler_map(error_dynamics_field(refs()), tracking_input_law(refs(), gains()));
  Vector s{{1.0, 1.0, 0.5}};
  long k = 0;
  for (auto _ : state) {
    s = F.step(0.01, k++, s);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_EulerStep);

void BM_ExactProxyStep(benchmark::State& state) {
  const auto F = exact_proxy_map(error_dynamics_field(refs()), tracking_input_law(refs(), gains()),
                                 std::pow(10.0, -static_cast<double>(state.range(0))));
  const Vector s0{{1.0, 1.0, 0.5}};
  for (auto _ : state) {
    auto s = F.step(0.01, 3, s0);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_ExactProxyStep)->Arg(6)->Arg(10);

void BM_ModifiedEulerStep(benchmark::State& state) {
  const auto F = modified_euler_map(error_dynamics_field(refs()), tracking_input_law(refs(), gains()));
  const Vector s0{{1.0, 1.0, 0.5}};
  for (auto _ : state) {
    auto s = F.step(0.01, 3, s0);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_ModifiedEulerStep);

void BM_PeInfimum(benchmark::State& state) {
  const auto r = ReferenceSignal::make(ScalarSignal::constant(1.0), ScalarSignal::sine(20.0));
  for (auto _ : state) benchmark::DoNotOptimize(pe_infimum(r, std::numbers::pi, 0.01));
}
BENCHMARK(BM_PeInfimum)->Unit(benchmark::kMillisecond);

void BM_LyapunovChain(benchmark::State& state) {
  LyapunovAuditPlan plan;
  plan.per_axis = static_cast<std::size_t>(state.range(0));
  plan.k_set = periodic_k0_samples(0.01);
  const auto c = compute_case_study_constants(refs(), gains(), 0.01, 0.02, std::numbers::pi, plan);
  for (auto _ : state) benchmark::DoNotOptimize(audit_lyapunov_chain(refs(), gains(), c, plan).outcome);
}
BENCHMARK(BM_LyapunovChain)->Arg(11)->Arg(41)->Unit(benchmark::kMillisecond);

}  // namespace
