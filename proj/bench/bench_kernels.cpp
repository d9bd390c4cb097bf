// Serial reference vs OpenMP path for each parallel kernel.

#include <benchmark/benchmark.h>

#include <memory>

#include "cpc/cpc_calibration.hpp"
#include "cpc/fdr_experiment.hpp"
#include "cpc/kernels.hpp"
#include "cpc/samplers.hpp"

namespace {

std::vector<cpc::LossCurve> curves(std::size_t n, std::size_t points) {
  cpc::Rng rng = cpc::make_rng(11);
  const cpc::Grid grid = cpc::linspace_grid(0.0, 1.0, points);
  std::vector<cpc::LossCurve> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(cpc::synthetic_nonmonotonic_curve(rng, grid));
  return out;
}

void BM_ColumnSumsSerial(benchmark::State& state) {
  const auto c = curves(static_cast<std::size_t>(state.range(0)), 200);
  for (auto _ : state) benchmark::DoNotOptimize(cpc::column_sums_reference(c));
}
void BM_ColumnSumsParallel(benchmark::State& state) {
  const auto c = curves(static_cast<std::size_t>(state.range(0)), 200);
  for (auto _ : state) benchmark::DoNotOptimize(cpc::column_sums(c));
}
BENCHMARK(BM_ColumnSumsSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ColumnSumsParallel)->Arg(1000)->Arg(10000);

struct ClaimsFixture {
  std::vector<cpc::ClaimRecord> records = cpc::synthetic_claims(5);
  cpc::Grid grid = cpc::threshold_grid(records, 200);
};

void BM_ClaimCurvesSerial(benchmark::State& state) {
  static const ClaimsFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(cpc::claim_loss_curves_reference(f.records, f.grid, cpc::ClaimLoss::fdr));
}
void BM_ClaimCurvesParallel(benchmark::State& state) {
  static const ClaimsFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(cpc::claim_loss_curves(f.records, f.grid, cpc::ClaimLoss::fdr));
}
BENCHMARK(BM_ClaimCurvesSerial);
BENCHMARK(BM_ClaimCurvesParallel);

struct PolicyPair {
  std::shared_ptr<const cpc::DiscretePolicy> safe;
  std::shared_ptr<const cpc::DiscretePolicy> opt;
  PolicyPair() {
    std::vector<double> ps(64), po(64);
    for (std::size_t i = 0; i < 64; ++i) {
      ps[i] = 1.0 / 64.0;
      po[i] = static_cast<double>(i + 1) / (64.0 * 65.0 / 2.0);
    }
    safe = std::make_shared<const cpc::DiscretePolicy>(cpc::make_categorical(ps));
    opt = std::make_shared<const cpc::DiscretePolicy>(cpc::make_categorical(po));
  }
};

cpc::CalibrationData calibration_data(const PolicyPair& p, std::size_t n) {
  cpc::Rng rng = cpc::make_rng(3);
  cpc::CalibrationData d;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = p.safe->sample(rng);
    d.cal.push_back(cpc::cache_densities(*p.opt, *p.safe, *p.safe, x));
    d.losses.push_back(x[0] >= 48 ? 1.0 : 0.0);
    d.prop.push_back(cpc::cache_densities(*p.opt, *p.safe, *p.safe, p.opt->sample(rng)));
    d.safe_probes.push_back(cpc::cache_densities(*p.opt, *p.safe, *p.safe, p.safe->sample(rng)));
  }
  return d;
}

void BM_CalibrateBetaReference(benchmark::State& state) {
  static const PolicyPair p;
  const auto d = calibration_data(p, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cpc::calibrate_beta_reference(d, 0.9, 1.0));
}
void BM_CalibrateBetaParallel(benchmark::State& state) {
  static const PolicyPair p;
  const auto d = calibration_data(p, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cpc::calibrate_beta(d, 0.9, 1.0));
}
BENCHMARK(BM_CalibrateBetaReference)->Arg(500)->Arg(2000);
BENCHMARK(BM_CalibrateBetaParallel)->Arg(500)->Arg(2000);

void BM_SampleSerial(benchmark::State& state) {
  static const PolicyPair p;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cpc::sample_constrained_reference(*p.opt, *p.safe, std::log(1.5),
                                                               cpc::ProposalKind::optimized, 1, 100000, cpc::kNoLimit));
  }
}
void BM_SampleParallel(benchmark::State& state) {
  static const PolicyPair p;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cpc::sample_constrained(*p.opt, *p.safe, std::log(1.5), cpc::ProposalKind::optimized, 1,
                                                     100000, cpc::kNoLimit));
  }
}
BENCHMARK(BM_SampleSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
