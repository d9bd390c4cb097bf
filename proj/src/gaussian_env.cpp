#include "cpc/gaussian_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpc {

DiagonalGaussian tilt_gaussian(const DiagonalGaussian& g, double tilt) {
  std::vector<double> mean = g.mean();
  for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += tilt * g.sd()[d] * g.sd()[d];
  return DiagonalGaussian(std::move(mean), g.sd());
}

GaussianRound gaussian_cpc_round(double alpha, const GaussianEnvConfig& cfg, Rng& rng) {
  const DiagonalGaussian safe({0.0}, {1.0});
  auto loss_of = [&](const Point& x) { return x[0] > cfg.threshold ? 1.0 : 0.0; };

  // Collect from the safe policy and split.
  std::vector<Point> train;
  std::vector<Point> cal;
  for (std::size_t i = 0; i < cfg.n_collect; ++i) {
    Point x = safe.sample(rng);
    (uniform01(rng) < cfg.train_fraction ? train : cal).push_back(std::move(x));
  }
  if (train.size() < 2) throw std::runtime_error("gaussian_cpc_round: fewer than 2 training draws");

  // Improve: maximum-likelihood Gaussian on the training split, then tilt.
  RunningStats s;
  for (const auto& x : train) s.add(x[0]);
  const double sd = std::sqrt(s.variance() * static_cast<double>(s.count() - 1) / static_cast<double>(s.count()));
  GaussianRound out;
  out.optimized = tilt_gaussian(DiagonalGaussian({s.mean()}, {std::max(sd, 1e-6)}), cfg.tilt);

  // Calibrate β. The calibration data came from π_0, so π_mix = π_0.
  CalibrationData data;
  for (const auto& x : cal) {
    data.cal.push_back(cache_densities(out.optimized, safe, safe, x));
    data.losses.push_back(loss_of(x));
  }
  for (std::size_t i = 0; i < cfg.n_prop; ++i) {
    data.prop.push_back(cache_densities(out.optimized, safe, safe, out.optimized.sample(rng)));
  }
  for (std::size_t i = 0; i < cfg.n_safe_probes; ++i) {
    data.safe_probes.push_back(cache_densities(out.optimized, safe, safe, safe.sample(rng)));
  }
  out.calibration = calibrate_beta(data, alpha, 1.0, cfg.beta);

  // Deploy π^(β̂).
  RoundLog& log = out.log;
  log.round = 1;
  log.beta_hat = out.calibration.beta_hat;
  log.log_psi_hat = out.calibration.log_psi_hat[out.calibration.chosen_index];
  log.risk_estimate = out.calibration.weighted_risk[out.calibration.chosen_index];
  log.floor_fallback = out.calibration.floor_violated;
  const SampleBatch batch =
      deploy_constrained(out.optimized, safe, out.calibration.log_beta_hat(), cfg.n_deploy, cfg.deploy_budget, rng);
  log.proposals = batch.proposals;
  log.accepts = batch.accepted.size();
  log.degenerate = batch.exhausted(cfg.n_deploy);
  for (const auto& x : batch.accepted) log.actions.push_back({0, x, x[0], loss_of(x)});
  return out;
}

double gaussian_clipped_expected_loss(const DiagonalGaussian& optimized, double log_beta, double threshold, double lim,
                                      std::size_t nodes) {
  if (nodes < 3) throw std::invalid_argument("gaussian_clipped_expected_loss: need at least 3 nodes");
  const DiagonalGaussian safe({0.0}, {1.0});
  auto density = [&](double x) {
    return std::exp(clip_log_density(optimized.log_density({x}), safe.log_density({x}), log_beta));
  };
  // Separate trapezoid rules on each side of the threshold, so the indicator
  // jump does not cost first-order accuracy.
  auto trapezoid = [&](double lo, double hi, std::size_t count) {
    if (hi <= lo) return 0.0;
    const double h = (hi - lo) / static_cast<double>(count - 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const double w = (k == 0 || k + 1 == count) ? 0.5 : 1.0;
      acc += w * density(lo + h * static_cast<double>(k));
    }
    return acc * h;
  };
  const double cut = std::clamp(threshold, -lim, lim);
  const std::size_t half = std::max<std::size_t>(nodes / 2, 3);
  const double tail = trapezoid(cut, lim, half);
  const double mass = trapezoid(-lim, cut, half) + tail;
  return tail / mass;
}

}  // namespace cpc
