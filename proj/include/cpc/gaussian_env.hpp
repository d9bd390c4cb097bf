#pragma once

#include <cstdint>

#include "cpc/environments.hpp"

namespace cpc {

/// One-dimensional toy problem: the safe policy is N(0, 1), the reward is
/// the action itself and the loss is 1{x > threshold}. Improvement fits a
/// Gaussian to the training draws and tilts it by exp(tilt * x).
struct GaussianEnvConfig {
  double threshold = 1.0;
  double tilt = 1.5;
  std::size_t n_collect = 100;      // initial draws from π_0
  double train_fraction = 0.5;
  std::size_t n_prop = 100;         // D_prop ~ π_t
  std::size_t n_safe_probes = 100;  // π_0 draws used as ŵ_max probes
  std::size_t n_deploy = 1;
  std::size_t deploy_budget = 10'000'000;
  BetaConfig beta;
};

struct GaussianRound {
  RoundLog log;
  DiagonalGaussian optimized{{0.0}, {1.0}};
  BetaCalibration calibration;
};

/// N(m, s²) tilted by exp(tilt x) is N(m + tilt s², s²).
DiagonalGaussian tilt_gaussian(const DiagonalGaussian& g, double tilt);

/// Collect, improve, calibrate and deploy for a single round starting from π_0 = N(0, 1).
GaussianRound gaussian_cpc_round(double alpha, const GaussianEnvConfig& config, Rng& rng);

/// E[1{x > threshold}] under π^(β) ∝ min(π_t, β π_0), by trapezoidal
/// quadrature on [-lim, lim].
double gaussian_clipped_expected_loss(const DiagonalGaussian& optimized, double log_beta, double threshold,
                                      double lim = 12.0, std::size_t nodes = 200001);

}  // namespace cpc
