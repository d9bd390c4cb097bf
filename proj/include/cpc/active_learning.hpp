#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpc/cpc_calibration.hpp"
#include "cpc/linalg.hpp"
#include "cpc/policies.hpp"

namespace cpc {

struct TabularDataset {
  Eigen::MatrixXd x;  // rows are records
  Eigen::VectorXd y;
};

/// Covariates spread along a dominant all-positive direction with latent
/// coordinate t; the off-axis spread grows as t decreases, and the target is
/// linear in t with a nonlinear off-axis term. Variance-seeking acquisition
/// is therefore drawn to low-t records, which the feasibility model marks
/// as likely infeasible.
TabularDataset synthetic_tabular(std::uint64_t seed, std::size_t records = 600, int dims = 4);

/// Header row, numeric columns, last column is the target.
TabularDataset load_tabular_csv(const std::filesystem::path& path);

struct FeasibilityModel {
  Eigen::VectorXd direction;
  Eigen::VectorXd projections;  // z_i
  Eigen::VectorXd normalized;   // min-max normalized z_i
  Eigen::VectorXd probability;  // p_i
  std::vector<int> feasible;    // F_i
  double mu = 0.5;
  double scale = 0.1;
};

double logistic_location(double alpha);

/// PCA projection, min-max normalization, exp(γ z) tilt, rank / n, logistic
/// CDF with location min(2.5 α, 0.98) and scale s, Bernoulli draws.
FeasibilityModel build_feasibility(const Eigen::MatrixXd& covariates, double alpha, double gamma, Rng& rng,
                                   double scale = 0.1);

struct ActiveLearningConfig {
  std::size_t n_initial = 48;
  double initial_train_fraction = 0.8;
  int iterations = 10;
  double new_point_train_probability = 0.5;
  double sampling_bias = 1.0;  // γ
  double temperature = 10.0;   // λ
  double signal_variance = 1.0;
  double noise_variance = 1.0;
  double observation_noise = 0.05;
  double test_fraction = 0.2;
  double alpha = 0.2;
  std::size_t n_prop = 200;
  std::size_t n_safe_probes = 200;
  BetaConfig beta;
};

struct ActiveLearningTrace {
  std::vector<double> test_mse;       // after each iteration (index 0 = initial fit)
  std::vector<double> violations;     // loss of each acquired record
  std::vector<double> beta_hat;       // per iteration (+inf for uncontrolled)
  double safe_infeasibility = 0.0;    // Σ_i π_0(i) (1 - F_i)
  double violation_rate() const;
};

struct ActiveLearningResult {
  ActiveLearningTrace controlled;
  ActiveLearningTrace uncontrolled;
};

/// One seed: builds the feasibility model, the biased initial data, then
/// runs the acquisition loop with and without CPC from the same start.
ActiveLearningResult active_learning_run(const TabularDataset& data, const ActiveLearningConfig& config,
                                         std::uint64_t seed);

}  // namespace cpc
