#pragma once

#include <Eigen/Dense>

namespace cpc {

struct PrincipalComponent {
  Eigen::VectorXd direction;    // unit norm, largest-magnitude entry positive
  Eigen::VectorXd projections;  // centered rows projected on direction
  int iterations = 0;
};

/// Dominant eigenvector of the sample covariance by power iteration, stopped
/// when successive directions agree to `tolerance` (relative).
PrincipalComponent pca_first_component(const Eigen::MatrixXd& covariates, double tolerance = 1e-10,
                                       int max_iterations = 100000);

/// GP regression with k(x, x') = σ0² + xᵀx' + σn² 1[x = x'] on the training
/// diagonal. Inputs are rows.
class GaussianProcess {
 public:
  GaussianProcess(Eigen::MatrixXd inputs, Eigen::VectorXd targets, double signal_variance, double noise_variance);

  Eigen::VectorXd predict_mean(const Eigen::MatrixXd& queries) const;
  /// Posterior variance of the latent f (noise term excluded).
  Eigen::VectorXd posterior_variance(const Eigen::MatrixXd& queries) const;
  Eigen::VectorXd prior_variance(const Eigen::MatrixXd& queries) const;

  double jitter() const { return jitter_; }
  Eigen::Index size() const { return inputs_.rows(); }

 private:
  Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& queries) const;

  Eigen::MatrixXd inputs_;
  double signal_variance_;
  double noise_variance_;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

}  // namespace cpc
