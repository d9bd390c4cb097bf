#include "cpc/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace cpc {

PrincipalComponent pca_first_component(const Eigen::MatrixXd& x, double tolerance, int max_iterations) {
  if (x.rows() < 2 || x.cols() < 1) throw std::invalid_argument("pca_first_component: need >= 2 rows and >= 1 column");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  if (cov.trace() <= 0.0) throw std::invalid_argument("pca_first_component: covariates have zero variance");

  // Start from the column with the largest variance plus a small spread so the
  // start is never orthogonal to the dominant direction by construction.
  Eigen::VectorXd v = Eigen::VectorXd::Constant(x.cols(), 1e-3);
  Eigen::Index best = 0;
  cov.diagonal().maxCoeff(&best);
  v[best] = 1.0;
  v.normalize();

  PrincipalComponent out;
  for (out.iterations = 1; out.iterations <= max_iterations; ++out.iterations) {
    Eigen::VectorXd next = cov * v;
    const double norm = next.norm();
    if (norm == 0.0) throw std::invalid_argument("pca_first_component: degenerate covariance");
    next /= norm;
    if (next.dot(v) < 0.0) next = -next;
    const double change = (next - v).norm();
    v = next;
    if (change <= tolerance) break;
  }
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0.0) v = -v;
  out.direction = v;
  out.projections = centered * v;
  return out;
}

GaussianProcess::GaussianProcess(Eigen::MatrixXd inputs, Eigen::VectorXd targets, double signal_variance,
                                 double noise_variance)
    : inputs_(std::move(inputs)), signal_variance_(signal_variance), noise_variance_(noise_variance) {
  if (inputs_.rows() < 1) throw std::invalid_argument("GaussianProcess: need at least one training point");
  if (inputs_.rows() != targets.size()) throw std::invalid_argument("GaussianProcess: inputs/targets mismatch");
  if (!(noise_variance_ > 0.0) || signal_variance_ < 0.0) {
    throw std::invalid_argument("GaussianProcess: noise variance must be > 0 and signal variance >= 0");
  }
  Eigen::MatrixXd k = (inputs_ * inputs_.transpose()).array() + signal_variance_;
  k.diagonal().array() += noise_variance_;
  const double scale = k.diagonal().mean();
  for (double jitter = 0.0; jitter <= 1e-2 * scale; jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    chol_.compute(kj);
    if (chol_.info() == Eigen::Success) {
      jitter_ = jitter;
      alpha_ = chol_.solve(targets);
      return;
    }
  }
  throw std::runtime_error("GaussianProcess: kernel matrix is not positive definite after jitter");
}

Eigen::MatrixXd GaussianProcess::cross_kernel(const Eigen::MatrixXd& q) const {
  if (q.cols() != inputs_.cols()) throw std::invalid_argument("GaussianProcess: query dimension mismatch");
  return (inputs_ * q.transpose()).array() + signal_variance_;
}

Eigen::VectorXd GaussianProcess::predict_mean(const Eigen::MatrixXd& q) const {
  return cross_kernel(q).transpose() * alpha_;
}

Eigen::VectorXd GaussianProcess::prior_variance(const Eigen::MatrixXd& q) const {
  return q.rowwise().squaredNorm().array() + signal_variance_;
}

Eigen::VectorXd GaussianProcess::posterior_variance(const Eigen::MatrixXd& q) const {
  const Eigen::MatrixXd v = chol_.matrixL().solve(cross_kernel(q));
  Eigen::VectorXd var = prior_variance(q) - v.colwise().squaredNorm().transpose();
  return var.cwiseMax(0.0);
}

}  // namespace cpc
