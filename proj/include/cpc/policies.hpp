#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cpc/numeric.hpp"
#include "json.hpp"

namespace cpc {

/// An action. Discrete outcomes are stored as {index}; token sequences as
/// their token ids; continuous actions as coordinates.
using Point = std::vector<double>;

/// A probability model over actions with a tractable log-density.
/// Implementations are immutable after construction; log_density is safe to
/// call concurrently and sample draws only from the caller's generator.
class Policy {
 public:
  virtual ~Policy() = default;

  /// log π(x); -inf outside the support.
  virtual double log_density(const Point& x) const = 0;
  virtual Point sample(Rng& rng) const = 0;
  /// Every point the policy can emit, when the support is finite and small
  /// enough to enumerate.
  virtual std::optional<std::vector<Point>> support() const { return std::nullopt; }
  virtual nlohmann::json to_json() const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

/// Finite-support policy over an explicit list of points.
class DiscretePolicy final : public Policy {
 public:
  /// probs must be nonnegative and sum to 1 within 1e-9.
  DiscretePolicy(std::vector<Point> points, std::vector<double> probs);
  /// Normalizes exp(log_weights) exactly (in log space).
  static DiscretePolicy from_log_weights(std::vector<Point> points, std::span<const double> log_weights);

  double log_density(const Point& x) const override;
  Point sample(Rng& rng) const override;
  std::optional<std::vector<Point>> support() const override { return points_; }
  nlohmann::json to_json() const override;

  const std::vector<Point>& points() const { return points_; }
  const std::vector<double>& log_probs() const { return log_probs_; }
  std::vector<double> probs() const;
  std::size_t size() const { return points_.size(); }
  std::size_t sample_index(Rng& rng) const;

 private:
  DiscretePolicy() = default;
  void index_points();

  std::vector<Point> points_;
  std::vector<double> log_probs_;
  std::vector<double> cdf_;
  std::map<Point, std::size_t> index_;
};

/// Categorical over outcomes {0}, {1}, ..., {K-1}.
DiscretePolicy make_categorical(std::vector<double> probs);

/// Independent Gaussian per coordinate.
class DiagonalGaussian final : public Policy {
 public:
  DiagonalGaussian(std::vector<double> mean, std::vector<double> sd);

  double log_density(const Point& x) const override;
  Point sample(Rng& rng) const override;
  nlohmann::json to_json() const override;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& sd() const { return sd_; }

 private:
  std::vector<double> mean_;
  std::vector<double> sd_;
};

/// Row-major V x V mask of transitions that must carry zero probability.
using BannedMask = std::vector<bool>;

/// First-order Markov chain over fixed-length token sequences.
class MarkovSequencePolicy final : public Policy {
 public:
  /// initial: V probabilities. transitions: row-major V x V, rows summing to 1.
  /// Entries flagged in `banned` must be exactly zero.
  MarkovSequencePolicy(int vocab, int length, std::vector<double> initial, std::vector<double> transitions,
                       BannedMask banned = {});

  double log_density(const Point& x) const override;
  Point sample(Rng& rng) const override;
  std::optional<std::vector<Point>> support() const override;
  nlohmann::json to_json() const override;

  int vocab() const { return vocab_; }
  int length() const { return length_; }
  double initial(int a) const { return initial_[static_cast<std::size_t>(a)]; }
  double transition(int a, int b) const { return trans_[static_cast<std::size_t>(a * vocab_ + b)]; }
  double log_transition(int a, int b) const { return log_trans_[static_cast<std::size_t>(a * vocab_ + b)]; }
  bool banned(int a, int b) const;
  const BannedMask& banned_mask() const { return banned_; }
  const std::vector<double>& transitions() const { return trans_; }
  const std::vector<double>& initial_probs() const { return initial_; }

 private:
  int draw(std::span<const double> probs, Rng& rng) const;

  int vocab_;
  int length_;
  std::vector<double> initial_;
  std::vector<double> trans_;
  std::vector<double> log_initial_;
  std::vector<double> log_trans_;
  BannedMask banned_;
};

/// Weighted mixture; log-density is the log of the weighted sum of component densities.
class MixturePolicy final : public Policy {
 public:
  MixturePolicy(std::vector<PolicyPtr> components, std::vector<double> weights);

  double log_density(const Point& x) const override;
  Point sample(Rng& rng) const override;
  std::optional<std::vector<Point>> support() const override;
  nlohmann::json to_json() const override;

  const std::vector<PolicyPtr>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<PolicyPtr> components_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
};

/// min(log π_t(x), log β + log π_0(x)); +inf log β leaves π_t unclipped.
double clip_log_density(double log_optimized, double log_safe, double log_beta);

/// The constrained policy π^(β) ∝ min(π_t, β π_0).
class ClippedPolicy final : public Policy {
 public:
  ClippedPolicy(PolicyPtr safe, PolicyPtr optimized, double log_beta, std::optional<double> log_psi = std::nullopt,
                double beta_min = 0.0);

  double unnormalized_log_density(const Point& x) const;
  /// Requires a normalizer (exact or estimated).
  double log_density(const Point& x) const override;
  /// Accept-reject from whichever simple proposal accepts more often
  /// (π_0 when β < 1, π_t otherwise).
  Point sample(Rng& rng) const override;
  std::optional<std::vector<Point>> support() const override { return safe_->support(); }
  nlohmann::json to_json() const override;

  const PolicyPtr& safe() const { return safe_; }
  const PolicyPtr& optimized() const { return optimized_; }
  double log_beta() const { return log_beta_; }
  double beta() const { return std::exp(log_beta_); }
  std::optional<double> log_psi() const { return log_psi_; }
  ClippedPolicy with_log_psi(double log_psi) const;

 private:
  PolicyPtr safe_;
  PolicyPtr optimized_;
  double log_beta_;
  std::optional<double> log_psi_;
  double beta_min_;
};

/// log π_t(x) - log π_0(x). Throws when π_0(x) = 0.
double log_likelihood_ratio(const Policy& optimized, const Policy& safe, const Point& x);

/// Policy-level clipped density; throws when π_0(x) = 0 like the ratio.
double clipped_unnorm_log_density(const Policy& optimized, const Policy& safe, double log_beta, const Point& x);

struct ExactClip {
  double psi = 0.0;
  std::shared_ptr<const DiscretePolicy> policy;  // normalized π^(β) over the safe support
};

/// Brute-force ψ(β) = Σ_x min(π_t(x), β π_0(x)) over the enumerated safe support.
ExactClip normalize_exact(const Policy& optimized, const Policy& safe, double beta);

/// π(a) ∝ exp(temperature * (σ²_a - min σ²) / (max σ² - min σ²)); uniform
/// when every variance is equal.
DiscretePolicy tilted_acquisition(std::span<const double> variances, double temperature);

/// Maximum-likelihood Markov chain with additive smoothing, banned entries
/// zeroed and rows renormalized. A row with no observations and zero
/// smoothing falls back to uniform over its allowed transitions.
MarkovSequencePolicy fit_markov(std::span<const std::vector<int>> sequences, int vocab, int length,
                                const BannedMask& banned, double smoothing);

/// Banned mask from a list of (from, to) token pairs.
BannedMask banned_mask_from_pairs(int vocab, std::span<const std::pair<int, int>> pairs);

}  // namespace cpc
