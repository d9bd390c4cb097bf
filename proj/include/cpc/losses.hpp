#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cpc/numeric.hpp"

namespace cpc {

/// Which end of a hyperparameter grid is the declared safe value.
/// Loss-curve grids (lambda, tau) are safe at the top; beta grids at the bottom.
enum class SafeEnd { none, high, low };

/// Strictly increasing, non-empty set of candidate hyperparameters.
///
/// Every point is finite, except that a grid declared safe at the low end may
/// carry a single trailing +inf sentinel (the "unclipped" beta).
class Grid {
 public:
  explicit Grid(std::vector<double> points, SafeEnd safe = SafeEnd::high);

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t k) const { return points_[k]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  SafeEnd safe_end() const { return safe_; }

  /// The declared safe value, if any.
  std::optional<double> safe_value() const;

 private:
  std::vector<double> points_;
  SafeEnd safe_;
};

/// Evenly spaced grid on [lo, hi] with `count` points, safe at the top.
Grid linspace_grid(double lo, double hi, std::size_t count);

/// A bounded loss evaluated at every point of a shared grid. The curve is a
/// right-continuous step function; calibrators only ever query grid points.
class LossCurve {
 public:
  LossCurve(std::vector<double> values, double bound);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double bound() const { return bound_; }
  double max_value() const;

 private:
  std::vector<double> values_;
  double bound_;
};

/// Constant curve, used for the "replace one sample by b" perturbations.
LossCurve constant_curve(std::size_t size, double value, double bound);

/// Max over curves and adjacent grid points of |Δloss| / |Δλ|.
double grid_lipschitz(std::span<const LossCurve> curves, const Grid& grid);

/// Scores and factuality labels of the claims extracted from one response.
class ClaimRecord {
 public:
  ClaimRecord() = default;
  ClaimRecord(std::vector<double> scores, std::vector<int> labels);

  const std::vector<double>& scores() const { return scores_; }
  const std::vector<int>& labels() const { return labels_; }
  std::size_t size() const { return scores_.size(); }
  std::size_t true_count() const;

 private:
  std::vector<double> scores_;
  std::vector<int> labels_;
};

/// Fraction of included claims (score >= tau) that are false; 0 when none are included.
double fdr_loss(const ClaimRecord& claims, double tau);

/// Fraction of true claims with score >= tau; 1 when the record has no true claims.
double recall(const ClaimRecord& claims, double tau);

/// 1 iff some included claim is false.
double binary_loss(const ClaimRecord& claims, double tau);

enum class ClaimLoss { fdr, binary };

/// Loss curve of one record over a threshold grid (bound 1).
LossCurve claim_loss_curve(const ClaimRecord& claims, const Grid& grid, ClaimLoss kind);

/// Adds uniform noise in [0, magnitude) to every score, clamped to [0, 1].
ClaimRecord jitter_scores(const ClaimRecord& claims, Rng& rng, double magnitude = 1e-8);

/// Suffix maximum: out[k] = max_{j >= k} in[j].
LossCurve monotonize(const LossCurve& curve);

bool is_nonincreasing(const LossCurve& curve);

/// The three-curve family on which the bag-conditional risk of the
/// safe-to-aggressive selector equals 1.5 * alpha.
struct CounterexampleFamily {
  Grid grid;
  std::array<LossCurve, 3> curves;
  double bound;
  double alpha;
};

CounterexampleFamily counterexample_losses(double alpha);

/// Smooth non-monotone curves: a sigmoid bump over a decreasing baseline,
/// tapered to zero at the top of the grid and scaled to [0, bound]. Each curve
/// has an interior strict local minimum when the grid has at least 3 points.
std::vector<LossCurve> synthetic_nonmonotonic_family(std::uint64_t seed, std::size_t n,
                                                     const Grid& grid, double bound = 1.0);

/// Same family, drawing from a caller-owned generator.
LossCurve synthetic_nonmonotonic_curve(Rng& rng, const Grid& grid, double bound = 1.0);

/// Curves whose value at every non-terminal grid point is an independent
/// Bernoulli(rate) * bound draw; 0 at the top of the grid. Picking the first
/// grid point whose empirical risk dips under alpha is biased on this family.
LossCurve adversarial_discrete_curve(Rng& rng, const Grid& grid, double rate, double bound = 1.0);

}  // namespace cpc
