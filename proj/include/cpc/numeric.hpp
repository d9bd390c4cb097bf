#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace cpc {

using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Relative slack used when comparing a risk against its target. Values that
// agree up to a few ulps (e.g. (B + B) / 3 against alpha = 2B / 3) count as
// ties and satisfy the weak inequality.
inline constexpr double kTieTolerance = 1e-12;

inline bool leq_with_ties(double value, double target) {
  return value <= target + kTieTolerance * std::max(1.0, std::abs(target));
}

/// Independent stream for (seed, stream id); trials derive their generator
/// from this so results do not depend on scheduling order.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

double uniform01(Rng& rng);

/// log(sum(exp(values))). Empty input and all -inf inputs give -inf.
double logsumexp(std::span<const double> values);

/// log(exp(a) + exp(b)).
double log_add(double a, double b);

/// Streaming mean and standard error (Welford).
class RunningStats {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;  // unbiased sample variance
  double standard_error() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double mean_of(std::span<const double> values);
double standard_error_of(std::span<const double> values);

/// Total variation distance between two probability vectors of equal length.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace cpc
