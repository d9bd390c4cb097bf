#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cpc/losses.hpp"
#include "json.hpp"

namespace cpc {

/// Outcome of a hyperparameter selection over a loss-curve grid.
struct CalibrationReport {
  double chosen = 0.0;             // grid value (or the safe terminal)
  std::size_t chosen_index = 0;
  std::vector<double> risk_trace;  // adjusted empirical risk per grid point
  double target = 0.0;
  double bound = 0.0;
  std::vector<double> epsilon_hat;  // optional replace-one diagnostic
  std::optional<double> alpha_hat;
};

nlohmann::json to_json(const CalibrationReport& report);

/// Standard CRC: smallest grid point whose adjusted risk
/// (B + sum_i l_i(λ)) / (n + 1) is at most alpha; the top of the grid if none is.
CalibrationReport crc_lambda(std::span<const LossCurve> losses, const Grid& grid, double alpha, double bound);

/// Generalized CRC: smallest λ0 such that the adjusted risk is at most alpha
/// at every grid point λ >= λ0. Searches downward from the safe top of the
/// grid; returns the top if even it violates.
CalibrationReport gcrc_lambda_plus(std::span<const LossCurve> losses, const Grid& grid, double alpha,
                                   double bound);

/// The same for-all selector fit on the full bag (calibration + test), with
/// no bound substitution. Test-only reference.
double oracle_lambda_plus(std::span<const LossCurve> bag, const Grid& grid, double alpha);
std::size_t oracle_lambda_plus_index(std::span<const LossCurve> bag, const Grid& grid, double alpha);

/// Index selected by the for-all rule on an arbitrary risk trace.
std::size_t lambda_plus_index(std::span<const double> risk_trace, double alpha);

struct Instability {
  std::vector<double> per_sample;  // ε̂_i
  double mean = 0.0;
};

/// ε̂_i = max_{b in {0, B}} |λ̂+(l_1..l_n) - λ̂+(l_1..l_n with l_i replaced by b)|.
Instability replace_one_instability(std::span<const LossCurve> losses, const Grid& grid, double alpha,
                                    double bound);

struct ConservativeAlpha {
  double alpha_hat = 0.0;
  double chosen = 0.0;  // λ̂+ at alpha_hat
  bool found = true;    // false: no scanned level qualified, alpha_hat is the smallest scanned
};

/// Largest α' on a descending grid {α k / scan_points} with
/// α' + K / (n + 1) * sum_i ε̂_i(α') <= α.
ConservativeAlpha conservative_alpha_hat(std::span<const LossCurve> losses, const Grid& grid, double alpha,
                                         double bound, double lipschitz, std::size_t scan_points = 100);

struct LttResult {
  std::vector<double> accepted;  // rejected nulls, from the top of the grid downward
  double chosen = 0.0;
  std::size_t chosen_index = 0;
};

/// Fixed-sequence Learn-then-Test with Hoeffding p-values
/// p(λ) = exp(-2 n (α - R̂(λ))_+^2 / B^2), tested from the top of the grid
/// downward and stopping at the first non-rejection.
LttResult ltt_hoeffding(std::span<const LossCurve> losses, const Grid& grid, double alpha, double bound,
                        double delta);

}  // namespace cpc
