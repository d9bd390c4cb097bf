#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "cpc/losses.hpp"
#include "cpc/policies.hpp"
#include "json.hpp"

namespace cpc {

/// Log-densities of one point under the optimized policy π_t, the safe
/// policy π_0 and the mixture of the policies that generated the
/// calibration data. Every β-dependent quantity is a function of these.
struct CachedDensities {
  double log_opt = 0.0;
  double log_safe = 0.0;
  double log_mix = 0.0;

  double log_lr() const { return log_opt - log_safe; }
};

CachedDensities cache_densities(const Policy& optimized, const Policy& safe, const Policy& mixture, const Point& x);

/// A labelled calibration point together with the round that produced it.
struct CalSample {
  Point point;
  double loss = 0.0;
  int round = 0;
  CachedDensities densities;
};

/// Normalized conformal weights at one β. Sums (with w_max) to 1.
struct WeightSet {
  std::vector<double> weights;
  double w_max = 0.0;
  double beta = 0.0;
};

enum class PsiProposal { optimistic, safe };

/// β candidates: beta_min, then the distinct exp(log_lr) values above it in
/// increasing order, then +inf. Non-finite log-LRs are dropped; LRs at or
/// below beta_min are counted in `below_floor`.
Grid prepare_grid(std::span<const double> log_lrs, double beta_min, std::size_t* below_floor = nullptr);

struct PsiEstimate {
  double log_psi = 0.0;
  double standard_error = 0.0;  // of ψ̂ itself, not of its log
};

/// Importance-sampling estimate of ψ(β) = Σ min(π_t, β π_0) from the log-LRs
/// of samples drawn from π_t (optimistic) or π_0 (safe).
PsiEstimate estimate_psi(std::span<const double> log_lrs, double log_beta, PsiProposal proposal);
double estimate_log_psi(std::span<const double> log_lrs, double log_beta, PsiProposal proposal);

/// log of π^(β)(x) / π_mix(x) with π^(β) normalized by ψ̂. A point outside
/// the clipped policy's support gets weight 0 (log -inf); a point the
/// mixture cannot produce is an error.
double raw_log_weight(const CachedDensities& d, double log_beta, double log_psi);

/// Unnormalized weights of the calibration points.
std::vector<double> mixture_conformal_weights(std::span<const CachedDensities> cal, double log_beta, double log_psi);

/// Largest raw weight over the probe points, times safety_factor.
double estimate_w_max(std::span<const CachedDensities> probes, double log_beta, double log_psi,
                      double safety_factor = 1.0);

/// Joint normalization of calibration weights and the test weight.
WeightSet normalize_weights(std::span<const double> raw, double w_max, double beta);

/// Σ w̃_i l_i + w̃_max B after joint normalization.
double weighted_risk(std::span<const double> raw, std::span<const double> losses, double w_max, double bound);

/// Exact conformal weights by enumerating all (t+1)! orderings of the bag,
/// where policies[k] generated position k and bag.back() is the test point.
/// Entry i is the probability that the test point is bag[i].
std::vector<double> exact_permutation_weights(std::span<const PolicyPtr> policies, std::span<const Point> bag);

struct BetaConfig {
  double beta_min = 1e-3;
  double safety_factor = 1.0;
  bool cal_points_as_probes = true;
  PsiProposal psi_proposal = PsiProposal::optimistic;
};

/// Everything the β scan reads. prop holds D_prop ~ π_t; safe_probes holds
/// draws from π_0 (used for ŵ_max and for the safe ψ estimator).
struct CalibrationData {
  std::vector<CachedDensities> cal;
  std::vector<double> losses;
  std::vector<CachedDensities> prop;
  std::vector<CachedDensities> safe_probes;
};

/// Quantities evaluated at one β.
struct BetaPoint {
  double log_psi = 0.0;
  double w_max = 0.0;
  double risk = 0.0;
};

BetaPoint evaluate_beta(const CalibrationData& data, double log_beta, double bound, const BetaConfig& config);

struct BetaCalibration {
  double alpha = 0.0;
  double bound = 0.0;
  double beta_hat = 0.0;
  std::size_t chosen_index = 0;
  std::vector<double> grid;
  std::vector<double> log_psi_hat;
  std::vector<double> w_max_hat;
  std::vector<double> weighted_risk;
  std::size_t lrs_below_floor = 0;
  bool floor_violated = false;  // even β_min exceeded α; β̂ = β_min by convention

  double log_beta_hat() const;
};

/// Ascending scan over the prepared grid. Returns the grid point just before
/// the first β whose weighted risk exceeds α (β_min if the first already
/// does, +inf if none does). The whole trace is evaluated in parallel and
/// then reduced in grid order.
BetaCalibration calibrate_beta(const CalibrationData& data, double alpha, double bound, const BetaConfig& config = {});

/// The literal early-stopping loop; its trace ends at the first violation.
BetaCalibration calibrate_beta_reference(const CalibrationData& data, double alpha, double bound,
                                         const BetaConfig& config = {});

/// True iff every trace entry up to and including chosen_index is ≤ α, the
/// next entry (if any) is not, or the result is the β_min fallback.
bool satisfies_prefix_condition(const BetaCalibration& result);

nlohmann::json to_json(const BetaCalibration& result);
void write_csv(std::ostream& out, const BetaCalibration& result);

}  // namespace cpc
