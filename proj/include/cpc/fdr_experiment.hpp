#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpc/losses.hpp"

namespace cpc {

/// Synthetic claim records. Each response carries 1..max_claims claims; a
/// claim is true with probability p_true. Scores are noisy: true claims sit
/// higher on average, but a slice of false claims is scored confidently, so
/// the FDR curve of a record is not monotone in the threshold.
struct SyntheticClaimsConfig {
  std::size_t records = 1000;
  std::size_t max_claims = 8;
  double p_true = 0.8;
  double true_mean = 0.7;
  double true_sd = 0.15;
  double false_mean = 0.4;
  double false_sd = 0.2;
  double confident_false = 0.1;  // share of false claims drawn with the true-claim score law
};

std::vector<ClaimRecord> synthetic_claims(std::uint64_t seed, const SyntheticClaimsConfig& config = {});

enum class FdrMethod { gcrc, monotonized_crc, ltt };
const char* to_string(FdrMethod method);

struct FdrConfig {
  std::vector<double> alphas;
  std::size_t trials = 25;
  double calibration_fraction = 0.7;
  std::size_t grid_points = 200;
  double jitter = 1e-8;
  double ltt_delta = 0.1;
  std::vector<FdrMethod> methods{FdrMethod::gcrc, FdrMethod::monotonized_crc, FdrMethod::ltt};
  std::uint64_t seed = 0;
};

/// Default α grid: 0.005, 0.010, ..., 0.100.
std::vector<double> default_fdr_alphas();

struct FdrRow {
  double alpha = 0.0;
  FdrMethod method = FdrMethod::gcrc;
  double mean_fdr = 0.0;
  double se_fdr = 0.0;
  double mean_recall = 0.0;
  double se_recall = 0.0;
};

/// Threshold grid from calibration scores: `points` empirical quantiles plus
/// a terminal threshold just above 1 that includes no claim.
Grid threshold_grid(const std::vector<ClaimRecord>& records, std::size_t points);

/// Per trial: jitter, split, calibrate τ per method on the calibration part,
/// then average FDR and recall over the test part. Trials run in parallel.
std::vector<FdrRow> fdr_experiment(const std::vector<ClaimRecord>& dataset, const FdrConfig& config);

std::string fdr_csv(const std::vector<FdrRow>& rows);

}  // namespace cpc
