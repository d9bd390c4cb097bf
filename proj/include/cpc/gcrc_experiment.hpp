#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cpc/losses.hpp"

namespace cpc {

enum class CurveFamily { smooth, adversarial };
const char* to_string(CurveFamily family);

struct GcrcSyntheticConfig {
  std::vector<double> alphas;  // empty: 0.05, 0.10, ..., 0.50
  std::size_t n_cal = 50;
  std::size_t trials = 2000;
  std::size_t grid_points = 20;
  double bound = 1.0;
  CurveFamily family = CurveFamily::smooth;
  double adversarial_rate = 0.15;
  std::uint64_t seed = 0;
};

struct GcrcRow {
  double alpha = 0.0;
  std::string method;  // "crc" or "gcrc"
  double mean_test_loss = 0.0;
  double se_test_loss = 0.0;
  double mean_epsilon = 0.0;  // gCRC rows: trial mean of the replace-one diagnostic
  double lipschitz = 0.0;     // largest grid slope seen over every drawn curve
  /// α + K mean(ε̂) + 3 SE, the level the gCRC mean is compared against.
  double slack_limit() const { return alpha + lipschitz * mean_epsilon + 3.0 * se_test_loss; }
};

/// Each trial draws n_cal + 1 curves; both selectors calibrate on the first
/// n_cal and the last curve is evaluated at the chosen λ. Trials run in
/// parallel with per-trial seeds.
std::vector<GcrcRow> gcrc_synthetic_experiment(const GcrcSyntheticConfig& config);

std::string gcrc_csv(const std::vector<GcrcRow>& rows);

/// Leave-one-out analysis of the three-curve counterexample: case i holds
/// out curve i, calibrates λ̂+ on the other two, and records the held-out
/// loss at the chosen λ.
struct CounterexampleSummary {
  double alpha = 0.0;
  double bound = 0.0;
  std::array<double, 3> chosen{};
  std::array<double, 3> held_out_loss{};
  double bag_risk = 0.0;  // mean of held_out_loss
};

CounterexampleSummary counterexample_summary(double alpha);

}  // namespace cpc
