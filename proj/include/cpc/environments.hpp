#pragma once

// Pieces shared by the experiment loops: per-round logs, the tilting
// improvement rule, and constrained deployment.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "cpc/cpc_calibration.hpp"
#include "cpc/policies.hpp"
#include "cpc/samplers.hpp"
#include "json.hpp"

namespace cpc {

struct ActionRecord {
  std::size_t context = 0;
  Point action;
  double reward = 0.0;
  double loss = 0.0;
};

/// One round of the collect / improve / calibrate / deploy loop.
struct RoundLog {
  int round = 0;
  double beta_hat = kInf;
  double log_psi_hat = 0.0;
  double risk_estimate = 0.0;  // weighted risk at β̂
  std::vector<ActionRecord> actions;
  std::size_t proposals = 0;
  std::size_t accepts = 0;
  bool degenerate = false;  // β_min fallback and the deployment budget ran out
  bool floor_fallback = false;  // even β_min exceeded α, so β̂ = β_min by convention

  double accept_rate() const;
  double mean_loss() const;
  double mean_reward() const;
};

nlohmann::json to_json(const RoundLog& log);

/// π(x) exp(temperature * reward(x)), normalized exactly over the support.
DiscretePolicy improve_by_tilting(const DiscretePolicy& policy, const std::function<double(const Point&)>& reward,
                                  double temperature);

/// Per-transition shaping: row a of the transition matrix is reweighted by
/// exp(temperature * step_reward[a][b]) and renormalized.
MarkovSequencePolicy improve_by_tilting(const MarkovSequencePolicy& policy, const std::vector<double>& step_reward,
                                        double temperature);

/// Draws `count` actions from π^(β) by accept-reject, proposing from π_0
/// when β < 1 and from π_t otherwise.
SampleBatch deploy_constrained(const Policy& optimized, const Policy& safe, double log_beta, std::size_t count,
                               std::size_t budget, Rng& rng);

}  // namespace cpc
