#include "cpc/environments.hpp"

#include <cmath>
#include <stdexcept>

namespace cpc {

double RoundLog::accept_rate() const {
  return proposals == 0 ? 0.0 : static_cast<double>(accepts) / static_cast<double>(proposals);
}

double RoundLog::mean_loss() const {
  RunningStats s;
  for (const auto& a : actions) s.add(a.loss);
  return s.mean();
}

double RoundLog::mean_reward() const {
  RunningStats s;
  for (const auto& a : actions) s.add(a.reward);
  return s.mean();
}

nlohmann::json to_json(const RoundLog& log) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : log.actions) {
    actions.push_back({{"context", a.context}, {"action", a.action}, {"reward", a.reward}, {"loss", a.loss}});
  }
  return {{"round", log.round},
          {"beta_hat", std::isfinite(log.beta_hat) ? nlohmann::json(log.beta_hat) : nlohmann::json(nullptr)},
          {"risk_estimate", log.risk_estimate},
          {"proposals", log.proposals},
          {"accepts", log.accepts},
          {"accept_rate", log.accept_rate()},
          {"degenerate", log.degenerate},
          {"floor_fallback", log.floor_fallback},
          {"actions", actions}};
}

DiscretePolicy improve_by_tilting(const DiscretePolicy& policy, const std::function<double(const Point&)>& reward,
                                  double temperature) {
  if (temperature < 0.0) throw std::invalid_argument("improve_by_tilting: temperature must be >= 0");
  std::vector<double> logw(policy.size());
  for (std::size_t i = 0; i < policy.size(); ++i) {
    const double lp = policy.log_probs()[i];
    logw[i] = lp == kNegInf ? kNegInf : lp + temperature * reward(policy.points()[i]);
  }
  return DiscretePolicy::from_log_weights(policy.points(), logw);
}

MarkovSequencePolicy improve_by_tilting(const MarkovSequencePolicy& policy, const std::vector<double>& step_reward,
                                        double temperature) {
  if (temperature < 0.0) throw std::invalid_argument("improve_by_tilting: temperature must be >= 0");
  const auto v = static_cast<std::size_t>(policy.vocab());
  if (step_reward.size() != v * v) throw std::invalid_argument("improve_by_tilting: step reward must be V x V");
  std::vector<double> trans(v * v, 0.0);
  for (std::size_t a = 0; a < v; ++a) {
    std::vector<double> logw(v);
    for (std::size_t b = 0; b < v; ++b) {
      const double lt = policy.log_transition(static_cast<int>(a), static_cast<int>(b));
      logw[b] = lt == kNegInf ? kNegInf : lt + temperature * step_reward[a * v + b];
    }
    const double total = logsumexp(logw);
    if (total == kNegInf) throw std::domain_error("improve_by_tilting: a transition row has zero mass");
    for (std::size_t b = 0; b < v; ++b) trans[a * v + b] = std::exp(logw[b] - total);
  }
  return MarkovSequencePolicy(policy.vocab(), policy.length(), policy.initial_probs(), std::move(trans),
                              policy.banned_mask());
}

SampleBatch deploy_constrained(const Policy& optimized, const Policy& safe, double log_beta, std::size_t count,
                               std::size_t budget, Rng& rng) {
  if (log_beta < 0.0) return rejection_sample_safe(optimized, safe, log_beta, rng, budget, count);
  return rejection_sample_optimized(optimized, safe, log_beta, rng, budget, count);
}

}  // namespace cpc
