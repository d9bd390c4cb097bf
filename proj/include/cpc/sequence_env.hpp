#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cpc/environments.hpp"

namespace cpc {

/// Fixed-length token sequences. A sequence is feasible iff it uses no
/// banned bigram; the reward is the weighted fraction of motif bigrams it
/// contains. Motifs are drawn from all bigrams, banned ones included, so
/// chasing reward pulls policies toward infeasible sequences.
struct SequenceEnvConfig {
  int vocab = 8;
  int length = 6;
  std::size_t n_banned = 10;
  std::size_t n_motifs = 8;
  std::size_t banned_motifs = 3;  // motifs taken from the unknown part of the banned set
  double known_banned_fraction = 0.5;  // share of the banned set the safe policy is told about
};

struct SequenceEnv {
  int vocab = 0;
  int length = 0;
  BannedMask banned;  // the true feasibility constraint
  BannedMask known;   // the part of it given to the safe policy
  std::vector<std::pair<int, int>> motifs;
  std::vector<double> motif_weights;

  bool feasible(const Point& seq) const;
  double loss(const Point& seq) const { return feasible(seq) ? 0.0 : 1.0; }
  double reward(const Point& seq) const;
  /// V x V matrix with the weight of each motif bigram, 0 elsewhere.
  std::vector<double> step_reward() const;
};

/// Random environment. Every token keeps at least one allowed successor;
/// a feasible sequence is then constructed to confirm F is non-empty.
SequenceEnv make_sequence_env(std::uint64_t seed, const SequenceEnvConfig& config = {});

/// Uniform chain over allowed transitions; every draw is feasible.
MarkovSequencePolicy feasibility_chain(const SequenceEnv& env);

/// Exact P(sequence is infeasible) under a Markov policy (forward recursion).
double markov_infeasibility(const MarkovSequencePolicy& policy, const SequenceEnv& env);

struct SequenceOptConfig {
  int rounds = 4;
  std::size_t n_per_round = 64;
  double train_fraction = 0.5;
  std::size_t n_seeds = 200;    // feasible seed sequences for the safe fit
  double seed_smoothing = 1.0;
  double refit_smoothing = 1.0;
  double tilt = 1.5;  // round t tilts with temperature tilt * t
  double elite_fraction = 0.5;  // best feasible training sequences used for refits
  std::size_t n_prop = 100;
  std::size_t n_safe_probes = 100;
  std::size_t deploy_budget = 2'000'000;
  bool controlled = true;
  BetaConfig beta;
};

/// Smoothed Markov fit to draws from the feasibility chain, aware only of
/// the known part of the banned set.
MarkovSequencePolicy fit_safe_policy(const SequenceEnv& env, const SequenceOptConfig& config, std::uint64_t seed);

struct SequenceRoundSummary {
  int round = 0;
  double beta_hat = kInf;
  double mean_loss = 0.0;
  double mean_reward = 0.0;
  double best_reward = 0.0;
  double accept_rate = 1.0;
  bool degenerate = false;
};

struct SequenceOptResult {
  std::vector<RoundLog> logs;
  std::vector<SequenceRoundSummary> rounds;
  double safe_infeasibility = 0.0;

  /// Mean loss over the improved rounds (round 0 draws from π_0 itself).
  double deployed_mean_loss() const;
};

/// Round 0 collects from π_0. Each later round refits a Markov model on the
/// best feasible training sequences so far, tilts it toward motif bigrams,
/// calibrates β against π_0 (unless uncontrolled) and deploys.
SequenceOptResult sequence_opt_run(const SequenceEnv& env, const MarkovSequencePolicy& safe, double alpha,
                                   const SequenceOptConfig& config, std::uint64_t seed);

}  // namespace cpc
