#include "cpc/sequence_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cpc {

namespace {

std::size_t cell(int vocab, int a, int b) { return static_cast<std::size_t>(a * vocab + b); }

std::vector<int> tokens_of(const Point& x) {
  std::vector<int> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = static_cast<int>(x[i]);
  return t;
}

}  // namespace

bool SequenceEnv::feasible(const Point& seq) const {
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (banned[cell(vocab, static_cast<int>(seq[i - 1]), static_cast<int>(seq[i]))]) return false;
  }
  return true;
}

double SequenceEnv::reward(const Point& seq) const {
  double total = 0.0;
  double hit = 0.0;
  for (std::size_t m = 0; m < motifs.size(); ++m) {
    total += motif_weights[m];
    for (std::size_t i = 1; i < seq.size(); ++i) {
      if (static_cast<int>(seq[i - 1]) == motifs[m].first && static_cast<int>(seq[i]) == motifs[m].second) {
        hit += motif_weights[m];
        break;
      }
    }
  }
  return total > 0.0 ? hit / total : 0.0;
}

std::vector<double> SequenceEnv::step_reward() const {
  std::vector<double> r(static_cast<std::size_t>(vocab * vocab), 0.0);
  for (std::size_t m = 0; m < motifs.size(); ++m) r[cell(vocab, motifs[m].first, motifs[m].second)] += motif_weights[m];
  return r;
}

SequenceEnv make_sequence_env(std::uint64_t seed, const SequenceEnvConfig& cfg) {
  if (cfg.vocab < 2 || cfg.length < 2) throw std::invalid_argument("make_sequence_env: vocab and length must be >= 2");
  const auto v = static_cast<std::size_t>(cfg.vocab);
  if (cfg.n_banned > v * (v - 1)) throw std::invalid_argument("make_sequence_env: too many banned bigrams");
  if (cfg.n_motifs > v * v) throw std::invalid_argument("make_sequence_env: too many motifs");
  Rng rng = make_rng(seed, 0x5e9);

  SequenceEnv env;
  env.vocab = cfg.vocab;
  env.length = cfg.length;
  env.banned.assign(v * v, false);
  env.known.assign(v * v, false);

  std::vector<std::size_t> cells(v * v);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<std::size_t> allowed_in_row(v, v);
  std::vector<std::size_t> banned_cells;
  for (std::size_t c : cells) {
    if (banned_cells.size() == cfg.n_banned) break;
    if (allowed_in_row[c / v] <= 1) continue;  // keep a successor for every token
    env.banned[c] = true;
    --allowed_in_row[c / v];
    banned_cells.push_back(c);
  }
  const auto n_known =
      static_cast<std::size_t>(std::round(cfg.known_banned_fraction * static_cast<double>(banned_cells.size())));
  for (std::size_t i = 0; i < n_known; ++i) env.known[banned_cells[i]] = true;

  // Some motifs are bigrams the safe policy does not know are banned, so
  // reward-seeking has something to trip over.
  std::vector<std::size_t> motif_cells;
  for (std::size_t i = n_known; i < banned_cells.size(); ++i) {
    if (motif_cells.size() >= std::min(cfg.banned_motifs, cfg.n_motifs)) break;
    motif_cells.push_back(banned_cells[i]);
  }
  std::shuffle(cells.begin(), cells.end(), rng);
  for (std::size_t c : cells) {
    if (motif_cells.size() >= cfg.n_motifs) break;
    if (std::find(motif_cells.begin(), motif_cells.end(), c) == motif_cells.end()) motif_cells.push_back(c);
  }
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  for (std::size_t c : motif_cells) {
    env.motifs.emplace_back(static_cast<int>(c / v), static_cast<int>(c % v));
    env.motif_weights.push_back(weight(rng));
  }

  // Constructive witness that the feasible set is non-empty.
  Point witness{0.0};
  for (int i = 1; i < env.length; ++i) {
    const int prev = static_cast<int>(witness.back());
    int next = 0;
    while (env.banned[cell(env.vocab, prev, next)]) ++next;
    witness.push_back(next);
  }
  if (!env.feasible(witness)) throw std::logic_error("make_sequence_env: no feasible sequence");
  return env;
}

MarkovSequencePolicy feasibility_chain(const SequenceEnv& env) {
  const auto v = static_cast<std::size_t>(env.vocab);
  std::vector<double> trans(v * v, 0.0);
  for (std::size_t a = 0; a < v; ++a) {
    std::size_t allowed = 0;
    for (std::size_t b = 0; b < v; ++b) allowed += env.banned[a * v + b] ? 0 : 1;
    for (std::size_t b = 0; b < v; ++b) trans[a * v + b] = env.banned[a * v + b] ? 0.0 : 1.0 / static_cast<double>(allowed);
  }
  return MarkovSequencePolicy(env.vocab, env.length, std::vector<double>(v, 1.0 / static_cast<double>(v)),
                              std::move(trans), env.banned);
}

double markov_infeasibility(const MarkovSequencePolicy& policy, const SequenceEnv& env) {
  if (policy.vocab() != env.vocab || policy.length() != env.length) {
    throw std::invalid_argument("markov_infeasibility: policy and environment disagree on shape");
  }
  const auto v = static_cast<std::size_t>(env.vocab);
  std::vector<double> f = policy.initial_probs();
  for (int step = 1; step < env.length; ++step) {
    std::vector<double> next(v, 0.0);
    for (std::size_t a = 0; a < v; ++a) {
      for (std::size_t b = 0; b < v; ++b) {
        if (!env.banned[a * v + b]) next[b] += f[a] * policy.transition(static_cast<int>(a), static_cast<int>(b));
      }
    }
    f = std::move(next);
  }
  return 1.0 - std::accumulate(f.begin(), f.end(), 0.0);
}

MarkovSequencePolicy fit_safe_policy(const SequenceEnv& env, const SequenceOptConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x5afe);
  const MarkovSequencePolicy chain = feasibility_chain(env);
  std::vector<std::vector<int>> seqs;
  seqs.reserve(cfg.n_seeds);
  for (std::size_t i = 0; i < cfg.n_seeds; ++i) seqs.push_back(tokens_of(chain.sample(rng)));
  return fit_markov(seqs, env.vocab, env.length, env.known, cfg.seed_smoothing);
}

double SequenceOptResult::deployed_mean_loss() const {
  RunningStats s;
  for (const auto& log : logs) {
    if (log.round == 0) continue;
    for (const auto& a : log.actions) s.add(a.loss);
  }
  return s.mean();
}

namespace {

struct Observation {
  Point x;
  double loss = 0.0;
  double reward = 0.0;
  std::size_t source = 0;  // index of the deployed policy that produced it
};

}  // namespace

SequenceOptResult sequence_opt_run(const SequenceEnv& env, const MarkovSequencePolicy& safe_policy, double alpha,
                                   const SequenceOptConfig& cfg, std::uint64_t seed) {
  if (cfg.rounds < 0) throw std::invalid_argument("sequence_opt_run: rounds must be >= 0");
  if (cfg.n_per_round == 0) throw std::invalid_argument("sequence_opt_run: n_per_round must be >= 1");
  Rng rng = make_rng(seed, 0x5e0);
  auto safe = std::make_shared<const MarkovSequencePolicy>(safe_policy);
  const auto step_reward = env.step_reward();

  SequenceOptResult out;
  out.safe_infeasibility = markov_infeasibility(*safe, env);
  std::vector<PolicyPtr> deployed_by_round;
  std::vector<Observation> train;
  std::vector<Observation> cal;
  double best = kNegInf;

  for (int t = 0; t <= cfg.rounds; ++t) {
    RoundLog log;
    log.round = t;
    std::vector<Point> draws;
    PolicyPtr deployed = safe;
    if (t == 0) {
      for (std::size_t i = 0; i < cfg.n_per_round; ++i) draws.push_back(safe->sample(rng));
      log.proposals = draws.size();
      log.beta_hat = 0.0;
    } else {
      // Improve: refit on the elite feasible training sequences, then tilt.
      std::vector<const Observation*> ok;
      for (const auto& o : train) {
        if (o.loss == 0.0) ok.push_back(&o);
      }
      std::stable_sort(ok.begin(), ok.end(), [](auto* a, auto* b) { return a->reward > b->reward; });
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(cfg.elite_fraction * static_cast<double>(ok.size()))));
      std::vector<std::vector<int>> elite;
      for (std::size_t i = 0; i < std::min(keep, ok.size()); ++i) elite.push_back(tokens_of(ok[i]->x));
      const MarkovSequencePolicy base =
          elite.empty() ? *safe : fit_markov(elite, env.vocab, env.length, env.known, cfg.refit_smoothing);
      const auto opt = std::make_shared<const MarkovSequencePolicy>(improve_by_tilting(base, step_reward, cfg.tilt * t));

      double log_beta = kInf;
      double log_psi = 0.0;
      if (cfg.controlled) {
        // Calibrate against π_0 with the mixture of past deployed policies.
        std::vector<double> counts(deployed_by_round.size(), 0.0);
        for (const auto& o : cal) counts[o.source] += 1.0;
        std::vector<PolicyPtr> comps;
        std::vector<double> weights;
        for (std::size_t r = 0; r < counts.size(); ++r) {
          if (counts[r] == 0.0) continue;
          comps.push_back(deployed_by_round[r]);
          weights.push_back(counts[r] / static_cast<double>(cal.size()));
        }
        if (comps.empty()) {
          comps.push_back(safe);
          weights.push_back(1.0);
        }
        const MixturePolicy mix(comps, weights);
        CalibrationData data;
        for (const auto& o : cal) {
          data.cal.push_back(cache_densities(*opt, *safe, mix, o.x));
          data.losses.push_back(o.loss);
        }
        for (std::size_t i = 0; i < cfg.n_prop; ++i) data.prop.push_back(cache_densities(*opt, *safe, mix, opt->sample(rng)));
        for (std::size_t i = 0; i < cfg.n_safe_probes; ++i) {
          data.safe_probes.push_back(cache_densities(*opt, *safe, mix, safe->sample(rng)));
        }
        const BetaCalibration result = calibrate_beta(data, alpha, 1.0, cfg.beta);
        log_beta = result.log_beta_hat();
        log_psi = result.log_psi_hat[result.chosen_index];
        log.risk_estimate = result.weighted_risk[result.chosen_index];
        log.floor_fallback = result.floor_violated;
      }
      log.beta_hat = std::exp(log_beta);
      log.log_psi_hat = log_psi;

      // Deploy.
      const SampleBatch batch = deploy_constrained(*opt, *safe, log_beta, cfg.n_per_round, cfg.deploy_budget, rng);
      log.proposals = batch.proposals;
      log.degenerate = batch.exhausted(cfg.n_per_round);
      draws = batch.accepted;
      deployed = std::make_shared<const ClippedPolicy>(safe, opt, log_beta, log_psi);
    }
    deployed_by_round.push_back(deployed);
    log.accepts = draws.size();

    SequenceRoundSummary summary;
    summary.round = t;
    summary.beta_hat = log.beta_hat;
    for (auto& x : draws) {
      Observation o{x, env.loss(x), env.reward(x), deployed_by_round.size() - 1};
      if (o.loss == 0.0) best = std::max(best, o.reward);
      log.actions.push_back({0, x, o.reward, o.loss});
      (uniform01(rng) < cfg.train_fraction ? train : cal).push_back(std::move(o));
    }
    summary.mean_loss = log.mean_loss();
    summary.mean_reward = log.mean_reward();
    summary.best_reward = best == kNegInf ? 0.0 : best;
    summary.accept_rate = log.accept_rate();
    summary.degenerate = log.degenerate;
    out.rounds.push_back(summary);
    out.logs.push_back(std::move(log));
  }
  return out;
}

}  // namespace cpc
