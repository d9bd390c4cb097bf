#include "cpc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cpc/kernels.hpp"

namespace cpc {

const char* to_string(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::safe: return "safe";
    case ProposalKind::optimized: return "optimized";
    case ProposalKind::mixture: return "mixture";
  }
  return "unknown";
}

double SampleBatch::rate() const {
  return proposals == 0 ? 0.0 : static_cast<double>(accepted.size()) / static_cast<double>(proposals);
}

nlohmann::json to_json(const SampleBatch& b) {
  auto ext = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"kind", to_string(b.kind)}, {"beta", ext(b.beta)},     {"proposals", b.proposals},
          {"accepts", b.accepted.size()}, {"rate", b.rate()},   {"envelope", ext(b.envelope)},
          {"violations", b.violations}};
}

namespace {

double beta_of(double log_beta) { return log_beta == kInf ? kInf : std::exp(log_beta); }

// Shared accept-reject loop. log_accept(x) returns the log acceptance ratio
// before clamping; a value above 0 is an envelope violation.
template <typename Propose, typename LogAccept>
void run(SampleBatch& batch, Rng& rng, std::size_t budget, std::size_t wanted, Propose&& propose,
         LogAccept&& log_accept) {
  while (batch.proposals < budget && batch.accepted.size() < wanted) {
    Point x = propose();
    ++batch.proposals;
    double la = log_accept(x);
    if (la > 1e-12) ++batch.violations;
    la = std::min(la, 0.0);
    if (la == 0.0 || std::log(uniform01(rng)) < la) batch.accepted.push_back(std::move(x));
  }
}

}  // namespace

SampleBatch rejection_sample_safe(const Policy& optimized, const Policy& safe, double log_beta, Rng& rng,
                                  std::size_t budget, std::size_t wanted) {
  if (log_beta == kInf) throw std::invalid_argument("rejection_sample_safe: envelope beta is infinite");
  SampleBatch batch;
  batch.kind = ProposalKind::safe;
  batch.beta = beta_of(log_beta);
  batch.envelope = batch.beta;
  run(
      batch, rng, budget, wanted, [&] { return safe.sample(rng); },
      [&](const Point& x) {
        const double r = optimized.log_density(x) - safe.log_density(x);
        return std::min(r - log_beta, 0.0);
      });
  return batch;
}

SampleBatch rejection_sample_optimized(const Policy& optimized, const Policy& safe, double log_beta, Rng& rng,
                                       std::size_t budget, std::size_t wanted) {
  SampleBatch batch;
  batch.kind = ProposalKind::optimized;
  batch.beta = beta_of(log_beta);
  batch.envelope = 1.0;
  run(
      batch, rng, budget, wanted, [&] { return optimized.sample(rng); },
      [&](const Point& x) {
        if (log_beta == kInf) return 0.0;
        const double ls = safe.log_density(x);
        if (ls == kNegInf) return kNegInf;
        return std::min(log_beta + ls - optimized.log_density(x), 0.0);
      });
  return batch;
}

double log_envelope_ratio(const Policy& optimized, const Policy& safe, double log_beta, double w, const Point& x) {
  const double lo = optimized.log_density(x);
  const double ls = safe.log_density(x);
  const double num = clip_log_density(lo, ls, log_beta);
  if (num == kNegInf) return kNegInf;
  const double lw = w > 0.0 ? std::log(w) + ls : kNegInf;
  const double lw1 = w < 1.0 ? std::log1p(-w) + lo : kNegInf;
  return num - log_add(lw, lw1);
}

SampleBatch rejection_sample_mixture(const Policy& optimized, const Policy& safe, double log_beta, double w,
                                     double envelope, Rng& rng, std::size_t budget, std::size_t wanted) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("rejection_sample_mixture: w must lie in [0, 1]");
  if (!(envelope > 0.0) || !std::isfinite(envelope)) {
    throw std::invalid_argument("rejection_sample_mixture: envelope must be positive and finite");
  }
  SampleBatch batch;
  batch.kind = ProposalKind::mixture;
  batch.beta = beta_of(log_beta);
  batch.envelope = envelope;
  const double log_m = std::log(envelope);
  run(
      batch, rng, budget, wanted,
      [&] { return uniform01(rng) < w ? safe.sample(rng) : optimized.sample(rng); },
      [&](const Point& x) { return log_envelope_ratio(optimized, safe, log_beta, w, x) - log_m; });
  return batch;
}

double estimate_envelope(const Policy& optimized, const Policy& safe, double log_beta, double w,
                         std::span<const Point> probes, double inflation) {
  if (probes.empty()) throw std::invalid_argument("estimate_envelope: no probe points");
  double best = kNegInf;
  for (const auto& x : probes) best = std::max(best, log_envelope_ratio(optimized, safe, log_beta, w, x));
  return std::exp(best) * inflation;
}

double estimate_overlap(std::span<const double> log_lrs, double log_beta, double log_psi, OverlapComponent component) {
  if (log_lrs.empty()) throw std::invalid_argument("estimate_overlap: no samples");
  RunningStats s;
  for (double r : log_lrs) {
    double log_ratio;  // log π^(β)(x) / π_c(x)
    if (component == OverlapComponent::safe) {
      log_ratio = std::min(r, log_beta) - log_psi;
    } else {
      log_ratio = (log_beta == kInf ? 0.0 : std::min(log_beta - r, 0.0)) - log_psi;
    }
    s.add(std::exp(std::min(log_ratio, 0.0)));
  }
  return s.mean();
}

MixtureWeight mixture_weight_heuristic(double ovl_safe, double ovl_opt) {
  if (!(ovl_safe >= 0.0 && ovl_safe <= 1.0 && ovl_opt >= 0.0 && ovl_opt <= 1.0)) {
    throw std::invalid_argument("mixture_weight_heuristic: overlaps must lie in [0, 1]");
  }
  if (ovl_safe + ovl_opt == 0.0) return {0.5, true};
  return {ovl_safe / (ovl_safe + ovl_opt), false};
}

double adaptive_mixture_update(double w, double acc_rate_safe, double acc_rate_opt, double step) {
  return std::clamp(w + step * (acc_rate_safe - acc_rate_opt), 0.0, 1.0);
}

namespace {

template <typename Map>
SampleBatch chunked(Map&& map, const Policy& optimized, const Policy& safe, double log_beta, ProposalKind kind,
                    std::uint64_t seed, std::size_t wanted, std::size_t budget, double w, double envelope,
                    std::size_t chunks) {
  if (chunks == 0) throw std::invalid_argument("sample_constrained: chunks must be >= 1");
  auto share = [chunks](std::size_t total, std::size_t c) {
    if (total == kNoLimit) return kNoLimit;
    return total / chunks + (c < total % chunks ? 1 : 0);
  };
  auto parts = map(chunks, [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    const std::size_t b = share(budget, c);
    const std::size_t n = share(wanted, c);
    switch (kind) {
      case ProposalKind::safe: return rejection_sample_safe(optimized, safe, log_beta, rng, b, n);
      case ProposalKind::optimized: return rejection_sample_optimized(optimized, safe, log_beta, rng, b, n);
      case ProposalKind::mixture:
        break;
    }
    return rejection_sample_mixture(optimized, safe, log_beta, w, envelope, rng, b, n);
  });
  SampleBatch out = std::move(parts[0]);
  for (std::size_t c = 1; c < parts.size(); ++c) {
    out.proposals += parts[c].proposals;
    out.violations += parts[c].violations;
    for (auto& x : parts[c].accepted) out.accepted.push_back(std::move(x));
  }
  return out;
}

}  // namespace

SampleBatch sample_constrained(const Policy& optimized, const Policy& safe, double log_beta, ProposalKind kind,
                               std::uint64_t seed, std::size_t wanted, std::size_t budget, double w,
                               double envelope, std::size_t chunks) {
  return chunked([](std::size_t n, auto&& fn) { return parallel_map<SampleBatch>(n, fn); }, optimized, safe,
                 log_beta, kind, seed, wanted, budget, w, envelope, chunks);
}

SampleBatch sample_constrained_reference(const Policy& optimized, const Policy& safe, double log_beta,
                                         ProposalKind kind, std::uint64_t seed, std::size_t wanted,
                                         std::size_t budget, double w, double envelope, std::size_t chunks) {
  return chunked([](std::size_t n, auto&& fn) { return serial_map<SampleBatch>(n, fn); }, optimized, safe,
                 log_beta, kind, seed, wanted, budget, w, envelope, chunks);
}

double ImhChain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  return static_cast<double>(std::count(accepted.begin(), accepted.end(), true)) /
         static_cast<double>(accepted.size());
}

ImhChain imh_chain(const LogDensityFn& target_unnorm, const Policy& proposal, Point initial, std::size_t steps,
                   std::size_t burn_in, Rng& rng) {
  double log_r = target_unnorm(initial) - proposal.log_density(initial);
  if (target_unnorm(initial) == kNegInf) throw std::invalid_argument("imh_chain: initial state has zero target density");
  if (std::isnan(log_r)) throw std::invalid_argument("imh_chain: proposal density is zero at the initial state");
  ImhChain chain;
  chain.accepted.reserve(steps);
  if (steps > burn_in) chain.states.reserve(steps - burn_in);
  Point state = std::move(initial);
  for (std::size_t s = 0; s < steps; ++s) {
    Point cand = proposal.sample(rng);
    const double lt = target_unnorm(cand);
    const double cand_log_r = lt == kNegInf ? kNegInf : lt - proposal.log_density(cand);
    const double la = std::min(cand_log_r - log_r, 0.0);
    const bool accept = la == 0.0 || std::log(uniform01(rng)) < la;
    if (accept) {
      state = std::move(cand);
      log_r = cand_log_r;
    }
    chain.accepted.push_back(accept);
    if (s >= burn_in) chain.states.push_back(state);
  }
  return chain;
}

std::vector<std::vector<double>> imh_transition_matrix(std::span<const double> target_log,
                                                       std::span<const double> proposal_log) {
  if (target_log.size() != proposal_log.size()) throw std::invalid_argument("imh_transition_matrix: size mismatch");
  const std::size_t m = target_log.size();
  std::vector<double> log_r(m);
  for (std::size_t i = 0; i < m; ++i) {
    log_r[i] = target_log[i] == kNegInf ? kNegInf : target_log[i] - proposal_log[i];
  }
  std::vector<std::vector<double>> p(m, std::vector<double>(m, 0.0));
  for (std::size_t x = 0; x < m; ++x) {
    if (log_r[x] == kNegInf) continue;  // unreachable state; row left empty
    double off = 0.0;
    for (std::size_t y = 0; y < m; ++y) {
      if (y == x) continue;
      const double q = std::exp(proposal_log[y]);
      p[x][y] = log_r[y] == kNegInf ? 0.0 : q * std::exp(std::min(log_r[y] - log_r[x], 0.0));
      off += p[x][y];
    }
    p[x][x] = 1.0 - off;
  }
  return p;
}

}  // namespace cpc
