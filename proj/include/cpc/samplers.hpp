#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cpc/policies.hpp"
#include "json.hpp"

namespace cpc {

enum class ProposalKind { safe, optimized, mixture };

const char* to_string(ProposalKind kind);

/// Accept-reject bookkeeping. Accepted points are exact draws from π^(β)
/// whenever the envelope held on every proposal (violations == 0).
struct SampleBatch {
  std::vector<Point> accepted;
  std::size_t proposals = 0;
  ProposalKind kind = ProposalKind::safe;
  double beta = 0.0;
  double envelope = 0.0;
  std::size_t violations = 0;  // proposals whose acceptance ratio exceeded 1 and was clamped

  double rate() const;
  bool exhausted(std::size_t wanted) const { return accepted.size() < wanted; }
  bool approximate() const { return violations > 0; }
};

nlohmann::json to_json(const SampleBatch& batch);

inline constexpr std::size_t kNoLimit = std::numeric_limits<std::size_t>::max();

/// Proposals from π_0, envelope M = β: accept with min(LR / β, 1).
/// Stops after `wanted` accepts or `budget` proposals, whichever comes first.
SampleBatch rejection_sample_safe(const Policy& optimized, const Policy& safe, double log_beta, Rng& rng,
                                  std::size_t budget, std::size_t wanted = kNoLimit);

/// Proposals from π_t, envelope M = 1: accept with min(β / LR, 1).
SampleBatch rejection_sample_optimized(const Policy& optimized, const Policy& safe, double log_beta, Rng& rng,
                                       std::size_t budget, std::size_t wanted = kNoLimit);

/// Proposals from q_w = w π_0 + (1 - w) π_t with envelope M.
SampleBatch rejection_sample_mixture(const Policy& optimized, const Policy& safe, double log_beta, double w,
                                     double envelope, Rng& rng, std::size_t budget, std::size_t wanted = kNoLimit);

/// log p̃(x) - log q_w(x) with p̃ = min(π_t, β π_0).
double log_envelope_ratio(const Policy& optimized, const Policy& safe, double log_beta, double w, const Point& x);

/// max over probes of p̃ / q_w, times `inflation`.
double estimate_envelope(const Policy& optimized, const Policy& safe, double log_beta, double w,
                         std::span<const Point> probes, double inflation = 1.05);

enum class OverlapComponent { safe, optimized };

/// Overlap between π^(β) (normalizer ψ̂) and one component, from the log-LRs
/// of samples drawn from that component: mean of min(π^(β)(x) / π_c(x), 1).
double estimate_overlap(std::span<const double> log_lrs, double log_beta, double log_psi, OverlapComponent component);

struct MixtureWeight {
  double w = 0.5;
  bool degenerate = false;  // both overlaps were zero
};

/// w = ovl_safe / (ovl_safe + ovl_opt); 0.5 (flagged) if both are zero.
MixtureWeight mixture_weight_heuristic(double ovl_safe, double ovl_opt);

/// w' = clamp(w + step (acc_safe - acc_opt), 0, 1).
double adaptive_mixture_update(double w, double acc_rate_safe, double acc_rate_opt, double step);

/// Runs the sampler of `kind` over independent chunks in parallel and
/// concatenates the results in chunk order. Chunk c uses make_rng(seed, c),
/// so the output does not depend on the worker count.
SampleBatch sample_constrained(const Policy& optimized, const Policy& safe, double log_beta, ProposalKind kind,
                               std::uint64_t seed, std::size_t wanted, std::size_t budget, double w = 0.5,
                               double envelope = 1.0, std::size_t chunks = 16);

/// Same chunking, evaluated one chunk at a time.
SampleBatch sample_constrained_reference(const Policy& optimized, const Policy& safe, double log_beta,
                                         ProposalKind kind, std::uint64_t seed, std::size_t wanted,
                                         std::size_t budget, double w = 0.5, double envelope = 1.0,
                                         std::size_t chunks = 16);

struct ImhChain {
  std::vector<Point> states;  // post burn-in
  std::vector<bool> accepted; // every step, burn-in included
  double acceptance_rate() const;
};

using LogDensityFn = std::function<double(const Point&)>;

/// Independence Metropolis-Hastings with importance ratio r = p̃ / q and
/// acceptance min(1, r(x') / r(x)). A rejected step copies the old state.
ImhChain imh_chain(const LogDensityFn& target_unnorm, const Policy& proposal, Point initial, std::size_t steps,
                   std::size_t burn_in, Rng& rng);

/// Transition matrix of the chain above on an enumerated support:
/// P[x][y] = q(y) min(1, r(y) / r(x)) for y != x, rejections on the diagonal.
std::vector<std::vector<double>> imh_transition_matrix(std::span<const double> target_log,
                                                       std::span<const double> proposal_log);

}  // namespace cpc
