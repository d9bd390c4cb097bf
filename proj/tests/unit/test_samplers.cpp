#include <algorithm>
#include <cmath>

#include "cpc/samplers.hpp"
#include "doctest.h"

using namespace cpc;

namespace {

std::shared_ptr<const DiscretePolicy> cat(std::vector<double> p) {
  return std::make_shared<const DiscretePolicy>(make_categorical(std::move(p)));
}

struct Pair {
  std::shared_ptr<const DiscretePolicy> safe = cat({0.3, 0.25, 0.2, 0.15, 0.1});
  std::shared_ptr<const DiscretePolicy> opt = cat({0.05, 0.1, 0.15, 0.3, 0.4});
  // LRs: 1/6, 0.4, 0.75, 2, 4
};

std::vector<double> frequencies(const std::vector<Point>& pts, std::size_t k) {
  std::vector<double> f(k, 0.0);
  for (const auto& x : pts) f[static_cast<std::size_t>(x[0])] += 1.0 / static_cast<double>(pts.size());
  return f;
}

// |rate - target| within 3 binomial standard errors
bool rate_matches(const SampleBatch& b, double target) {
  target = std::clamp(target, 0.0, 1.0);  // ψ/β can round a hair above 1 at β = min LR
  const double n = static_cast<double>(b.proposals);
  return std::abs(b.rate() - target) <= 3.0 * std::sqrt(target * (1.0 - target) / n) + 1e-12;
}

}  // namespace

TEST_CASE("safe proposal: exact law and acceptance rate psi/beta") {
  const Pair p;
  for (double beta : {1.0 / 6.0, 0.75, 4.0}) {
    Rng rng = make_rng(1);
    const auto b = rejection_sample_safe(*p.opt, *p.safe, std::log(beta), rng, kNoLimit, 100000);
    REQUIRE(b.accepted.size() == 100000);
    const auto exact = normalize_exact(*p.opt, *p.safe, beta);
    CHECK(total_variation(frequencies(b.accepted, 5), exact.policy->probs()) < 0.02);
    CHECK(rate_matches(b, exact.psi / beta));
    CHECK(b.envelope == doctest::Approx(beta));
  }
  Rng rng = make_rng(2);
  const auto all = rejection_sample_safe(*p.opt, *p.safe, std::log(0.1), rng, 1000);
  CHECK(all.rate() == 1.0);
  CHECK_THROWS(rejection_sample_safe(*p.opt, *p.safe, kInf, rng, 10));
}

TEST_CASE("optimized proposal: exact law and acceptance rate psi") {
  const Pair p;
  for (double beta : {1.0 / 6.0, 0.75, 4.0}) {
    Rng rng = make_rng(3);
    const auto b = rejection_sample_optimized(*p.opt, *p.safe, std::log(beta), rng, kNoLimit, 100000);
    const auto exact = normalize_exact(*p.opt, *p.safe, beta);
    CHECK(total_variation(frequencies(b.accepted, 5), exact.policy->probs()) < 0.02);
    CHECK(rate_matches(b, exact.psi));
  }
  Rng rng = make_rng(4);
  CHECK(rejection_sample_optimized(*p.opt, *p.safe, std::log(4.0), rng, 1000).rate() == 1.0);
  CHECK(rejection_sample_optimized(*p.opt, *p.safe, kInf, rng, 1000).rate() == 1.0);
}

TEST_CASE("proposal crossover") {
  const Pair p;
  Rng rng = make_rng(5);
  const double lo = std::log(0.2);
  const double hi = std::log(3.5);
  CHECK(rejection_sample_safe(*p.opt, *p.safe, lo, rng, 20000).rate() >
        rejection_sample_optimized(*p.opt, *p.safe, lo, rng, 20000).rate());
  CHECK(rejection_sample_safe(*p.opt, *p.safe, hi, rng, 20000).rate() <
        rejection_sample_optimized(*p.opt, *p.safe, hi, rng, 20000).rate());
}

TEST_CASE("envelope estimates") {
  const Pair p;
  std::vector<Point> support;
  for (int k = 0; k < 5; ++k) support.push_back({double(k)});
  for (double beta : {0.2, 1.0, 3.0}) {
    const double lb = std::log(beta);
    CHECK(estimate_envelope(*p.opt, *p.safe, lb, 1.0, support, 1.0) <= beta + 1e-12);
    CHECK(estimate_envelope(*p.opt, *p.safe, lb, 0.0, support, 1.0) <= 1.0 + 1e-12);
    // brute-force sup of min(π_t, β π_0) / q_w at w = 0.3
    double sup = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double po = std::exp(p.opt->log_density({double(k)}));
      const double ps = std::exp(p.safe->log_density({double(k)}));
      sup = std::max(sup, std::min(po, beta * ps) / (0.3 * ps + 0.7 * po));
    }
    CHECK(estimate_envelope(*p.opt, *p.safe, lb, 0.3, support, 1.0) == doctest::Approx(sup));
    CHECK(estimate_envelope(*p.opt, *p.safe, lb, 0.3, support) == doctest::Approx(1.05 * sup));
  }
  const std::vector<Point> none;
  CHECK_THROWS(estimate_envelope(*p.opt, *p.safe, 0.0, 0.5, none));
}

TEST_CASE("mixture proposal") {
  const Pair p;
  std::vector<Point> support;
  for (int k = 0; k < 5; ++k) support.push_back({double(k)});
  for (double beta : {1.0 / 6.0, 0.75, 4.0}) {
    const double lb = std::log(beta);
    const auto exact = normalize_exact(*p.opt, *p.safe, beta);
    const double m = estimate_envelope(*p.opt, *p.safe, lb, 0.5, support, 1.0);
    Rng rng = make_rng(6);
    const auto b = rejection_sample_mixture(*p.opt, *p.safe, lb, 0.5, m, rng, kNoLimit, 100000);
    CHECK(b.violations == 0);
    CHECK(total_variation(frequencies(b.accepted, 5), exact.policy->probs()) < 0.02);
    CHECK(rate_matches(b, exact.psi / m));
  }
  // reductions to the two simple proposals
  const double lb = std::log(0.75);
  const auto exact = normalize_exact(*p.opt, *p.safe, 0.75);
  Rng rng = make_rng(7);
  const auto w1 = rejection_sample_mixture(*p.opt, *p.safe, lb, 1.0, 0.75, rng, kNoLimit, 50000);
  CHECK(rate_matches(w1, exact.psi / 0.75));
  CHECK(total_variation(frequencies(w1.accepted, 5), exact.policy->probs()) < 0.02);
  const auto w0 = rejection_sample_mixture(*p.opt, *p.safe, lb, 0.0, 1.0, rng, kNoLimit, 50000);
  CHECK(rate_matches(w0, exact.psi));
  CHECK(total_variation(frequencies(w0.accepted, 5), exact.policy->probs()) < 0.02);
  // an envelope that is too small gets clamped and counted
  const auto loose = rejection_sample_mixture(*p.opt, *p.safe, lb, 0.5, 0.3, rng, 2000);
  CHECK(loose.violations > 0);
  CHECK(loose.approximate());
}

TEST_CASE("overlap estimates") {
  const Pair p;
  Rng rng = make_rng(8);
  std::vector<double> from_safe, from_opt;
  for (int i = 0; i < 100000; ++i) {
    from_safe.push_back(log_likelihood_ratio(*p.opt, *p.safe, p.safe->sample(rng)));
    from_opt.push_back(log_likelihood_ratio(*p.opt, *p.safe, p.opt->sample(rng)));
  }
  // endpoints: π^(β) equals the component
  const double lo = std::log(0.1);
  CHECK(estimate_overlap(from_safe, lo, lo, OverlapComponent::safe) == doctest::Approx(1.0));
  CHECK(estimate_overlap(from_opt, kInf, 0.0, OverlapComponent::optimized) == doctest::Approx(1.0));

  const auto exact = normalize_exact(*p.opt, *p.safe, 0.75);
  const auto target = exact.policy->probs();
  double ovl_safe = 0.0, ovl_opt = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    ovl_safe += std::min(target[k], p.safe->probs()[k]);
    ovl_opt += std::min(target[k], p.opt->probs()[k]);
  }
  const double lb = std::log(0.75);
  const double lp = std::log(exact.psi);
  const double es = estimate_overlap(from_safe, lb, lp, OverlapComponent::safe);
  const double eo = estimate_overlap(from_opt, lb, lp, OverlapComponent::optimized);
  CHECK(es >= 0.0);
  CHECK(es <= 1.0);
  // each summand lies in [0, 1], so its SE is at most 0.5 / sqrt(n)
  CHECK(std::abs(es - ovl_safe) < 3.0 * 0.5 / std::sqrt(1e5));
  CHECK(std::abs(eo - ovl_opt) < 3.0 * 0.5 / std::sqrt(1e5));
  const std::vector<double> none;
  CHECK_THROWS(estimate_overlap(none, 0.0, 0.0, OverlapComponent::safe));
}

TEST_CASE("mixture weight heuristic and adaptive update") {
  CHECK(mixture_weight_heuristic(0.4, 0.4).w == 0.5);
  CHECK(mixture_weight_heuristic(1.0, 0.0).w == 1.0);
  CHECK(mixture_weight_heuristic(0.3, 0.6).w == doctest::Approx(1.0 / 3.0));
  const auto zero = mixture_weight_heuristic(0.0, 0.0);
  CHECK(zero.w == 0.5);
  CHECK(zero.degenerate);
  CHECK(adaptive_mixture_update(0.4, 0.3, 0.3, 0.1) == 0.4);
  CHECK(adaptive_mixture_update(0.5, 1.0, 0.0, 0.1) == doctest::Approx(0.6));
  CHECK(adaptive_mixture_update(0.95, 1.0, 0.0, 0.5) == 1.0);
  CHECK(adaptive_mixture_update(0.05, 0.0, 1.0, 0.5) == 0.0);
}

TEST_CASE("budget exhaustion returns a partial batch") {
  const Pair p;
  Rng rng = make_rng(9);
  const auto b = rejection_sample_safe(*p.opt, *p.safe, std::log(4.0), rng, 10, 1000);
  CHECK(b.proposals == 10);
  CHECK(b.exhausted(1000));
  const auto j = to_json(b);
  for (const char* key : {"kind", "beta", "proposals", "accepts", "rate", "envelope", "violations"}) CHECK(j.contains(key));
}

TEST_CASE("chunked sampling is independent of the worker count") {
  const Pair p;
  for (auto kind : {ProposalKind::safe, ProposalKind::optimized, ProposalKind::mixture}) {
    const auto a = sample_constrained(*p.opt, *p.safe, std::log(0.75), kind, 42, 5000, kNoLimit, 0.5, 1.2);
    const auto b = sample_constrained_reference(*p.opt, *p.safe, std::log(0.75), kind, 42, 5000, kNoLimit, 0.5, 1.2);
    CHECK(a.accepted == b.accepted);
    CHECK(a.proposals == b.proposals);
    CHECK(a.accepted.size() == 5000);
  }
}

TEST_CASE("imh: stationarity of the transition matrix") {
  const Pair p;
  for (double beta : {0.2, 1.0, 3.0}) {
    std::vector<double> target, proposal;
    for (int k = 0; k < 5; ++k) {
      target.push_back(clipped_unnorm_log_density(*p.opt, *p.safe, std::log(beta), {double(k)}));
      proposal.push_back(p.safe->log_density({double(k)}));
    }
    const auto P = imh_transition_matrix(target, proposal);
    const auto pi = normalize_exact(*p.opt, *p.safe, beta).policy->probs();
    for (std::size_t j = 0; j < 5; ++j) {
      double flow = 0.0, row = 0.0;
      for (std::size_t i = 0; i < 5; ++i) flow += pi[i] * P[i][j];
      for (std::size_t i = 0; i < 5; ++i) row += P[j][i];
      CHECK(std::abs(flow - pi[j]) < 1e-9);
      CHECK(row == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("imh chain") {
  const Pair p;
  const double lb = std::log(1.0);
  auto target = [&](const Point& x) { return clipped_unnorm_log_density(*p.opt, *p.safe, lb, x); };
  Rng rng = make_rng(10);
  const auto chain = imh_chain(target, *p.safe, {0}, 100000, 1000, rng);
  CHECK(chain.states.size() == 99000);
  CHECK(total_variation(frequencies(chain.states, 5), normalize_exact(*p.opt, *p.safe, 1.0).policy->probs()) < 0.03);

  // a rejected step leaves the state exactly as it was
  Rng again = make_rng(11);
  const auto raw = imh_chain(target, *p.safe, {0}, 5000, 0, again);
  std::size_t rejects = 0;
  for (std::size_t s = 1; s < raw.states.size(); ++s) {
    if (!raw.accepted[s]) {
      ++rejects;
      CHECK(raw.states[s] == raw.states[s - 1]);
    }
  }
  CHECK(rejects > 0);

  // proposal equal to the normalized target: always accept
  const auto exact = normalize_exact(*p.opt, *p.safe, 1.0).policy;
  const auto all = imh_chain(target, *exact, {1}, 2000, 0, rng);
  CHECK(all.acceptance_rate() == 1.0);

  const auto sparse = cat({0.0, 0.5, 0.5, 0.0, 0.0});
  auto sparse_target = [&](const Point& x) { return sparse->log_density(x); };
  CHECK_THROWS(imh_chain(sparse_target, *p.safe, {0}, 10, 0, rng));
}
