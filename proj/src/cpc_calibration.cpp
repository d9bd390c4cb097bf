#include "cpc/cpc_calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cpc/kernels.hpp"

namespace cpc {

CachedDensities cache_densities(const Policy& optimized, const Policy& safe, const Policy& mixture, const Point& x) {
  return {optimized.log_density(x), safe.log_density(x), mixture.log_density(x)};
}

Grid prepare_grid(std::span<const double> log_lrs, double beta_min, std::size_t* below_floor) {
  if (!(beta_min > 0.0) || !std::isfinite(beta_min)) throw std::invalid_argument("prepare_grid: beta_min must be positive");
  std::vector<double> betas;
  std::size_t finite = 0;
  std::size_t floor_count = 0;
  for (double r : log_lrs) {
    if (!std::isfinite(r)) continue;
    ++finite;
    const double b = std::exp(r);
    if (b <= beta_min) {
      ++floor_count;
      continue;
    }
    if (std::isfinite(b)) betas.push_back(b);
  }
  if (finite == 0) throw std::invalid_argument("prepare_grid: no finite likelihood ratios");
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
  betas.insert(betas.begin(), beta_min);
  betas.push_back(kInf);
  if (below_floor) *below_floor = floor_count;
  return Grid(std::move(betas), SafeEnd::low);
}

PsiEstimate estimate_psi(std::span<const double> log_lrs, double log_beta, PsiProposal proposal) {
  if (log_lrs.empty()) throw std::invalid_argument("estimate_psi: no samples");
  std::vector<double> terms(log_lrs.size());
  for (std::size_t i = 0; i < log_lrs.size(); ++i) {
    const double r = log_lrs[i];
    if (proposal == PsiProposal::optimistic) {
      // min(β π_0 / π_t, 1) under x ~ π_t
      terms[i] = log_beta == kInf ? 0.0 : std::min(log_beta - r, 0.0);
    } else {
      // min(π_t / π_0, β) under x ~ π_0
      terms[i] = std::min(r, log_beta);
    }
  }
  const double n = static_cast<double>(terms.size());
  PsiEstimate out;
  out.log_psi = logsumexp(terms) - std::log(n);
  RunningStats stats;
  for (double t : terms) stats.add(std::exp(t));
  out.standard_error = stats.standard_error();
  return out;
}

double estimate_log_psi(std::span<const double> log_lrs, double log_beta, PsiProposal proposal) {
  return estimate_psi(log_lrs, log_beta, proposal).log_psi;
}

double raw_log_weight(const CachedDensities& d, double log_beta, double log_psi) {
  const double num = clip_log_density(d.log_opt, d.log_safe, log_beta);
  if (num == kNegInf) return kNegInf;
  if (d.log_mix == kNegInf) throw std::domain_error("conformal weight: mixture density is zero at a point");
  return num - log_psi - d.log_mix;
}

std::vector<double> mixture_conformal_weights(std::span<const CachedDensities> cal, double log_beta, double log_psi) {
  std::vector<double> raw(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) raw[i] = std::exp(raw_log_weight(cal[i], log_beta, log_psi));
  return raw;
}

double estimate_w_max(std::span<const CachedDensities> probes, double log_beta, double log_psi, double safety_factor) {
  if (probes.empty()) throw std::invalid_argument("estimate_w_max: no probe points");
  double best = kNegInf;
  for (const auto& d : probes) best = std::max(best, raw_log_weight(d, log_beta, log_psi));
  return std::exp(best) * safety_factor;
}

WeightSet normalize_weights(std::span<const double> raw, double w_max, double beta) {
  double total = w_max;
  for (double w : raw) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("normalize_weights: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw std::invalid_argument("normalize_weights: all weights are zero");
  WeightSet out;
  out.beta = beta;
  out.weights.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.weights[i] = raw[i] / total;
  out.w_max = w_max / total;
  return out;
}

double weighted_risk(std::span<const double> raw, std::span<const double> losses, double w_max, double bound) {
  if (raw.size() != losses.size()) throw std::invalid_argument("weighted_risk: length mismatch");
  const WeightSet w = normalize_weights(raw, w_max, 0.0);
  double risk = w.w_max * bound;
  for (std::size_t i = 0; i < raw.size(); ++i) risk += w.weights[i] * losses[i];
  return risk;
}

std::vector<double> exact_permutation_weights(std::span<const PolicyPtr> policies, std::span<const Point> bag) {
  if (policies.size() != bag.size() || bag.empty()) {
    throw std::invalid_argument("exact_permutation_weights: need one policy per bag element");
  }
  if (bag.size() > 8) throw std::invalid_argument("exact_permutation_weights: bag too large to enumerate (t > 7)");
  const std::size_t m = bag.size();
  // table[k][j] = log π_k(z_j)
  std::vector<std::vector<double>> table(m, std::vector<double>(m));
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j < m; ++j) table[k][j] = policies[k]->log_density(bag[j]);
  }
  std::vector<std::vector<double>> terms(m);
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    double joint = 0.0;
    for (std::size_t k = 0; k < m && joint > kNegInf; ++k) joint += table[k][perm[k]];
    terms[perm.back()].push_back(joint);
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<double> log_w(m);
  for (std::size_t i = 0; i < m; ++i) log_w[i] = logsumexp(terms[i]);
  const double log_total = logsumexp(log_w);
  if (log_total == kNegInf) throw std::domain_error("exact_permutation_weights: every ordering has zero density");
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) w[i] = std::exp(log_w[i] - log_total);
  return w;
}

namespace {

std::vector<double> proposal_log_lrs(const CalibrationData& data, PsiProposal proposal) {
  const auto& src = proposal == PsiProposal::optimistic ? data.prop : data.safe_probes;
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i].log_lr();
  return out;
}

void check_inputs(const CalibrationData& data, double alpha, double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("calibrate_beta: bound must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("calibrate_beta: alpha must be positive");
  if (data.cal.size() != data.losses.size()) throw std::invalid_argument("calibrate_beta: losses/points mismatch");
  for (double l : data.losses) {
    if (!(l >= 0.0 && l <= bound)) throw std::invalid_argument("calibrate_beta: loss outside [0, B]");
  }
  if (data.prop.empty()) throw std::invalid_argument("calibrate_beta: empty proposal set");
}

Grid grid_for(const CalibrationData& data, const BetaConfig& config, std::size_t* below_floor) {
  std::vector<double> lrs;
  lrs.reserve(data.cal.size() + data.prop.size());
  for (const auto& d : data.cal) lrs.push_back(d.log_lr());
  for (const auto& d : data.prop) lrs.push_back(d.log_lr());
  return prepare_grid(lrs, config.beta_min, below_floor);
}

BetaPoint evaluate_with(const CalibrationData& data, std::span<const double> psi_lrs, double log_beta, double bound,
                        const BetaConfig& config) {
  BetaPoint p;
  p.log_psi = estimate_log_psi(psi_lrs, log_beta, config.psi_proposal);
  const auto raw = mixture_conformal_weights(data.cal, log_beta, p.log_psi);
  double w_max = 0.0;
  for (const auto* set : {&data.prop, &data.safe_probes}) {
    if (!set->empty()) w_max = std::max(w_max, estimate_w_max(*set, log_beta, p.log_psi, config.safety_factor));
  }
  if (config.cal_points_as_probes && !data.cal.empty()) {
    w_max = std::max(w_max, estimate_w_max(data.cal, log_beta, p.log_psi, config.safety_factor));
  }
  p.w_max = w_max;
  p.risk = weighted_risk(raw, data.losses, w_max, bound);
  return p;
}

double log_of(double beta) { return beta == kInf ? kInf : std::log(beta); }

}  // namespace

BetaPoint evaluate_beta(const CalibrationData& data, double log_beta, double bound, const BetaConfig& config) {
  const auto lrs = proposal_log_lrs(data, config.psi_proposal);
  return evaluate_with(data, lrs, log_beta, bound, config);
}

double BetaCalibration::log_beta_hat() const { return log_of(beta_hat); }

BetaCalibration calibrate_beta(const CalibrationData& data, double alpha, double bound, const BetaConfig& config) {
  check_inputs(data, alpha, bound);
  BetaCalibration out;
  out.alpha = alpha;
  out.bound = bound;
  const Grid grid = grid_for(data, config, &out.lrs_below_floor);
  out.grid = grid.points();
  const auto lrs = proposal_log_lrs(data, config.psi_proposal);
  const auto points = parallel_map<BetaPoint>(
      grid.size(), [&](std::size_t k) { return evaluate_with(data, lrs, log_of(grid[k]), bound, config); });

  std::size_t first_violation = grid.size();
  for (std::size_t k = 0; k < points.size(); ++k) {
    out.log_psi_hat.push_back(points[k].log_psi);
    out.w_max_hat.push_back(points[k].w_max);
    out.weighted_risk.push_back(points[k].risk);
    if (first_violation == grid.size() && !leq_with_ties(points[k].risk, alpha)) first_violation = k;
  }
  out.floor_violated = first_violation == 0;
  out.chosen_index = first_violation == grid.size() ? grid.size() - 1 : (first_violation == 0 ? 0 : first_violation - 1);
  out.beta_hat = grid[out.chosen_index];
  return out;
}

BetaCalibration calibrate_beta_reference(const CalibrationData& data, double alpha, double bound,
                                         const BetaConfig& config) {
  check_inputs(data, alpha, bound);
  BetaCalibration out;
  out.alpha = alpha;
  out.bound = bound;
  const Grid grid = grid_for(data, config, &out.lrs_below_floor);
  out.grid = grid.points();
  const auto lrs = proposal_log_lrs(data, config.psi_proposal);
  out.beta_hat = grid[0];
  out.chosen_index = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const BetaPoint p = evaluate_with(data, lrs, log_of(grid[k]), bound, config);
    out.log_psi_hat.push_back(p.log_psi);
    out.w_max_hat.push_back(p.w_max);
    out.weighted_risk.push_back(p.risk);
    if (!leq_with_ties(p.risk, alpha)) {
      out.floor_violated = k == 0;
      return out;
    }
    out.beta_hat = grid[k];
    out.chosen_index = k;
  }
  return out;
}

bool satisfies_prefix_condition(const BetaCalibration& r) {
  if (r.weighted_risk.empty() || r.chosen_index >= r.weighted_risk.size()) return false;
  if (r.floor_violated) return r.chosen_index == 0 && !leq_with_ties(r.weighted_risk[0], r.alpha);
  for (std::size_t k = 0; k <= r.chosen_index; ++k) {
    if (!leq_with_ties(r.weighted_risk[k], r.alpha)) return false;
  }
  const std::size_t next = r.chosen_index + 1;
  return next >= r.weighted_risk.size() || !leq_with_ties(r.weighted_risk[next], r.alpha);
}

nlohmann::json to_json(const BetaCalibration& r) {
  auto ext = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json grid = nlohmann::json::array();
  for (double b : r.grid) grid.push_back(ext(b));
  nlohmann::json psi = nlohmann::json::array();
  for (double lp : r.log_psi_hat) psi.push_back(std::exp(lp));
  return {{"alpha", r.alpha},
          {"B", r.bound},
          {"beta_hat", ext(r.beta_hat)},
          {"grid", grid},
          {"psi_hat", psi},
          {"w_max_hat", r.w_max_hat},
          {"weighted_risk", r.weighted_risk},
          {"lrs_below_beta_min", r.lrs_below_floor},
          {"beta_min_violated", r.floor_violated}};
}

void write_csv(std::ostream& out, const BetaCalibration& r) {
  out << "beta,psi_hat,w_max_hat,weighted_risk\n";
  for (std::size_t k = 0; k < r.weighted_risk.size(); ++k) {
    out << r.grid[k] << ',' << std::exp(r.log_psi_hat[k]) << ',' << r.w_max_hat[k] << ',' << r.weighted_risk[k] << '\n';
  }
}

}  // namespace cpc
