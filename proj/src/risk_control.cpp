#include "cpc/risk_control.hpp"

#include <cmath>
#include <stdexcept>

#include "cpc/kernels.hpp"

namespace cpc {

namespace {

void validate(std::span<const LossCurve> losses, const Grid& grid, double alpha, double bound) {
  if (losses.empty()) throw std::invalid_argument("risk control: empty loss set");
  if (!(bound > 0.0)) throw std::invalid_argument("risk control: bound must be positive");
  if (!(alpha > 0.0 && alpha <= bound)) throw std::invalid_argument("risk control: alpha outside (0, B]");
  for (const auto& c : losses) {
    if (c.size() != grid.size()) throw std::invalid_argument("risk control: curve does not match grid");
    if (c.bound() > bound) throw std::invalid_argument("risk control: curve bound exceeds B");
  }
}

// (B + sum_i l_i(λ_k)) / (n + 1) given precomputed column sums.
std::vector<double> adjusted_trace(const std::vector<double>& sums, std::size_t n, double bound) {
  std::vector<double> trace(sums.size());
  const double denom = static_cast<double>(n + 1);
  for (std::size_t k = 0; k < sums.size(); ++k) trace[k] = (bound + sums[k]) / denom;
  return trace;
}

CalibrationReport make_report(const Grid& grid, std::vector<double> trace, std::size_t index, double alpha,
                              double bound) {
  CalibrationReport r;
  r.chosen_index = index;
  r.chosen = grid[index];
  r.risk_trace = std::move(trace);
  r.target = alpha;
  r.bound = bound;
  return r;
}

// λ̂+ index for the bag {losses with sample `skip` replaced by constant b, B}.
std::size_t replaced_index(const std::vector<double>& sums, std::span<const LossCurve> losses, std::size_t skip,
                           double b, std::size_t n, double alpha, double bound) {
  const double denom = static_cast<double>(n + 1);
  const std::size_t m = sums.size();
  auto risk = [&](std::size_t k) { return (bound + sums[k] - losses[skip][k] + b) / denom; };
  std::size_t k = m - 1;
  if (!leq_with_ties(risk(k), alpha)) return k;
  while (k > 0 && leq_with_ties(risk(k - 1), alpha)) --k;
  return k;
}

Instability instability_from_sums(const std::vector<double>& sums, std::span<const LossCurve> losses,
                                  const Grid& grid, double alpha, double bound) {
  const std::size_t n = losses.size();
  const std::size_t base = lambda_plus_index(adjusted_trace(sums, n, bound), alpha);
  Instability out;
  out.per_sample.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double eps = 0.0;
    for (double b : {0.0, bound}) {
      const std::size_t k = replaced_index(sums, losses, i, b, n, alpha, bound);
      eps = std::max(eps, std::abs(grid[base] - grid[k]));
    }
    out.per_sample[i] = eps;
    total += eps;
  }
  out.mean = total / static_cast<double>(n);
  return out;
}

}  // namespace

nlohmann::json to_json(const CalibrationReport& report) {
  nlohmann::json j{{"target", report.target},
                   {"bound", report.bound},
                   {"chosen", report.chosen},
                   {"risk_trace", report.risk_trace},
                   {"epsilon_hat", report.epsilon_hat}};
  if (report.alpha_hat) j["alpha_hat"] = *report.alpha_hat;
  return j;
}

std::size_t lambda_plus_index(std::span<const double> risk_trace, double alpha) {
  if (risk_trace.empty()) throw std::invalid_argument("lambda_plus_index: empty trace");
  std::size_t k = risk_trace.size() - 1;
  if (!leq_with_ties(risk_trace[k], alpha)) return k;
  while (k > 0 && leq_with_ties(risk_trace[k - 1], alpha)) --k;
  return k;
}

CalibrationReport crc_lambda(std::span<const LossCurve> losses, const Grid& grid, double alpha, double bound) {
  validate(losses, grid, alpha, bound);
  auto trace = adjusted_trace(column_sums(losses), losses.size(), bound);
  std::size_t index = grid.size() - 1;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (leq_with_ties(trace[k], alpha)) {
      index = k;
      break;
    }
  }
  return make_report(grid, std::move(trace), index, alpha, bound);
}

CalibrationReport gcrc_lambda_plus(std::span<const LossCurve> losses, const Grid& grid, double alpha,
                                   double bound) {
  validate(losses, grid, alpha, bound);
  auto trace = adjusted_trace(column_sums(losses), losses.size(), bound);
  const std::size_t index = lambda_plus_index(trace, alpha);
  return make_report(grid, std::move(trace), index, alpha, bound);
}

std::size_t oracle_lambda_plus_index(std::span<const LossCurve> bag, const Grid& grid, double alpha) {
  if (bag.empty()) throw std::invalid_argument("oracle_lambda_plus: empty bag");
  for (const auto& c : bag) {
    if (c.size() != grid.size()) throw std::invalid_argument("oracle_lambda_plus: curve does not match grid");
  }
  auto sums = column_sums(bag);
  for (double& s : sums) s /= static_cast<double>(bag.size());
  return lambda_plus_index(sums, alpha);
}

double oracle_lambda_plus(std::span<const LossCurve> bag, const Grid& grid, double alpha) {
  return grid[oracle_lambda_plus_index(bag, grid, alpha)];
}

Instability replace_one_instability(std::span<const LossCurve> losses, const Grid& grid, double alpha,
                                    double bound) {
  if (losses.size() < 2) throw std::invalid_argument("replace_one_instability: need n >= 2");
  validate(losses, grid, alpha, bound);
  return instability_from_sums(column_sums(losses), losses, grid, alpha, bound);
}

ConservativeAlpha conservative_alpha_hat(std::span<const LossCurve> losses, const Grid& grid, double alpha,
                                         double bound, double lipschitz, std::size_t scan_points) {
  if (lipschitz < 0.0) throw std::invalid_argument("conservative_alpha_hat: K must be >= 0");
  if (scan_points == 0) throw std::invalid_argument("conservative_alpha_hat: empty scan");
  if (losses.size() < 2) throw std::invalid_argument("conservative_alpha_hat: need n >= 2");
  validate(losses, grid, alpha, bound);

  const auto sums = column_sums(losses);
  const double n1 = static_cast<double>(losses.size() + 1);
  ConservativeAlpha out;
  for (std::size_t j = 0; j < scan_points; ++j) {
    const double candidate = alpha * static_cast<double>(scan_points - j) / static_cast<double>(scan_points);
    const Instability eps = instability_from_sums(sums, losses, grid, candidate, bound);
    double total = 0.0;
    for (double e : eps.per_sample) total += e;
    const std::size_t index = lambda_plus_index(adjusted_trace(sums, losses.size(), bound), candidate);
    out.alpha_hat = candidate;
    out.chosen = grid[index];
    if (leq_with_ties(candidate + lipschitz / n1 * total, alpha)) {
      out.found = true;
      return out;
    }
  }
  out.found = false;
  return out;
}

LttResult ltt_hoeffding(std::span<const LossCurve> losses, const Grid& grid, double alpha, double bound,
                        double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("ltt_hoeffding: delta outside (0, 1)");
  validate(losses, grid, alpha, bound);
  const auto sums = column_sums(losses);
  const double n = static_cast<double>(losses.size());

  LttResult out;
  out.chosen_index = grid.size() - 1;
  out.chosen = grid.back();
  for (std::size_t k = grid.size(); k-- > 0;) {
    const double mean_risk = sums[k] / n;
    const double gap = std::max(alpha - mean_risk, 0.0) / bound;
    const double p_value = std::exp(-2.0 * n * gap * gap);
    if (!(p_value <= delta)) break;
    out.accepted.push_back(grid[k]);
    out.chosen_index = k;
    out.chosen = grid[k];
  }
  return out;
}

}  // namespace cpc
