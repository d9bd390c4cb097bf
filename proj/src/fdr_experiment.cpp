#include "cpc/fdr_experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cpc/kernels.hpp"
#include "cpc/risk_control.hpp"

namespace cpc {

std::vector<ClaimRecord> synthetic_claims(std::uint64_t seed, const SyntheticClaimsConfig& cfg) {
  Rng rng = make_rng(seed, 0xc1a1);
  std::uniform_int_distribution<std::size_t> count(1, std::max<std::size_t>(1, cfg.max_claims));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ClaimRecord> out;
  out.reserve(cfg.records);
  for (std::size_t r = 0; r < cfg.records; ++r) {
    const std::size_t k = count(rng);
    std::vector<double> scores(k);
    std::vector<int> labels(k);
    for (std::size_t j = 0; j < k; ++j) {
      labels[j] = uniform01(rng) < cfg.p_true ? 1 : 0;
      const bool high = labels[j] == 1 || uniform01(rng) < cfg.confident_false;
      const double z = normal(rng);
      const double s = high ? cfg.true_mean + cfg.true_sd * z : cfg.false_mean + cfg.false_sd * z;
      scores[j] = std::clamp(s, 0.0, 1.0);
    }
    out.emplace_back(std::move(scores), std::move(labels));
  }
  return out;
}

const char* to_string(FdrMethod method) {
  switch (method) {
    case FdrMethod::gcrc: return "gcrc";
    case FdrMethod::monotonized_crc: return "monotonized_crc";
    case FdrMethod::ltt: return "ltt";
  }
  return "unknown";
}

std::vector<double> default_fdr_alphas() {
  std::vector<double> a;
  for (int k = 1; k <= 20; ++k) a.push_back(0.005 * k);
  return a;
}

Grid threshold_grid(const std::vector<ClaimRecord>& records, std::size_t points) {
  std::vector<double> scores;
  for (const auto& r : records) scores.insert(scores.end(), r.scores().begin(), r.scores().end());
  std::vector<double> taus;
  if (!scores.empty() && points > 0) {
    std::sort(scores.begin(), scores.end());
    for (std::size_t k = 0; k < points; ++k) {
      const double q = points == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(points - 1);
      taus.push_back(scores[static_cast<std::size_t>(std::llround(q * static_cast<double>(scores.size() - 1)))]);
    }
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  }
  const double terminal = std::nextafter(1.0, 2.0);
  if (!taus.empty() && taus.back() >= terminal) taus.pop_back();
  taus.push_back(terminal);
  return Grid(std::move(taus), SafeEnd::high);
}

namespace {

struct TrialResult {
  // [alpha][method] -> (fdr, recall)
  std::vector<std::vector<std::pair<double, double>>> cells;
};

TrialResult run_trial(const std::vector<ClaimRecord>& dataset, const FdrConfig& cfg, std::size_t trial) {
  Rng rng = make_rng(cfg.seed, trial);
  std::vector<ClaimRecord> jittered;
  jittered.reserve(dataset.size());
  for (const auto& r : dataset) jittered.push_back(jitter_scores(r, rng, cfg.jitter));
  std::vector<std::size_t> order(jittered.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_cal = static_cast<std::size_t>(std::floor(cfg.calibration_fraction * static_cast<double>(order.size())));
  std::vector<ClaimRecord> cal;
  std::vector<ClaimRecord> test;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_cal ? cal : test).push_back(jittered[order[i]]);

  const Grid grid = threshold_grid(cal, cfg.grid_points);
  const auto curves = claim_loss_curves_reference(cal, grid, ClaimLoss::fdr);
  std::vector<LossCurve> mono;
  mono.reserve(curves.size());
  for (const auto& c : curves) mono.push_back(monotonize(c));

  TrialResult res;
  for (double alpha : cfg.alphas) {
    std::vector<std::pair<double, double>> row;
    for (FdrMethod m : cfg.methods) {
      double tau = grid.back();
      switch (m) {
        case FdrMethod::gcrc: tau = gcrc_lambda_plus(curves, grid, alpha, 1.0).chosen; break;
        case FdrMethod::monotonized_crc: tau = crc_lambda(mono, grid, alpha, 1.0).chosen; break;
        case FdrMethod::ltt: tau = ltt_hoeffding(curves, grid, alpha, 1.0, cfg.ltt_delta).chosen; break;
      }
      RunningStats f;
      RunningStats r;
      for (const auto& rec : test) {
        f.add(fdr_loss(rec, tau));
        r.add(recall(rec, tau));
      }
      row.emplace_back(f.mean(), r.mean());
    }
    res.cells.push_back(std::move(row));
  }
  return res;
}

}  // namespace

std::vector<FdrRow> fdr_experiment(const std::vector<ClaimRecord>& dataset, const FdrConfig& cfg) {
  if (dataset.size() < 2) throw std::invalid_argument("fdr_experiment: need at least 2 records");
  if (cfg.trials < 1) throw std::invalid_argument("fdr_experiment: trials must be >= 1");
  if (!(cfg.calibration_fraction > 0.0 && cfg.calibration_fraction < 1.0)) {
    throw std::invalid_argument("fdr_experiment: calibration fraction must lie in (0, 1)");
  }
  const auto n_cal = static_cast<std::size_t>(std::floor(cfg.calibration_fraction * static_cast<double>(dataset.size())));
  if (n_cal == 0 || n_cal == dataset.size()) throw std::invalid_argument("fdr_experiment: degenerate split");
  if (cfg.alphas.empty()) throw std::invalid_argument("fdr_experiment: empty alpha list");

  const auto trials = parallel_map<TrialResult>(cfg.trials, [&](std::size_t t) { return run_trial(dataset, cfg, t); });
  std::vector<FdrRow> rows;
  for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      RunningStats f;
      RunningStats r;
      for (const auto& t : trials) {
        f.add(t.cells[a][m].first);
        r.add(t.cells[a][m].second);
      }
      rows.push_back({cfg.alphas[a], cfg.methods[m], f.mean(), f.standard_error(), r.mean(), r.standard_error()});
    }
  }
  return rows;
}

std::string fdr_csv(const std::vector<FdrRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "alpha,method,mean_fdr,se_fdr,mean_recall,se_recall\n";
  for (const auto& r : rows) {
    out << r.alpha << ',' << to_string(r.method) << ',' << r.mean_fdr << ',' << r.se_fdr << ',' << r.mean_recall << ','
        << r.se_recall << '\n';
  }
  return out.str();
}

}  // namespace cpc
