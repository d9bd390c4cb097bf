#include "cpc/gcrc_experiment.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "cpc/kernels.hpp"
#include "cpc/risk_control.hpp"

namespace cpc {

const char* to_string(CurveFamily family) {
  return family == CurveFamily::smooth ? "smooth" : "adversarial";
}

namespace {

struct TrialOutcome {
  std::vector<double> crc_loss;
  std::vector<double> gcrc_loss;
  std::vector<double> epsilon;
  double lipschitz = 0.0;
};

}  // namespace

std::vector<GcrcRow> gcrc_synthetic_experiment(const GcrcSyntheticConfig& cfg) {
  std::vector<double> alphas = cfg.alphas;
  if (alphas.empty()) {
    for (int k = 1; k <= 10; ++k) alphas.push_back(0.05 * k);
  }
  if (cfg.n_cal < 2) throw std::invalid_argument("gcrc_synthetic_experiment: need n_cal >= 2");
  if (cfg.trials < 1) throw std::invalid_argument("gcrc_synthetic_experiment: need trials >= 1");
  if (cfg.grid_points < 3) throw std::invalid_argument("gcrc_synthetic_experiment: need at least 3 grid points");
  const Grid grid = linspace_grid(0.0, 1.0, cfg.grid_points);

  const auto outcomes = parallel_map<TrialOutcome>(cfg.trials, [&](std::size_t t) {
    Rng rng = make_rng(cfg.seed, t);
    std::vector<LossCurve> curves;
    curves.reserve(cfg.n_cal + 1);
    for (std::size_t i = 0; i <= cfg.n_cal; ++i) {
      curves.push_back(cfg.family == CurveFamily::smooth
                           ? synthetic_nonmonotonic_curve(rng, grid, cfg.bound)
                           : adversarial_discrete_curve(rng, grid, cfg.adversarial_rate, cfg.bound));
    }
    const std::span<const LossCurve> cal(curves.data(), cfg.n_cal);
    const LossCurve& test = curves.back();
    TrialOutcome o;
    o.lipschitz = grid_lipschitz(curves, grid);
    for (double a : alphas) {
      o.crc_loss.push_back(test[crc_lambda(cal, grid, a, cfg.bound).chosen_index]);
      o.gcrc_loss.push_back(test[gcrc_lambda_plus(cal, grid, a, cfg.bound).chosen_index]);
      o.epsilon.push_back(replace_one_instability(cal, grid, a, cfg.bound).mean);
    }
    return o;
  });

  double lipschitz = 0.0;
  for (const auto& o : outcomes) lipschitz = std::max(lipschitz, o.lipschitz);
  std::vector<GcrcRow> rows;
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    RunningStats crc;
    RunningStats gcrc;
    RunningStats eps;
    for (const auto& o : outcomes) {
      crc.add(o.crc_loss[j]);
      gcrc.add(o.gcrc_loss[j]);
      eps.add(o.epsilon[j]);
    }
    rows.push_back({alphas[j], "crc", crc.mean(), crc.standard_error(), 0.0, lipschitz});
    rows.push_back({alphas[j], "gcrc", gcrc.mean(), gcrc.standard_error(), eps.mean(), lipschitz});
  }
  return rows;
}

std::string gcrc_csv(const std::vector<GcrcRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "alpha,method,mean_test_loss,se_test_loss,mean_epsilon,lipschitz,slack_limit\n";
  for (const auto& r : rows) {
    out << r.alpha << ',' << r.method << ',' << r.mean_test_loss << ',' << r.se_test_loss << ',' << r.mean_epsilon
        << ',' << r.lipschitz << ',' << r.slack_limit() << '\n';
  }
  return out.str();
}

CounterexampleSummary counterexample_summary(double alpha) {
  const CounterexampleFamily fam = counterexample_losses(alpha);
  CounterexampleSummary s;
  s.alpha = alpha;
  s.bound = fam.bound;
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<LossCurve> rest;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != i) rest.push_back(fam.curves[j]);
    }
    const auto report = gcrc_lambda_plus(rest, fam.grid, alpha, fam.bound);
    s.chosen[i] = report.chosen;
    s.held_out_loss[i] = fam.curves[i][report.chosen_index];
    total += s.held_out_loss[i];
  }
  s.bag_risk = total / 3.0;
  return s;
}

}  // namespace cpc
