#include "cpc/active_learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cpc {

TabularDataset synthetic_tabular(std::uint64_t seed, std::size_t records, int dims) {
  if (dims < 2) throw std::invalid_argument("synthetic_tabular: need at least 2 dimensions");
  Rng rng = make_rng(seed, 0x7ab);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dims);
  Eigen::VectorXd u(d);
  for (Eigen::Index j = 0; j < d; ++j) u[j] = 1.0 + 0.25 * static_cast<double>(j);
  u.normalize();
  // Off-axis reference direction for the nonlinear part of the target.
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v[0] = 1.0;
  v -= v.dot(u) * u;
  v.normalize();

  TabularDataset out{Eigen::MatrixXd(static_cast<Eigen::Index>(records), d),
                     Eigen::VectorXd(static_cast<Eigen::Index>(records))};
  for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
    const double t = normal(rng);
    const double spread = 0.15 + 1.2 / (1.0 + std::exp(2.5 * t));
    Eigen::VectorXd e(d);
    for (Eigen::Index j = 0; j < d; ++j) e[j] = normal(rng);
    e -= e.dot(u) * u;
    const Eigen::VectorXd xi = 2.0 * t * u + spread * e;
    out.x.row(i) = xi.transpose();
    out.y[i] = t + 0.5 * std::sin(2.0 * xi.dot(v)) + 0.1 * normal(rng);
  }
  return out;
}

TabularDataset load_tabular_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
      }
    }
    if (width == 0) width = row.size();
    if (row.size() != width || width < 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw std::runtime_error(path.string() + ": need at least 2 records");
  TabularDataset out{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1)),
                     Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < width; ++j) out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    out.y[static_cast<Eigen::Index>(i)] = rows[i].back();
  }
  return out;
}

double logistic_location(double alpha) { return std::min(2.5 * alpha, 0.98); }

FeasibilityModel build_feasibility(const Eigen::MatrixXd& covariates, double alpha, double gamma, Rng& rng,
                                   double scale) {
  if (covariates.rows() < 2) throw std::invalid_argument("build_feasibility: need at least 2 records");
  if (!(gamma > 0.0)) throw std::invalid_argument("build_feasibility: gamma must be positive");
  if (!(scale > 0.0)) throw std::invalid_argument("build_feasibility: logistic scale must be positive");
  const PrincipalComponent pc = pca_first_component(covariates);
  FeasibilityModel m;
  m.direction = pc.direction;
  m.projections = pc.projections;
  m.mu = logistic_location(alpha);
  m.scale = scale;
  const auto n = covariates.rows();
  const double lo = pc.projections.minCoeff();
  const double range = pc.projections.maxCoeff() - lo;
  m.normalized = range > 0.0 ? Eigen::VectorXd((pc.projections.array() - lo) / range) : Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd tilted = (gamma * m.normalized.array()).exp();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return tilted[a] < tilted[b]; });
  m.probability.resize(n);
  m.feasible.resize(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double rel = static_cast<double>(r + 1) / static_cast<double>(n);
    m.probability[order[r]] = 1.0 / (1.0 + std::exp(-(rel - m.mu) / m.scale));
  }
  for (Eigen::Index i = 0; i < n; ++i) m.feasible[static_cast<std::size_t>(i)] = uniform01(rng) < m.probability[i] ? 1 : 0;
  return m;
}

double ActiveLearningTrace::violation_rate() const {
  RunningStats s;
  for (double v : violations) s.add(v);
  return s.mean();
}

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

struct Observation {
  std::size_t record;  // index into the dataset
  double y;            // noisy label
  double loss;         // 1 - F
};

struct LoopState {
  std::vector<Observation> train;
  std::vector<Observation> cal;
  std::vector<std::size_t> cal_source;  // index into `sources` of the policy that produced each cal point
};

GaussianProcess fit_gp(const TabularDataset& data, const std::vector<Observation>& train, const ActiveLearningConfig& c) {
  std::vector<std::size_t> idx;
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    idx.push_back(train[i].record);
    y[static_cast<Eigen::Index>(i)] = train[i].y;
  }
  return GaussianProcess(rows_of(data.x, idx), y, c.signal_variance, c.noise_variance);
}

double test_mse(const GaussianProcess& gp, const TabularDataset& data, const std::vector<std::size_t>& test) {
  const Eigen::VectorXd pred = gp.predict_mean(rows_of(data.x, test));
  double acc = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double e = pred[static_cast<Eigen::Index>(i)] - data.y[static_cast<Eigen::Index>(test[i])];
    acc += e * e;
  }
  return acc / static_cast<double>(test.size());
}

ActiveLearningTrace run_loop(const TabularDataset& data, const FeasibilityModel& feas,
                             const std::vector<std::size_t>& pool, const std::vector<std::size_t>& test,
                             const std::shared_ptr<const DiscretePolicy>& source, LoopState state,
                             const ActiveLearningConfig& c, bool controlled, Rng& rng) {
  std::normal_distribution<double> noise(0.0, c.observation_noise);
  const Eigen::MatrixXd pool_x = rows_of(data.x, pool);
  // Policies that produced calibration points; entry 0 is the source.
  std::vector<PolicyPtr> sources{source};

  ActiveLearningTrace trace;
  GaussianProcess gp = fit_gp(data, state.train, c);
  trace.test_mse.push_back(test_mse(gp, data, test));
  for (int it = 0; it < c.iterations; ++it) {
    const Eigen::VectorXd var = gp.posterior_variance(pool_x);
    auto opt = std::make_shared<const DiscretePolicy>(
        tilted_acquisition(std::span<const double>(var.data(), static_cast<std::size_t>(var.size())), c.temperature));

    PolicyPtr deployed = opt;
    if (controlled) {
      std::vector<double> counts(sources.size(), 0.0);
      for (std::size_t s : state.cal_source) counts[s] += 1.0;
      std::vector<PolicyPtr> comps;
      std::vector<double> weights;
      for (std::size_t s = 0; s < sources.size(); ++s) {
        if (counts[s] == 0.0) continue;
        comps.push_back(sources[s]);
        weights.push_back(counts[s] / static_cast<double>(state.cal.size()));
      }
      const MixturePolicy mix(comps, weights);
      CalibrationData cd;
      for (const auto& o : state.cal) {
        const auto pos = static_cast<double>(std::lower_bound(pool.begin(), pool.end(), o.record) - pool.begin());
        cd.cal.push_back(cache_densities(*opt, *source, mix, {pos}));
        cd.losses.push_back(o.loss);
      }
      for (std::size_t i = 0; i < c.n_prop; ++i) cd.prop.push_back(cache_densities(*opt, *source, mix, opt->sample(rng)));
      for (std::size_t i = 0; i < c.n_safe_probes; ++i) {
        cd.safe_probes.push_back(cache_densities(*opt, *source, mix, source->sample(rng)));
      }
      const BetaCalibration cal = calibrate_beta(cd, c.alpha, 1.0, c.beta);
      trace.beta_hat.push_back(cal.beta_hat);
      deployed = normalize_exact(*opt, *source, cal.beta_hat).policy;
    } else {
      trace.beta_hat.push_back(kInf);
    }
    const auto choice = static_cast<std::size_t>(deployed->sample(rng)[0]);

    const std::size_t record = pool[choice];
    const Observation obs{record, data.y[static_cast<Eigen::Index>(record)] + noise(rng),
                          1.0 - static_cast<double>(feas.feasible[record])};
    trace.violations.push_back(obs.loss);
    if (uniform01(rng) < c.new_point_train_probability) {
      state.train.push_back(obs);
      gp = fit_gp(data, state.train, c);
    } else {
      state.cal.push_back(obs);
      sources.push_back(deployed);
      state.cal_source.push_back(sources.size() - 1);
    }
    trace.test_mse.push_back(test_mse(gp, data, test));
  }
  return trace;
}

}  // namespace

ActiveLearningResult active_learning_run(const TabularDataset& data, const ActiveLearningConfig& c, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(data.x.rows());
  if (n < 10) throw std::invalid_argument("active_learning_run: dataset too small");
  Rng rng = make_rng(seed, 0xa1);
  const FeasibilityModel feas = build_feasibility(data.x, c.alpha, c.sampling_bias, rng);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::round(c.test_fraction * static_cast<double>(n)));
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> pool(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(pool.begin(), pool.end());
  if (pool.empty()) throw std::invalid_argument("active_learning_run: empty pool");

  // Source policy: the same exponential tilt toward high PC1 used by the feasibility model.
  std::vector<Point> pts(pool.size());
  std::vector<double> logw(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    pts[i] = {static_cast<double>(i)};
    logw[i] = c.sampling_bias * feas.normalized[static_cast<Eigen::Index>(pool[i])];
  }
  auto source = std::make_shared<const DiscretePolicy>(DiscretePolicy::from_log_weights(pts, logw));

  std::normal_distribution<double> noise(0.0, c.observation_noise);
  LoopState init;
  const auto n_train = static_cast<std::size_t>(std::round(c.initial_train_fraction * static_cast<double>(c.n_initial)));
  for (std::size_t i = 0; i < c.n_initial; ++i) {
    const std::size_t record = pool[source->sample_index(rng)];
    Observation o{record, data.y[static_cast<Eigen::Index>(record)] + noise(rng),
                  1.0 - static_cast<double>(feas.feasible[record])};
    if (i < n_train) {
      init.train.push_back(o);
    } else {
      init.cal.push_back(o);
      init.cal_source.push_back(0);
    }
  }
  if (init.train.empty()) throw std::invalid_argument("active_learning_run: empty initial training set");

  ActiveLearningResult out;
  double safe_rate = 0.0;
  const auto probs = source->probs();
  for (std::size_t i = 0; i < pool.size(); ++i) safe_rate += probs[i] * (1.0 - feas.feasible[pool[i]]);

  Rng rng_c = make_rng(seed, 0xa2);
  Rng rng_u = make_rng(seed, 0xa3);
  out.controlled = run_loop(data, feas, pool, test, source, init, c, true, rng_c);
  out.uncontrolled = run_loop(data, feas, pool, test, source, init, c, false, rng_u);
  out.controlled.safe_infeasibility = safe_rate;
  out.uncontrolled.safe_infeasibility = safe_rate;
  return out;
}

}  // namespace cpc
