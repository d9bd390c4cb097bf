#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cpc/active_learning.hpp"
#include "cpc/environments.hpp"
#include "cpc/fdr_experiment.hpp"
#include "cpc/gaussian_env.hpp"
#include "cpc/linalg.hpp"
#include "cpc/sequence_env.hpp"
#include "doctest.h"

using namespace cpc;

namespace {

std::shared_ptr<const DiscretePolicy> cat(std::vector<double> p) {
  return std::make_shared<const DiscretePolicy>(make_categorical(std::move(p)));
}

}  // namespace

TEST_CASE("tilting a finite policy") {
  const auto p = cat({0.5, 0.3, 0.2});
  auto reward = [](const Point& x) { return x[0]; };
  const auto same = improve_by_tilting(*p, reward, 0.0).probs();
  for (std::size_t k = 0; k < 3; ++k) CHECK(same[k] == doctest::Approx(p->probs()[k]));
  // temperature 1: weights 0.5, 0.3 e, 0.2 e^2
  const double z = 0.5 + 0.3 * std::exp(1.0) + 0.2 * std::exp(2.0);
  const auto t = improve_by_tilting(*p, reward, 1.0).probs();
  CHECK(t[0] == doctest::Approx(0.5 / z));
  CHECK(t[1] == doctest::Approx(0.3 * std::exp(1.0) / z));
  CHECK(t[2] == doctest::Approx(0.2 * std::exp(2.0) / z));
  const auto hot = improve_by_tilting(*p, reward, 50.0).probs();
  CHECK(hot[2] > 0.999);
  CHECK_THROWS(improve_by_tilting(*p, reward, -1.0));
}

TEST_CASE("tilting a markov policy row by row") {
  std::vector<double> trans{0.5, 0.5, 0.25, 0.75};
  const MarkovSequencePolicy m(2, 3, {0.5, 0.5}, trans);
  const std::vector<double> step{0.0, 1.0, 0.0, 0.0};
  const auto t = improve_by_tilting(m, step, std::log(3.0));
  CHECK(t.transition(0, 1) == doctest::Approx(0.75));  // 0.5*3 / (0.5 + 1.5)
  CHECK(t.transition(1, 1) == doctest::Approx(0.75));
  CHECK(t.initial(0) == 0.5);
}

TEST_CASE("constrained deployment draws from the clipped law") {
  const auto safe = cat({0.3, 0.25, 0.2, 0.15, 0.1});
  const auto opt = cat({0.05, 0.1, 0.15, 0.3, 0.4});
  for (double beta : {0.5, 2.0}) {
    Rng rng = make_rng(1);
    const auto b = deploy_constrained(*opt, *safe, std::log(beta), 50000, kNoLimit, rng);
    CHECK(b.kind == (beta < 1.0 ? ProposalKind::safe : ProposalKind::optimized));
    std::vector<double> f(5, 0.0);
    for (const auto& x : b.accepted) f[static_cast<std::size_t>(x[0])] += 1.0 / 50000.0;
    CHECK(total_variation(f, normalize_exact(*opt, *safe, beta).policy->probs()) < 0.02);
  }
}

TEST_CASE("first principal component") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, 2, 2, -1, -1, -3, -3;
  const auto pc = pca_first_component(x);
  CHECK(pc.direction[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(pc.direction[1] == doctest::Approx(1.0 / std::sqrt(2.0)));

  Rng rng = make_rng(3);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd m(5, 3);
    for (Eigen::Index i = 0; i < 5; ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) m(i, j) = uniform01(rng) * (1.0 + static_cast<double>(j));
    }
    const auto got = pca_first_component(m);
    CHECK(got.direction.norm() == doctest::Approx(1.0));
    const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.transpose() * c);
    Eigen::VectorXd v = es.eigenvectors().col(2);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    CHECK((got.direction - v).norm() < 1e-8);
  }
  CHECK_THROWS(pca_first_component(Eigen::MatrixXd::Ones(4, 2)));
  CHECK_THROWS(pca_first_component(Eigen::MatrixXd::Ones(1, 2)));
}

TEST_CASE("feasibility model") {
  CHECK(logistic_location(0.2) == doctest::Approx(0.5));
  CHECK(logistic_location(0.9) == 0.98);
  Rng rng = make_rng(4);
  const auto data = synthetic_tabular(2, 200);
  const auto m = build_feasibility(data.x, 0.2, 1.0, rng);
  CHECK(m.mu == doctest::Approx(0.5));
  CHECK(m.probability.maxCoeff() == doctest::Approx(1.0 / (1.0 + std::exp(-(1.0 - 0.5) / 0.1))));
  // probabilities follow the projection order
  for (Eigen::Index i = 0; i < m.projections.size(); ++i) {
    for (Eigen::Index j = 0; j < m.projections.size(); ++j) {
      if (m.projections[i] < m.projections[j]) CHECK(m.probability[i] <= m.probability[j]);
    }
  }
  CHECK(m.probability.minCoeff() >= 0.0);
  CHECK(m.probability.maxCoeff() <= 1.0);
  CHECK_THROWS(build_feasibility(Eigen::MatrixXd::Ones(1, 3), 0.2, 1.0, rng));
}

TEST_CASE("gaussian process: one training point by hand") {
  Eigen::MatrixXd x(1, 1);
  x << 2.0;
  Eigen::VectorXd y(1);
  y << 3.0;
  const GaussianProcess gp(x, y, 1.0, 0.5);
  Eigen::MatrixXd q(1, 1);
  q << 1.0;
  // k(x,x) = 1 + 4, plus noise 0.5; k(q,x) = 1 + 2; k(q,q) = 1 + 1
  const double kxx = 5.5, kqx = 3.0, kqq = 2.0;
  CHECK(gp.predict_mean(q)[0] == doctest::Approx(kqx / kxx * 3.0));
  CHECK(gp.posterior_variance(q)[0] == doctest::Approx(kqq - kqx * kqx / kxx));
  CHECK(gp.prior_variance(q)[0] == doctest::Approx(kqq));
}

TEST_CASE("gaussian process: variance shrinks at training points and never exceeds the prior") {
  Rng rng = make_rng(5);
  Eigen::MatrixXd x(10, 2);
  Eigen::VectorXd y(10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    x(i, 0) = uniform01(rng);
    x(i, 1) = uniform01(rng);
    y[i] = x(i, 0) - x(i, 1);
  }
  const GaussianProcess tight(x, y, 1.0, 1e-8);
  CHECK(tight.posterior_variance(x).maxCoeff() < 1e-6);
  const GaussianProcess gp(x, y, 1.0, 0.3);
  Eigen::MatrixXd q = Eigen::MatrixXd::Random(30, 2);
  const auto post = gp.posterior_variance(q);
  const auto prior = gp.prior_variance(q);
  for (Eigen::Index i = 0; i < 30; ++i) CHECK(post[i] <= prior[i] + 1e-12);
  CHECK_THROWS(GaussianProcess(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), 1.0, 1.0));
}

TEST_CASE("gaussian process: held-out error falls with training size") {
  std::vector<double> mse;
  for (Eigen::Index n : {5, 10, 20, 50}) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng = make_rng(seed, 77);
      std::normal_distribution<double> noise(0.0, 0.3);
      auto draw = [&](Eigen::Index rows, Eigen::MatrixXd& xs, Eigen::VectorXd& ys) {
        xs.resize(rows, 3);
        ys.resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
          for (Eigen::Index j = 0; j < 3; ++j) xs(i, j) = noise(rng) / 0.3;
          ys[i] = 1.0 + 2.0 * xs(i, 0) - xs(i, 1) + 0.5 * xs(i, 2) + noise(rng);
        }
      };
      Eigen::MatrixXd xt, xq;
      Eigen::VectorXd yt, yq;
      draw(n, xt, yt);
      draw(200, xq, yq);
      const GaussianProcess gp(xt, yt, 1.0, 0.09);
      acc += (gp.predict_mean(xq) - yq).squaredNorm() / 200.0;
    }
    mse.push_back(acc / 20.0);
  }
  for (std::size_t k = 1; k < mse.size(); ++k) CHECK(mse[k] < mse[k - 1]);
}

TEST_CASE("gaussian environment") {
  const DiagonalGaussian g({0.0}, {2.0});
  const auto t = tilt_gaussian(g, 0.5);
  CHECK(t.mean()[0] == doctest::Approx(2.0));
  CHECK(t.sd()[0] == 2.0);

  const DiagonalGaussian opt({1.5}, {1.0});
  CHECK(gaussian_clipped_expected_loss(opt, kInf, 1.0) == doctest::Approx(0.5 * std::erfc(-0.5 / std::sqrt(2.0))).epsilon(1e-6));
  CHECK(gaussian_clipped_expected_loss(opt, std::log(1e-12), 1.0) ==
        doctest::Approx(0.5 * std::erfc(1.0 / std::sqrt(2.0))).epsilon(1e-4));

  GaussianEnvConfig cfg;
  Rng rng = make_rng(6);
  CHECK(std::isinf(gaussian_cpc_round(1.0, cfg, rng).calibration.beta_hat));

  // realized loss agrees with the quadrature value of the deployed policy
  cfg.n_deploy = 20;
  std::vector<double> diff;
  for (std::size_t r = 0; r < 400; ++r) {
    Rng rr = make_rng(9, r);
    const auto round = gaussian_cpc_round(0.3, cfg, rr);
    const double exact =
        gaussian_clipped_expected_loss(round.optimized, round.calibration.log_beta_hat(), cfg.threshold, 12.0, 20001);
    diff.push_back(round.log.mean_loss() - exact);
  }
  CHECK(std::abs(mean_of(diff)) <= 3.0 * standard_error_of(diff));
}

TEST_CASE("sequence environment") {
  SequenceEnvConfig ec;
  ec.vocab = 5;
  ec.length = 4;
  ec.n_banned = 5;
  ec.n_motifs = 4;
  ec.banned_motifs = 1;
  const auto env = make_sequence_env(3, ec);
  const auto chain = feasibility_chain(env);
  Rng rng = make_rng(1);
  for (int i = 0; i < 200; ++i) CHECK(env.feasible(chain.sample(rng)));

  SequenceOptConfig oc;
  const auto safe = fit_safe_policy(env, oc, 3);
  double brute = 0.0;
  const auto support = safe.support();
  REQUIRE(support.has_value());
  for (const auto& x : *support) brute += std::exp(safe.log_density(x)) * env.loss(x);
  CHECK(markov_infeasibility(safe, env) == doctest::Approx(brute).epsilon(1e-12));
  CHECK(markov_infeasibility(chain, env) == doctest::Approx(0.0));

  // motif reward and step reward agree on bigram bookkeeping
  const auto step = env.step_reward();
  for (std::size_t m = 0; m < env.motifs.size(); ++m) {
    const auto [a, b] = env.motifs[m];
    CHECK(step[static_cast<std::size_t>(a * env.vocab + b)] > 0.0);
  }
}

TEST_CASE("sequence optimization: reproducible, and unconstrained at alpha = 1") {
  const auto env = make_sequence_env(4);
  SequenceOptConfig oc;
  oc.rounds = 3;
  oc.n_per_round = 32;
  const auto safe = fit_safe_policy(env, oc, 4);
  const auto a = sequence_opt_run(env, safe, 0.3, oc, 11);
  const auto b = sequence_opt_run(env, safe, 0.3, oc, 11);
  REQUIRE(a.logs.size() == b.logs.size());
  for (std::size_t r = 0; r < a.logs.size(); ++r) CHECK(to_json(a.logs[r]).dump() == to_json(b.logs[r]).dump());
  for (const auto& log : a.logs) {
    for (const auto& act : log.actions) CHECK((act.loss == 0.0 || act.loss == 1.0));
  }
  const auto free = sequence_opt_run(env, safe, 1.0, oc, 11);
  for (const auto& s : free.rounds) {
    if (s.round > 0) CHECK(std::isinf(s.beta_hat));
  }
}

TEST_CASE("active learning: alpha = 1 deploys the acquisition policy unchanged") {
  ActiveLearningConfig c;
  c.alpha = 1.0;
  c.iterations = 3;
  c.n_prop = 50;
  c.n_safe_probes = 50;
  const auto data = synthetic_tabular(1, 150);
  const auto r = active_learning_run(data, c, 1);
  REQUIRE(r.controlled.beta_hat.size() == 3);
  for (double b : r.controlled.beta_hat) CHECK(std::isinf(b));
  CHECK(r.controlled.test_mse.size() == 4);
  CHECK(r.controlled.safe_infeasibility >= 0.0);
  CHECK(r.controlled.safe_infeasibility <= 1.0);
  const auto again = active_learning_run(data, c, 1);
  CHECK(again.controlled.test_mse == r.controlled.test_mse);
}

TEST_CASE("tabular csv ingestion") {
  const auto dir = std::filesystem::temp_directory_path() / "cpc_tabular_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "ok.csv");
    out << "a,b,y\n1,2,3\n4,5,6\n\n7,8,9\n";
    std::ofstream bad(dir / "bad.csv");
    bad << "a,y\n1,2\nx,3\n";
  }
  const auto d = load_tabular_csv(dir / "ok.csv");
  CHECK(d.x.rows() == 3);
  CHECK(d.x.cols() == 2);
  CHECK(d.y[2] == 9.0);
  CHECK_THROWS_WITH(load_tabular_csv(dir / "bad.csv"), doctest::Contains(":3"));
  CHECK_THROWS(load_tabular_csv(dir / "missing.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("fdr experiment on all-true claims") {
  std::vector<ClaimRecord> data;
  Rng rng = make_rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s(4);
    for (auto& v : s) v = uniform01(rng);
    data.emplace_back(s, std::vector<int>(4, 1));
  }
  FdrConfig cfg;
  cfg.trials = 5;
  cfg.alphas = default_fdr_alphas();
  const auto rows = fdr_experiment(data, cfg);
  double prev = -1.0;
  for (const auto& r : rows) {
    CHECK(r.mean_fdr == 0.0);
    if (r.method == FdrMethod::gcrc) {
      CHECK(r.mean_recall >= prev - 1e-12);
      prev = r.mean_recall;
    }
  }
  CHECK_THROWS(fdr_experiment(std::vector<ClaimRecord>(1, ClaimRecord({0.5}, {1})), cfg));
}

TEST_CASE("threshold grid and synthetic claims") {
  const auto a = synthetic_claims(5);
  const auto b = synthetic_claims(5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].scores() == b[i].scores());
  const auto grid = threshold_grid(a, 50);
  CHECK(grid.back() > 1.0);
  CHECK(grid.size() <= 51);
  const auto csv = fdr_csv({FdrRow{}});
  CHECK(csv.rfind("alpha,method,mean_fdr,se_fdr,mean_recall,se_recall\n", 0) == 0);
}
