// Command-line front end. Every subcommand writes manifest.json plus its
// results under the output directory and runs a set of self-checks; a failed
// check produces failures.json and a nonzero exit code.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpc/active_learning.hpp"
#include "cpc/claims_io.hpp"
#include "cpc/cpc_calibration.hpp"
#include "cpc/fdr_experiment.hpp"
#include "cpc/gaussian_env.hpp"
#include "cpc/gcrc_experiment.hpp"
#include "cpc/kernels.hpp"
#include "cpc/policy_io.hpp"
#include "cpc/run_config.hpp"
#include "cpc/samplers.hpp"
#include "cpc/sequence_env.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CheckLog {
  json entries = json::array();
  bool ok = true;

  void check(const std::string& name, bool passed, const std::string& detail = {}) {
    entries.push_back({{"check", name}, {"passed", passed}, {"detail", detail}});
    if (!passed) ok = false;
  }
  void skip(const std::string& name, const std::string& reason) {
    entries.push_back({{"check", name}, {"passed", nullptr}, {"detail", "skipped: " + reason}});
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

struct GlobalFlags {
  std::optional<double> alpha;
  std::optional<double> bound;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::vector<double> alphas;
};

/// Config file first, then flags on top.
cpc::RunConfig resolve_config(const GlobalFlags& f, const std::string& command, bool& trials_set) {
  cpc::RunConfig c;
  trials_set = false;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw std::runtime_error("cannot open config " + *f.config);
    const json j = json::parse(in);
    c = cpc::load_run_config(*f.config);
    trials_set = j.contains("trials");
  }
  c.experiment = command;
  if (f.alpha) c.alpha = *f.alpha;
  if (!f.alphas.empty()) c.alphas = f.alphas;
  if (f.bound) c.bound = *f.bound;
  if (f.trials) {
    c.trials = *f.trials;
    trials_set = true;
  }
  if (f.seed) c.seed = *f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.out) c.out_dir = *f.out;
  if (c.out_dir.empty()) c.out_dir = cpc::default_output_root() / command;
  cpc::validate(c);
  return c;
}

/// Reads config.env[key] when present, else the fallback. Keys outside
/// `allowed` are rejected up front by check_env_keys.
template <typename T>
T env_or(const cpc::RunConfig& c, const char* key, T fallback) {
  return c.env.contains(key) ? c.env[key].get<T>() : fallback;
}

void check_env_keys(const cpc::RunConfig& c, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : c.env.items()) {
    if (!allowed.count(key)) throw std::invalid_argument("config: unknown env key \"" + key + "\" for " + c.experiment);
  }
}

cpc::BetaConfig beta_config(const cpc::RunConfig& c) {
  cpc::BetaConfig b;
  b.beta_min = c.beta_min;
  b.safety_factor = c.safety_factor;
  return b;
}

std::size_t trials_or(const cpc::RunConfig& c, bool trials_set, std::size_t fallback) {
  return trials_set ? c.trials : fallback;
}

// ---- gcrc-synthetic -------------------------------------------------------

void run_gcrc_synthetic(const cpc::RunConfig& c, bool trials_set, json& results, CheckLog& checks) {
  check_env_keys(c, {"n_cal", "grid_points", "adversarial_rate", "family"});
  const std::string family = env_or<std::string>(c, "family", "both");
  if (family != "smooth" && family != "adversarial" && family != "both") {
    throw std::invalid_argument("env.family must be smooth, adversarial or both");
  }
  std::string csv;
  for (auto fam : {cpc::CurveFamily::smooth, cpc::CurveFamily::adversarial}) {
    if (family != "both" && family != cpc::to_string(fam)) continue;
    cpc::GcrcSyntheticConfig g;
    g.alphas = c.alphas;
    g.n_cal = env_or<std::size_t>(c, "n_cal", g.n_cal);
    g.grid_points = env_or<std::size_t>(c, "grid_points", g.grid_points);
    g.adversarial_rate = env_or<double>(c, "adversarial_rate", g.adversarial_rate);
    g.trials = trials_or(c, trials_set, g.trials);
    g.bound = c.bound;
    g.family = fam;
    g.seed = c.seed;
    const auto rows = cpc::gcrc_synthetic_experiment(g);
    cpc::write_text_file(c.out_dir / (std::string("gcrc_") + cpc::to_string(fam) + ".csv"), cpc::gcrc_csv(rows));
    json jr = json::array();
    bool crc_exceeds = false;
    for (const auto& r : rows) {
      jr.push_back({{"alpha", r.alpha},
                    {"method", r.method},
                    {"mean_test_loss", r.mean_test_loss},
                    {"se_test_loss", r.se_test_loss},
                    {"mean_epsilon", r.mean_epsilon},
                    {"lipschitz", r.lipschitz}});
      const std::string tag = std::string(cpc::to_string(fam)) + " alpha=" + fmt(r.alpha);
      checks.check("loss in [0, B] (" + r.method + ", " + tag + ")",
                   r.mean_test_loss >= 0.0 && r.mean_test_loss <= c.bound);
      if (fam == cpc::CurveFamily::smooth && r.method == "gcrc") {
        checks.check("gcrc within slack (" + tag + ")", r.mean_test_loss <= r.slack_limit(),
                     fmt(r.mean_test_loss) + " <= " + fmt(r.slack_limit()));
      }
      if (r.method == "crc" && r.mean_test_loss > r.alpha) crc_exceeds = true;
    }
    results[cpc::to_string(fam)] = jr;
    if (fam == cpc::CurveFamily::adversarial) results["adversarial_crc_exceeds_alpha"] = crc_exceeds;
  }
}

// ---- counterexample -------------------------------------------------------

void run_counterexample(const cpc::RunConfig& c, json& results, CheckLog& checks) {
  check_env_keys(c, {});
  const std::vector<double> alphas = c.alphas.empty() ? std::vector<double>{c.alpha} : c.alphas;
  json rows = json::array();
  for (double a : alphas) {
    const auto s = cpc::counterexample_summary(a);
    std::printf("alpha=%.17g bag_risk=%.17g expected=%.17g B=%.17g\n", a, s.bag_risk, 1.5 * a, s.bound);
    rows.push_back({{"alpha", a},
                    {"bound", s.bound},
                    {"chosen", s.chosen},
                    {"held_out_loss", s.held_out_loss},
                    {"bag_risk", s.bag_risk}});
    checks.check("bag risk equals 1.5 alpha (alpha=" + fmt(a) + ")",
                 std::abs(s.bag_risk - 1.5 * a) <= 1e-12 * std::max(1.0, a), fmt(s.bag_risk));
  }
  results["cases"] = rows;
}

// ---- fdr ------------------------------------------------------------------

void run_fdr(const cpc::RunConfig& c, bool trials_set, const std::string& claims_path, json& results,
             CheckLog& checks) {
  check_env_keys(c, {"records", "grid_points", "jitter", "ltt_delta"});
  std::vector<cpc::ClaimRecord> data;
  if (!claims_path.empty()) {
    data = cpc::load_claims_file(claims_path);
    results["claims"] = claims_path;
  } else {
    cpc::SyntheticClaimsConfig sc;
    sc.records = env_or<std::size_t>(c, "records", sc.records);
    data = cpc::synthetic_claims(c.seed, sc);
    results["claims"] = "synthetic";
  }
  cpc::FdrConfig f;
  f.alphas = c.alphas.empty() ? cpc::default_fdr_alphas() : c.alphas;
  f.trials = trials_or(c, trials_set, f.trials);
  f.calibration_fraction = c.calibration_fraction;
  f.grid_points = env_or<std::size_t>(c, "grid_points", f.grid_points);
  f.jitter = env_or<double>(c, "jitter", f.jitter);
  f.ltt_delta = env_or<double>(c, "ltt_delta", f.ltt_delta);
  f.seed = c.seed;
  const auto rows = cpc::fdr_experiment(data, f);
  cpc::write_text_file(c.out_dir / "fdr.csv", cpc::fdr_csv(rows));
  json jr = json::array();
  for (const auto& r : rows) {
    jr.push_back({{"alpha", r.alpha},
                  {"method", cpc::to_string(r.method)},
                  {"mean_fdr", r.mean_fdr},
                  {"se_fdr", r.se_fdr},
                  {"mean_recall", r.mean_recall},
                  {"se_recall", r.se_recall}});
    const std::string tag = std::string(cpc::to_string(r.method)) + " alpha=" + fmt(r.alpha);
    checks.check("fdr and recall in [0, 1] (" + tag + ")",
                 r.mean_fdr >= 0.0 && r.mean_fdr <= 1.0 && r.mean_recall >= 0.0 && r.mean_recall <= 1.0);
    if (r.method == cpc::FdrMethod::gcrc) {
      checks.check("gcrc fdr controlled (" + tag + ")", r.mean_fdr <= r.alpha + 3.0 * r.se_fdr,
                   fmt(r.mean_fdr) + " <= " + fmt(r.alpha + 3.0 * r.se_fdr));
    }
  }
  results["rows"] = jr;
}

// ---- active-learning ------------------------------------------------------

void run_active_learning(const cpc::RunConfig& c, bool trials_set, const std::string& dataset_path,
                         json& results, CheckLog& checks) {
  check_env_keys(c, {"gamma", "iterations", "n_initial", "temperature", "records", "dims", "n_prop",
                     "n_safe_probes"});
  cpc::ActiveLearningConfig a;
  a.alpha = c.alpha;
  a.sampling_bias = env_or<double>(c, "gamma", a.sampling_bias);
  a.iterations = env_or<int>(c, "iterations", a.iterations);
  a.n_initial = env_or<std::size_t>(c, "n_initial", a.n_initial);
  a.temperature = env_or<double>(c, "temperature", a.temperature);
  a.n_prop = env_or<std::size_t>(c, "n_prop", a.n_prop);
  a.n_safe_probes = env_or<std::size_t>(c, "n_safe_probes", a.n_safe_probes);
  a.beta = beta_config(c);
  const std::size_t seeds = trials_or(c, trials_set, 200);
  std::optional<cpc::TabularDataset> fixed;
  if (!dataset_path.empty()) fixed = cpc::load_tabular_csv(dataset_path);
  const auto records = env_or<std::size_t>(c, "records", 600);
  const auto dims = env_or<int>(c, "dims", 4);

  const auto runs = cpc::parallel_map<cpc::ActiveLearningResult>(seeds, [&](std::size_t s) {
    const std::uint64_t seed = c.seed + s;
    return cpc::active_learning_run(fixed ? *fixed : cpc::synthetic_tabular(seed, records, dims), a, seed);
  });

  std::ostringstream csv;
  csv.precision(10);
  csv << "trial,method,round,beta_hat,violation,test_mse\n";
  std::vector<double> vc, vu, safe, mse_c, mse_u;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    for (const auto* trace : {&runs[s].controlled, &runs[s].uncontrolled}) {
      const char* method = trace == &runs[s].controlled ? "cpc" : "uncontrolled";
      for (std::size_t r = 0; r < trace->violations.size(); ++r) {
        csv << s << ',' << method << ',' << r + 1 << ',' << trace->beta_hat[r] << ',' << trace->violations[r] << ','
            << trace->test_mse[r + 1] << '\n';
      }
    }
    vc.push_back(runs[s].controlled.violation_rate());
    vu.push_back(runs[s].uncontrolled.violation_rate());
    safe.push_back(runs[s].controlled.safe_infeasibility);
    mse_c.push_back(runs[s].controlled.test_mse.back());
    mse_u.push_back(runs[s].uncontrolled.test_mse.back());
  }
  cpc::write_text_file(c.out_dir / "active_learning.csv", csv.str());
  const double cpc_rate = cpc::mean_of(vc);
  const double cpc_se = cpc::standard_error_of(vc);
  const double safe_rate = cpc::mean_of(safe);
  results = {{"seeds", seeds},
             {"gamma", a.sampling_bias},
             {"cpc_violation_rate", cpc_rate},
             {"cpc_violation_se", cpc_se},
             {"uncontrolled_violation_rate", cpc::mean_of(vu)},
             {"uncontrolled_violation_se", cpc::standard_error_of(vu)},
             {"safe_infeasibility", safe_rate},
             {"cpc_final_test_mse", cpc::mean_of(mse_c)},
             {"uncontrolled_final_test_mse", cpc::mean_of(mse_u)}};
  checks.check("violation rates in [0, 1]", cpc_rate >= 0.0 && cpc_rate <= 1.0);
  if (safe_rate <= a.alpha) {
    checks.check("cpc violation rate controlled", cpc_rate <= a.alpha + 3.0 * cpc_se,
                 fmt(cpc_rate) + " <= " + fmt(a.alpha + 3.0 * cpc_se));
  } else {
    checks.skip("cpc violation rate controlled",
                "safe policy infeasibility " + fmt(safe_rate) + " exceeds alpha, so no beta can reach it");
  }
}

// ---- sequence-opt ---------------------------------------------------------

void run_sequence_opt(const cpc::RunConfig& c, bool trials_set, bool uncontrolled, json& results,
                      CheckLog& checks) {
  check_env_keys(c, {"vocab", "length", "n_banned", "n_motifs", "banned_motifs", "rounds", "n_per_round", "tilt",
                     "n_seeds", "n_prop", "n_safe_probes"});
  cpc::SequenceEnvConfig e;
  e.vocab = env_or<int>(c, "vocab", e.vocab);
  e.length = env_or<int>(c, "length", e.length);
  e.n_banned = env_or<std::size_t>(c, "n_banned", e.n_banned);
  e.n_motifs = env_or<std::size_t>(c, "n_motifs", e.n_motifs);
  e.banned_motifs = env_or<std::size_t>(c, "banned_motifs", e.banned_motifs);
  cpc::SequenceOptConfig o;
  o.rounds = env_or<int>(c, "rounds", o.rounds);
  o.n_per_round = env_or<std::size_t>(c, "n_per_round", o.n_per_round);
  o.tilt = env_or<double>(c, "tilt", o.tilt);
  o.n_seeds = env_or<std::size_t>(c, "n_seeds", o.n_seeds);
  o.n_prop = env_or<std::size_t>(c, "n_prop", o.n_prop);
  o.n_safe_probes = env_or<std::size_t>(c, "n_safe_probes", o.n_safe_probes);
  o.controlled = !uncontrolled;
  o.beta = beta_config(c);
  const std::vector<double> alphas = c.alphas.empty() ? std::vector<double>{c.alpha} : c.alphas;
  const std::size_t reps = trials_or(c, trials_set, 200);

  std::ostringstream csv;
  csv.precision(10);
  csv << "alpha,trial,method,round,beta_hat,mean_loss,mean_reward,best_reward,accept_rate\n";
  json summary = json::array();
  const char* method = uncontrolled ? "uncontrolled" : "cpc";
  for (double alpha : alphas) {
    struct Rep {
      cpc::SequenceOptResult result;
      double safe_infeasibility = 0.0;
    };
    const auto runs = cpc::parallel_map<Rep>(reps, [&](std::size_t r) {
      const std::uint64_t seed = c.seed + r;
      const auto env = cpc::make_sequence_env(seed, e);
      const auto safe = cpc::fit_safe_policy(env, o, seed);
      return Rep{cpc::sequence_opt_run(env, safe, alpha, o, seed), cpc::markov_infeasibility(safe, env)};
    });
    std::vector<double> losses, safe;
    bool traces_ok = true;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      for (const auto& s : runs[r].result.rounds) {
        csv << alpha << ',' << r << ',' << method << ',' << s.round << ',' << s.beta_hat << ',' << s.mean_loss << ','
            << s.mean_reward << ',' << s.best_reward << ',' << s.accept_rate << '\n';
      }
      for (const auto& log : runs[r].result.logs) {
        if (!uncontrolled && log.round > 0 && !log.floor_fallback && log.risk_estimate > alpha + 1e-12) {
          traces_ok = false;
        }
      }
      losses.push_back(runs[r].result.deployed_mean_loss());
      safe.push_back(runs[r].safe_infeasibility);
    }
    const double mean = cpc::mean_of(losses);
    const double se = cpc::standard_error_of(losses);
    const double safe_rate = cpc::mean_of(safe);
    summary.push_back({{"alpha", alpha},
                       {"method", method},
                       {"replications", reps},
                       {"mean_loss", mean},
                       {"se_loss", se},
                       {"safe_infeasibility", safe_rate}});
    const std::string tag = " (alpha=" + fmt(alpha) + ")";
    if (uncontrolled) continue;
    checks.check("weighted risk at beta_hat within alpha" + tag, traces_ok);
    if (safe_rate <= alpha) {
      checks.check("deployed loss controlled" + tag, mean <= alpha + 3.0 * se, fmt(mean) + " <= " + fmt(alpha + 3.0 * se));
    } else {
      checks.skip("deployed loss controlled" + tag, "safe policy infeasibility exceeds alpha");
    }
  }
  cpc::write_text_file(c.out_dir / "sequence_opt.csv", csv.str());
  results["summary"] = summary;
}

// ---- gaussian-pair --------------------------------------------------------

void run_gaussian_pair(const cpc::RunConfig& c, bool trials_set, json& results, CheckLog& checks) {
  check_env_keys(c, {"threshold", "tilt", "n_collect", "n_prop", "n_safe_probes"});
  cpc::GaussianEnvConfig g;
  g.threshold = env_or<double>(c, "threshold", g.threshold);
  g.tilt = env_or<double>(c, "tilt", g.tilt);
  g.n_collect = env_or<std::size_t>(c, "n_collect", g.n_collect);
  g.n_prop = env_or<std::size_t>(c, "n_prop", g.n_prop);
  g.n_safe_probes = env_or<std::size_t>(c, "n_safe_probes", g.n_safe_probes);
  g.beta = beta_config(c);
  const std::vector<double> alphas = c.alphas.empty() ? std::vector<double>{0.2, 0.5, 0.8} : c.alphas;
  const std::size_t reps = trials_or(c, trials_set, 2000);
  std::ostringstream csv;
  csv.precision(10);
  csv << "alpha,trial,beta_hat,risk_estimate,mean_loss,expected_loss\n";
  json summary = json::array();
  for (double alpha : alphas) {
    const auto rounds = cpc::parallel_map<cpc::GaussianRound>(reps, [&](std::size_t r) {
      cpc::Rng rng = cpc::make_rng(c.seed, r);
      return cpc::gaussian_cpc_round(alpha, g, rng);
    });
    std::vector<double> losses, expected;
    for (std::size_t r = 0; r < rounds.size(); ++r) {
      const auto& round = rounds[r];
      const double exact = cpc::gaussian_clipped_expected_loss(round.optimized, round.calibration.log_beta_hat(),
                                                               g.threshold, 12.0, 20001);
      csv << alpha << ',' << r << ',' << round.log.beta_hat << ',' << round.log.risk_estimate << ','
          << round.log.mean_loss() << ',' << exact << '\n';
      losses.push_back(round.log.mean_loss());
      expected.push_back(exact);
    }
    const double mean = cpc::mean_of(losses);
    const double se = cpc::standard_error_of(losses);
    summary.push_back({{"alpha", alpha},
                       {"replications", reps},
                       {"mean_loss", mean},
                       {"se_loss", se},
                       {"mean_expected_loss", cpc::mean_of(expected)}});
    checks.check("deployed loss controlled (alpha=" + fmt(alpha) + ")", mean <= alpha + 3.0 * se,
                 fmt(mean) + " <= " + fmt(alpha + 3.0 * se));
  }
  cpc::write_text_file(c.out_dir / "gaussian_pair.csv", csv.str());
  results["summary"] = summary;
}

// ---- calibrate ------------------------------------------------------------

std::vector<cpc::Point> points_of(const json& j, const char* key) {
  std::vector<cpc::Point> out;
  if (!j.contains(key)) return out;
  for (const auto& p : j[key]) out.push_back(p.is_array() ? p.get<cpc::Point>() : cpc::Point{p.get<double>()});
  return out;
}

struct PolicyFiles {
  std::string optimized;
  std::string safe;
  std::string mixture;
};

void run_calibrate(const cpc::RunConfig& c, const PolicyFiles& files, const std::string& samples_path,
                   std::size_t draw_count, json& results, CheckLog& checks) {
  check_env_keys(c, {});
  const auto opt = cpc::load_policy_file(files.optimized);
  const auto safe = cpc::load_policy_file(files.safe);
  const auto mix = files.mixture.empty() ? safe : cpc::load_policy_file(files.mixture);
  std::ifstream in(samples_path);
  if (!in) throw std::runtime_error("cannot open samples " + samples_path);
  const json s = json::parse(in);
  if (!s.contains("calibration") || !s["calibration"].is_array()) {
    throw std::invalid_argument(samples_path + ": expected a \"calibration\" array of {x, loss}");
  }

  cpc::CalibrationData data;
  std::size_t index = 0;
  for (const auto& item : s["calibration"]) {
    const auto x = item.at("x").is_array() ? item.at("x").get<cpc::Point>() : cpc::Point{item.at("x").get<double>()};
    const double loss = item.at("loss").get<double>();
    if (!(loss >= 0.0 && loss <= c.bound)) {
      throw std::invalid_argument(samples_path + ": calibration[" + std::to_string(index) + "] loss outside [0, B]");
    }
    data.cal.push_back(cpc::cache_densities(*opt, *safe, *mix, x));
    data.losses.push_back(loss);
    ++index;
  }
  // Proposal and probe draws come from the file when given, else from the policies.
  cpc::Rng rng = cpc::make_rng(c.seed, 0xca1);
  auto prop = points_of(s, "proposal");
  auto probes = points_of(s, "safe_probes");
  if (prop.empty()) {
    for (std::size_t i = 0; i < draw_count; ++i) prop.push_back(opt->sample(rng));
  }
  if (probes.empty()) {
    for (std::size_t i = 0; i < draw_count; ++i) probes.push_back(safe->sample(rng));
  }
  for (const auto& x : prop) data.prop.push_back(cpc::cache_densities(*opt, *safe, *mix, x));
  for (const auto& x : probes) data.safe_probes.push_back(cpc::cache_densities(*opt, *safe, *mix, x));

  const auto bc = beta_config(c);
  const auto result = cpc::calibrate_beta(data, c.alpha, c.bound, bc);
  const auto reference = cpc::calibrate_beta_reference(data, c.alpha, c.bound, bc);
  std::ofstream csv_out;
  fs::create_directories(c.out_dir);
  csv_out.open(c.out_dir / "calibration.csv");
  cpc::write_csv(csv_out, result);
  results = cpc::to_json(result);
  results["proposal_samples"] = data.prop.size();
  results["safe_probes"] = data.safe_probes.size();
  checks.check("risk trace satisfies the prefix condition", cpc::satisfies_prefix_condition(result));
  // The serial scan stops at the first violation, so only its prefix is comparable.
  bool same = result.chosen_index == reference.chosen_index && result.beta_hat == reference.beta_hat;
  for (std::size_t k = 0; k < reference.weighted_risk.size(); ++k) {
    same = same && reference.weighted_risk[k] == result.weighted_risk[k] &&
           reference.log_psi_hat[k] == result.log_psi_hat[k];
  }
  checks.check("parallel and serial calibration agree", same);
  if (result.floor_violated) checks.skip("beta_min is feasible", "risk at beta_min already exceeds alpha");
}

// ---- sample ---------------------------------------------------------------

cpc::ProposalKind parse_kind(const std::string& s) {
  if (s == "safe") return cpc::ProposalKind::safe;
  if (s == "optimized") return cpc::ProposalKind::optimized;
  if (s == "mixture") return cpc::ProposalKind::mixture;
  throw std::invalid_argument("unknown proposal \"" + s + "\"");
}

struct SampleFlags {
  std::string beta = "1";
  std::string proposal = "safe";
  std::size_t count = 1000;
  std::size_t budget = 10'000'000;
  std::optional<double> w;
  std::optional<double> envelope;
  std::size_t probes = 2000;
};

void run_sample(const cpc::RunConfig& c, const PolicyFiles& files, const SampleFlags& f, json& results,
                CheckLog& checks) {
  check_env_keys(c, {});
  const auto opt = cpc::load_policy_file(files.optimized);
  const auto safe = cpc::load_policy_file(files.safe);
  const double beta = f.beta == "inf" ? cpc::kInf : std::stod(f.beta);
  if (!(beta >= c.beta_min)) throw std::invalid_argument("--beta must be >= beta_min");
  const double log_beta = std::log(beta);
  const auto kind = parse_kind(f.proposal);
  if (kind == cpc::ProposalKind::safe && !std::isfinite(beta)) {
    throw std::invalid_argument("the safe proposal needs a finite beta");
  }

  double w = f.w.value_or(0.5);
  double envelope = kind == cpc::ProposalKind::safe ? beta : 1.0;
  if (kind == cpc::ProposalKind::mixture) {
    // Half the probes from each component so both tails are represented.
    cpc::Rng rng = cpc::make_rng(c.seed, 0x5a1);
    std::vector<cpc::Point> from_safe, from_opt;
    for (std::size_t i = 0; i < f.probes / 2; ++i) from_safe.push_back(safe->sample(rng));
    for (std::size_t i = 0; i < f.probes - f.probes / 2; ++i) from_opt.push_back(opt->sample(rng));
    if (!f.w) {
      std::vector<double> lr_prop, lr_safe;
      for (const auto& x : from_opt) lr_prop.push_back(cpc::log_likelihood_ratio(*opt, *safe, x));
      for (const auto& x : from_safe) lr_safe.push_back(cpc::log_likelihood_ratio(*opt, *safe, x));
      const double log_psi = cpc::estimate_log_psi(lr_prop, log_beta, cpc::PsiProposal::optimistic);
      const auto mw = cpc::mixture_weight_heuristic(
          cpc::estimate_overlap(lr_safe, log_beta, log_psi, cpc::OverlapComponent::safe),
          cpc::estimate_overlap(lr_prop, log_beta, log_psi, cpc::OverlapComponent::optimized));
      w = mw.w;
      results["mixture_weight_degenerate"] = mw.degenerate;
    }
    if (f.envelope) {
      envelope = *f.envelope;
    } else {
      std::vector<cpc::Point> all = from_safe;
      all.insert(all.end(), from_opt.begin(), from_opt.end());
      envelope = cpc::estimate_envelope(*opt, *safe, log_beta, w, all, c.envelope_inflation);
    }
  }
  const auto batch = cpc::sample_constrained(*opt, *safe, log_beta, kind, c.seed, f.count, f.budget, w, envelope);
  results = cpc::to_json(batch);
  results["w"] = w;
  results["requested"] = f.count;
  json pts = json::array();
  bool in_support = true;
  for (const auto& x : batch.accepted) {
    pts.push_back(x);
    if (!std::isfinite(cpc::clipped_unnorm_log_density(*opt, *safe, log_beta, x))) in_support = false;
  }
  cpc::write_json_file(c.out_dir / "samples.json", {{"batch", results}, {"points", pts}});
  checks.check("acceptance rate in [0, 1]", batch.rate() >= 0.0 && batch.rate() <= 1.0);
  checks.check("accepted points lie in the support", in_support);
  checks.check("requested count reached", !batch.exhausted(f.count),
               std::to_string(batch.accepted.size()) + " of " + std::to_string(f.count));
  checks.check("envelope held on every proposal", !batch.approximate(),
               std::to_string(batch.violations) + " clamped acceptance ratios");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal risk control and conformal policy control experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(cpc::kVersion));

  GlobalFlags g;
  app.add_option("--alpha", g.alpha, "Target risk level");
  app.add_option("--alphas", g.alphas, "Comma-separated alpha sweep")->delimiter(',');
  app.add_option("--bound", g.bound, "Loss bound B");
  app.add_option("--trials", g.trials, "Trials, seeds or replications");
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = OpenMP default)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config, "JSON run config; flags override it")->check(CLI::ExistingFile);

  app.add_subcommand("gcrc-synthetic", "CRC vs gCRC on synthetic non-monotonic losses");
  app.add_subcommand("counterexample", "Leave-one-out risk on the three-curve counterexample");
  auto* fdr = app.add_subcommand("fdr", "Claim filtering with FDR control");
  std::string claims_path;
  fdr->add_option("--claims", claims_path, "Claims JSON (synthetic claims when omitted)")->check(CLI::ExistingFile);
  auto* al = app.add_subcommand("active-learning", "GP active learning with a feasibility constraint");
  std::string dataset_path;
  al->add_option("--dataset", dataset_path, "CSV with a header; last column is the target")->check(CLI::ExistingFile);
  auto* seq = app.add_subcommand("sequence-opt", "Markov sequence design with banned transitions");
  bool uncontrolled = false;
  seq->add_flag("--uncontrolled", uncontrolled, "Deploy the tilted policy without calibration");
  app.add_subcommand("gaussian-pair", "One-round CPC on the Gaussian pair environment");
  auto* cal = app.add_subcommand("calibrate", "Calibrate beta from serialized policies and samples");
  PolicyFiles files;
  std::string samples_path;
  std::size_t draw_count = 1000;
  cal->add_option("--optimized", files.optimized, "Optimized policy JSON")->required()->check(CLI::ExistingFile);
  cal->add_option("--safe", files.safe, "Safe policy JSON")->required()->check(CLI::ExistingFile);
  cal->add_option("--mixture", files.mixture, "Policy that generated the calibration points (default: safe)")
      ->check(CLI::ExistingFile);
  cal->add_option("--samples", samples_path, "JSON with calibration [{x, loss}], optional proposal and safe_probes")
      ->required()
      ->check(CLI::ExistingFile);
  cal->add_option("--draws", draw_count, "Draws per missing sample set");
  auto* smp = app.add_subcommand("sample", "Draw from the clipped policy by accept-reject");
  SampleFlags sf;
  smp->add_option("--optimized", files.optimized, "Optimized policy JSON")->required()->check(CLI::ExistingFile);
  smp->add_option("--safe", files.safe, "Safe policy JSON")->required()->check(CLI::ExistingFile);
  smp->add_option("--beta", sf.beta, "Clip level (number or inf)");
  smp->add_option("--proposal", sf.proposal, "safe, optimized or mixture");
  smp->add_option("--count", sf.count, "Accepted draws wanted");
  smp->add_option("--budget", sf.budget, "Maximum proposals");
  smp->add_option("--w", sf.w, "Mixture weight on the safe policy (default: overlap heuristic)");
  smp->add_option("--envelope", sf.envelope, "Envelope constant M (default: estimated from probes)");
  smp->add_option("--probes", sf.probes, "Probe draws for the mixture weight and envelope");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::vector<std::string> args(argv, argv + argc);
  cpc::RunConfig config;
  try {
    bool trials_set = false;
    config = resolve_config(g, command, trials_set);
    cpc::set_worker_count(config.jobs);
    // A report left by an earlier run in the same directory would be misread.
    fs::remove(config.out_dir / "failures.json");
    cpc::write_json_file(config.out_dir / "manifest.json", cpc::make_manifest(config, command, args));

    json results = json::object();
    CheckLog checks;
    if (command == "gcrc-synthetic") run_gcrc_synthetic(config, trials_set, results, checks);
    else if (command == "counterexample") run_counterexample(config, results, checks);
    else if (command == "fdr") run_fdr(config, trials_set, claims_path, results, checks);
    else if (command == "active-learning") run_active_learning(config, trials_set, dataset_path, results, checks);
    else if (command == "sequence-opt") run_sequence_opt(config, trials_set, uncontrolled, results, checks);
    else if (command == "gaussian-pair") run_gaussian_pair(config, trials_set, results, checks);
    else if (command == "calibrate") run_calibrate(config, files, samples_path, draw_count, results, checks);
    else if (command == "sample") run_sample(config, files, sf, results, checks);

    cpc::write_json_file(config.out_dir / "results.json", results);
    cpc::write_json_file(config.out_dir / "checks.json", checks.entries);
    std::size_t failed = 0;
    for (const auto& e : checks.entries) {
      if (e["passed"].is_boolean() && !e["passed"].get<bool>()) {
        ++failed;
        std::fprintf(stderr, "FAILED %s: %s\n", e["check"].get<std::string>().c_str(),
                     e["detail"].get<std::string>().c_str());
      }
    }
    std::printf("%s: %zu checks, %zu failed; output in %s\n", command.c_str(), checks.entries.size(), failed,
                config.out_dir.string().c_str());
    if (!checks.ok) {
      json failures = json::array();
      for (const auto& e : checks.entries) {
        if (e["passed"].is_boolean() && !e["passed"].get<bool>()) failures.push_back(e);
      }
      cpc::write_json_file(config.out_dir / "failures.json",
                           {{"command", command}, {"status", "check_failed"}, {"failures", failures}});
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    try {
      fs::path dir = config.out_dir;
      if (dir.empty()) dir = g.out ? fs::path(*g.out) : cpc::default_output_root() / command;
      cpc::write_json_file(dir / "failures.json", {{"command", command}, {"status", "error"}, {"message", e.what()}});
    } catch (const std::exception&) {
      // Nowhere to report; the message above is all we have.
    }
    return 2;
  }
}
