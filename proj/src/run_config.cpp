#include "cpc/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include <Eigen/Core>

namespace cpc {

using nlohmann::json;

void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  static const std::set<std::string> known{"experiment", "alpha",         "alphas",       "bound",
                                           "seed",       "trials",        "jobs",         "out_dir",
                                           "beta_min",   "safety_factor", "envelope_inflation",
                                           "calibration_fraction",        "env"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("config: unknown key \"" + key + "\"");
  }
  try {
    if (j.contains("experiment")) c.experiment = j["experiment"].get<std::string>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("alphas")) c.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("bound")) c.bound = j["bound"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("trials")) c.trials = j["trials"].get<std::size_t>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("beta_min")) c.beta_min = j["beta_min"].get<double>();
    if (j.contains("safety_factor")) c.safety_factor = j["safety_factor"].get<double>();
    if (j.contains("envelope_inflation")) c.envelope_inflation = j["envelope_inflation"].get<double>();
    if (j.contains("calibration_fraction")) c.calibration_fraction = j["calibration_fraction"].get<double>();
    if (j.contains("env")) {
      if (!j["env"].is_object()) throw std::invalid_argument("config: \"env\" must be an object");
      c.env.update(j["env"]);
    }
  } catch (const json::type_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

json to_json(const RunConfig& c) {
  return {{"experiment", c.experiment},
          {"alpha", c.alpha},
          {"alphas", c.alphas},
          {"bound", c.bound},
          {"seed", c.seed},
          {"trials", c.trials},
          {"jobs", c.jobs},
          {"out_dir", c.out_dir.string()},
          {"beta_min", c.beta_min},
          {"safety_factor", c.safety_factor},
          {"envelope_inflation", c.envelope_inflation},
          {"calibration_fraction", c.calibration_fraction},
          {"env", c.env}};
}

void validate(const RunConfig& c) {
  auto check_alpha = [&](double a) {
    if (!(a > 0.0 && a <= c.bound)) throw std::invalid_argument("config: alpha must lie in (0, bound]");
  };
  if (!(c.bound > 0.0)) throw std::invalid_argument("config: bound must be positive");
  check_alpha(c.alpha);
  for (double a : c.alphas) check_alpha(a);
  if (c.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (c.jobs < 0) throw std::invalid_argument("config: jobs must be >= 0");
  if (!(c.beta_min > 0.0)) throw std::invalid_argument("config: beta_min must be positive");
  if (!(c.safety_factor >= 1.0)) throw std::invalid_argument("config: safety_factor must be >= 1");
  if (!(c.envelope_inflation >= 1.0)) throw std::invalid_argument("config: envelope_inflation must be >= 1");
  if (!(c.calibration_fraction > 0.0 && c.calibration_fraction < 1.0)) {
    throw std::invalid_argument("config: calibration_fraction must lie in (0, 1)");
  }
}

std::filesystem::path default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  if (env && *env) return env;
  return "cpc_runs";
}

json make_manifest(const RunConfig& c, const std::string& command, const std::vector<std::string>& argv) {
  json build{{"version", kVersion},
             {"compiler", __VERSION__},
             {"cplusplus", static_cast<long>(__cplusplus)},
             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                           std::to_string(EIGEN_MINOR_VERSION)},
             {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                          "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
#if defined(_OPENMP)
  build["openmp"] = _OPENMP;
#else
  build["openmp"] = nullptr;
#endif
  return {{"command", command}, {"argv", argv}, {"config", to_json(c)}, {"seed", c.seed}, {"build", build}};
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace cpc
