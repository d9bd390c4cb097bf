#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace cpc {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "CPC_OUT_DIR";

/// Settings for one CLI run. Loaded from a JSON file, then overridden by
/// flags. Experiment-specific knobs live under "env" and are read by the
/// individual subcommands.
struct RunConfig {
  std::string experiment;
  double alpha = 0.2;
  std::vector<double> alphas;  // sweep; empty means the subcommand's default
  double bound = 1.0;
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  int jobs = 0;
  std::filesystem::path out_dir;
  double beta_min = 1e-3;
  double safety_factor = 1.0;
  double envelope_inflation = 1.05;
  double calibration_fraction = 0.7;
  nlohmann::json env = nlohmann::json::object();
};

/// Overlays the keys present in `j` onto `config`. Unknown top-level keys are
/// an error so typos do not pass silently.
void apply_json(RunConfig& config, const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Throws std::invalid_argument when α is outside (0, B] or trials < 1.
void validate(const RunConfig& config);

/// $CPC_OUT_DIR if set and non-empty, else ./cpc_runs.
std::filesystem::path default_output_root();

/// Config, command line, seeds and build facts needed to repeat a run.
nlohmann::json make_manifest(const RunConfig& config, const std::string& command,
                             const std::vector<std::string>& argv);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cpc
