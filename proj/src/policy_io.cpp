#include "cpc/policy_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cpc {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("policy json: missing \"") + key + "\"");
  return j.at(key);
}

std::vector<std::pair<int, int>> pairs_from_json(const json& j) {
  std::vector<std::pair<int, int>> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw std::invalid_argument("policy json: banned entries must be pairs");
    out.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  return out;
}

}  // namespace

PolicyPtr policy_from_json(const json& j, const std::filesystem::path& base_dir) {
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind == "discrete") {
    return std::make_shared<DiscretePolicy>(field(j, "points").get<std::vector<Point>>(),
                                            field(j, "probs").get<std::vector<double>>());
  }
  if (kind == "categorical") {
    return std::make_shared<DiscretePolicy>(make_categorical(field(j, "probs").get<std::vector<double>>()));
  }
  if (kind == "gaussian") {
    return std::make_shared<DiagonalGaussian>(field(j, "mean").get<std::vector<double>>(),
                                              field(j, "sd").get<std::vector<double>>());
  }
  if (kind == "markov") {
    const int vocab = field(j, "vocab").get<int>();
    std::vector<std::pair<int, int>> pairs;
    if (j.contains("banned")) pairs = pairs_from_json(j.at("banned"));
    if (j.contains("banned_file")) {
      auto extra = load_banned_pairs(base_dir / j.at("banned_file").get<std::string>());
      pairs.insert(pairs.end(), extra.begin(), extra.end());
    }
    return std::make_shared<MarkovSequencePolicy>(vocab, field(j, "length").get<int>(),
                                                  field(j, "initial").get<std::vector<double>>(),
                                                  field(j, "transitions").get<std::vector<double>>(),
                                                  banned_mask_from_pairs(vocab, pairs));
  }
  if (kind == "mixture") {
    std::vector<PolicyPtr> comps;
    for (const auto& c : field(j, "components")) comps.push_back(policy_from_json(c, base_dir));
    return std::make_shared<MixturePolicy>(std::move(comps), field(j, "weights").get<std::vector<double>>());
  }
  if (kind == "clipped") {
    const json& lb = field(j, "log_beta");
    const double log_beta = lb.is_null() ? kInf : lb.get<double>();
    std::optional<double> log_psi;
    if (j.contains("log_psi") && !j.at("log_psi").is_null()) log_psi = j.at("log_psi").get<double>();
    return std::make_shared<ClippedPolicy>(policy_from_json(field(j, "safe"), base_dir),
                                           policy_from_json(field(j, "optimized"), base_dir), log_beta, log_psi);
  }
  throw std::invalid_argument("policy json: unknown kind \"" + kind + "\"");
}

PolicyPtr load_policy_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open policy file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("policy file " + path.string() + ": " + e.what());
  }
  return policy_from_json(j, path.parent_path());
}

std::vector<std::pair<int, int>> load_banned_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open banned-bigram file " + path.string());
  std::vector<std::pair<int, int>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    int a = 0;
    int b = 0;
    if (!(fields >> a)) continue;
    std::string rest;
    if (!(fields >> b) || (fields >> rest)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected two token ids");
    }
    out.emplace_back(a, b);
  }
  return out;
}

}  // namespace cpc
