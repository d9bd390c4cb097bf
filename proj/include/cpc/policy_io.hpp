#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "cpc/policies.hpp"
#include "json.hpp"

namespace cpc {

/// Rebuilds a policy from its to_json() form. Recognized kinds: discrete,
/// categorical ({"probs": [...]}), gaussian, markov, mixture, clipped.
/// A clipped policy's "log_beta" may be null for +inf.
/// Markov policies may name a banned-bigram file via "banned_file", resolved
/// against `base_dir`.
PolicyPtr policy_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

PolicyPtr load_policy_file(const std::filesystem::path& path);

/// Banned bigrams as whitespace-separated "from to" pairs, one per line;
/// '#' starts a comment.
std::vector<std::pair<int, int>> load_banned_pairs(const std::filesystem::path& path);

}  // namespace cpc
