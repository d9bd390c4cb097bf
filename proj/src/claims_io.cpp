#include "cpc/claims_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cpc {

using nlohmann::json;

ClaimsFormatError::ClaimsFormatError(std::ptrdiff_t record_index, const std::string& what)
    : std::runtime_error(record_index < 0 ? "claims: " + what
                                          : "claims record " + std::to_string(record_index) + ": " + what),
      record_index_(record_index) {}

std::vector<ClaimRecord> parse_claims_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ClaimsFormatError(-1, e.what());
  }
  if (!doc.is_array()) throw ClaimsFormatError(-1, "top level must be an array");

  std::vector<ClaimRecord> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto idx = static_cast<std::ptrdiff_t>(i);
    const json& rec = doc[i];
    if (!rec.is_object() || !rec.contains("scores") || !rec.contains("labels")) {
      throw ClaimsFormatError(idx, "expected an object with \"scores\" and \"labels\"");
    }
    const json& s = rec["scores"];
    const json& l = rec["labels"];
    if (!s.is_array() || !l.is_array()) throw ClaimsFormatError(idx, "scores and labels must be arrays");
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& v : s) {
      if (!v.is_number()) throw ClaimsFormatError(idx, "non-numeric score");
      scores.push_back(v.get<double>());
    }
    for (const auto& v : l) {
      if (!v.is_number_integer()) throw ClaimsFormatError(idx, "label must be 0 or 1");
      labels.push_back(v.get<int>());
    }
    try {
      out.emplace_back(std::move(scores), std::move(labels));
    } catch (const std::invalid_argument& e) {
      throw ClaimsFormatError(idx, e.what());
    }
  }
  return out;
}

std::vector<ClaimRecord> load_claims_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ClaimsFormatError(-1, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_claims_json(buf.str());
}

std::string claims_to_json(const std::vector<ClaimRecord>& records) {
  json doc = json::array();
  for (const auto& r : records) doc.push_back({{"scores", r.scores()}, {"labels", r.labels()}});
  return doc.dump();
}

}  // namespace cpc
