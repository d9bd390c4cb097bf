#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpc/losses.hpp"

namespace cpc {

/// Raised for a claims file that does not match the schema
/// [{"scores": [float...], "labels": [0|1...]}, ...].
class ClaimsFormatError : public std::runtime_error {
 public:
  ClaimsFormatError(std::ptrdiff_t record_index, const std::string& what);
  /// Index of the first malformed record, or -1 for a top-level problem.
  std::ptrdiff_t record_index() const { return record_index_; }

 private:
  std::ptrdiff_t record_index_;
};

std::vector<ClaimRecord> parse_claims_json(const std::string& text);
std::vector<ClaimRecord> load_claims_file(const std::filesystem::path& path);
std::string claims_to_json(const std::vector<ClaimRecord>& records);

}  // namespace cpc
