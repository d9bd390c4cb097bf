#include "cpc/kernels.hpp"

#include <stdexcept>

namespace cpc {

void set_worker_count(int jobs) {
#if defined(_OPENMP)
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

int worker_count() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

std::size_t common_size(std::span<const LossCurve> curves) {
  if (curves.empty()) throw std::invalid_argument("column_sums: no curves");
  const std::size_t m = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != m) throw std::invalid_argument("column_sums: curves do not share a grid");
  }
  return m;
}

double column_sum(std::span<const LossCurve> curves, std::size_t k) {
  double s = 0.0;
  for (const auto& c : curves) s += c[k];
  return s;
}

}  // namespace

std::vector<double> column_sums_reference(std::span<const LossCurve> curves) {
  const std::size_t m = common_size(curves);
  return serial_map<double>(m, [&](std::size_t k) { return column_sum(curves, k); });
}

std::vector<double> column_sums(std::span<const LossCurve> curves) {
  const std::size_t m = common_size(curves);
  return parallel_map<double>(m, [&](std::size_t k) { return column_sum(curves, k); });
}

std::vector<LossCurve> claim_loss_curves_reference(std::span<const ClaimRecord> records, const Grid& grid,
                                                   ClaimLoss kind) {
  std::vector<LossCurve> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(claim_loss_curve(r, grid, kind));
  return out;
}

std::vector<LossCurve> claim_loss_curves(std::span<const ClaimRecord> records, const Grid& grid, ClaimLoss kind) {
  // LossCurve has no default constructor; collect raw values first.
  std::vector<std::vector<double>> values = parallel_map<std::vector<double>>(
      records.size(), [&](std::size_t i) { return claim_loss_curve(records[i], grid, kind).values(); });
  std::vector<LossCurve> out;
  out.reserve(records.size());
  for (auto& v : values) out.emplace_back(std::move(v), 1.0);
  return out;
}

}  // namespace cpc
