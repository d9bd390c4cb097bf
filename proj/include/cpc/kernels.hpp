#pragma once

// Data-parallel building blocks. Every parallel kernel has a serial
// counterpart with identical per-element arithmetic, so results agree
// bitwise and the serial path serves as the test reference.

#include <cstddef>
#include <span>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "cpc/losses.hpp"

namespace cpc {

/// Sets the OpenMP worker count (no-op without OpenMP). jobs == 0 keeps the default.
void set_worker_count(int jobs);
int worker_count();

/// out[i] = fn(i) for i in [0, n), evaluated in parallel. fn must be pure
/// apart from writing its own result; order of evaluation is unspecified.
template <typename R, typename Fn>
std::vector<R> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<R> out(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
  return out;
}

template <typename R, typename Fn>
std::vector<R> serial_map(std::size_t n, Fn&& fn) {
  std::vector<R> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

/// Per-grid-point sum of loss values across curves.
std::vector<double> column_sums_reference(std::span<const LossCurve> curves);
std::vector<double> column_sums(std::span<const LossCurve> curves);

/// Loss curves of many claim records over one threshold grid.
std::vector<LossCurve> claim_loss_curves_reference(std::span<const ClaimRecord> records, const Grid& grid,
                                                   ClaimLoss kind);
std::vector<LossCurve> claim_loss_curves(std::span<const ClaimRecord> records, const Grid& grid, ClaimLoss kind);

}  // namespace cpc
