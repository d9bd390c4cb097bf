#include "cpc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cpc {

Grid::Grid(std::vector<double> points, SafeEnd safe) : points_(std::move(points)), safe_(safe) {
  if (points_.empty()) throw std::invalid_argument("Grid: empty");
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const double p = points_[k];
    const bool sentinel = safe_ == SafeEnd::low && k + 1 == points_.size() && p == kInf;
    if (!std::isfinite(p) && !sentinel) throw std::invalid_argument("Grid: non-finite point");
    if (k > 0 && !(points_[k - 1] < p)) throw std::invalid_argument("Grid: not strictly increasing");
  }
}

std::optional<double> Grid::safe_value() const {
  switch (safe_) {
    case SafeEnd::high: return points_.back();
    case SafeEnd::low: return points_.front();
    case SafeEnd::none: break;
  }
  return std::nullopt;
}

Grid linspace_grid(double lo, double hi, std::size_t count) {
  if (count == 0) throw std::invalid_argument("linspace_grid: count must be positive");
  if (count == 1) return Grid({hi});
  std::vector<double> pts(count);
  for (std::size_t k = 0; k < count; ++k) {
    pts[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  pts.back() = hi;
  return Grid(std::move(pts));
}

LossCurve::LossCurve(std::vector<double> values, double bound) : values_(std::move(values)), bound_(bound) {
  if (!(bound_ > 0.0) || !std::isfinite(bound_)) throw std::invalid_argument("LossCurve: bound must be positive");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= bound_)) {
      throw std::invalid_argument("LossCurve: value " + std::to_string(v) + " outside [0, B]");
    }
  }
}

double LossCurve::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

LossCurve constant_curve(std::size_t size, double value, double bound) {
  return LossCurve(std::vector<double>(size, value), bound);
}

double grid_lipschitz(std::span<const LossCurve> curves, const Grid& grid) {
  double k_max = 0.0;
  for (const auto& c : curves) {
    if (c.size() != grid.size()) throw std::invalid_argument("grid_lipschitz: size mismatch");
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      const double slope = std::abs(c[k + 1] - c[k]) / (grid[k + 1] - grid[k]);
      k_max = std::max(k_max, slope);
    }
  }
  return k_max;
}

ClaimRecord::ClaimRecord(std::vector<double> scores, std::vector<int> labels)
    : scores_(std::move(scores)), labels_(std::move(labels)) {
  if (scores_.size() != labels_.size()) throw std::invalid_argument("ClaimRecord: scores/labels length mismatch");
  for (double s : scores_) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("ClaimRecord: score outside [0, 1]");
  }
  for (int y : labels_) {
    if (y != 0 && y != 1) throw std::invalid_argument("ClaimRecord: label not in {0, 1}");
  }
}

std::size_t ClaimRecord::true_count() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1));
}

double fdr_loss(const ClaimRecord& claims, double tau) {
  std::size_t included = 0;
  std::size_t false_included = 0;
  for (std::size_t j = 0; j < claims.size(); ++j) {
    if (claims.scores()[j] >= tau) {
      ++included;
      if (claims.labels()[j] == 0) ++false_included;
    }
  }
  if (included == 0) return 0.0;
  return static_cast<double>(false_included) / static_cast<double>(included);
}

double recall(const ClaimRecord& claims, double tau) {
  std::size_t truths = 0;
  std::size_t kept = 0;
  for (std::size_t j = 0; j < claims.size(); ++j) {
    if (claims.labels()[j] == 1) {
      ++truths;
      if (claims.scores()[j] >= tau) ++kept;
    }
  }
  if (truths == 0) return 1.0;
  return static_cast<double>(kept) / static_cast<double>(truths);
}

double binary_loss(const ClaimRecord& claims, double tau) {
  for (std::size_t j = 0; j < claims.size(); ++j) {
    if (claims.scores()[j] >= tau && claims.labels()[j] == 0) return 1.0;
  }
  return 0.0;
}

LossCurve claim_loss_curve(const ClaimRecord& claims, const Grid& grid, ClaimLoss kind) {
  // Sweep the grid from the top down, adding claims as tau passes their score.
  std::vector<std::size_t> order(claims.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return claims.scores()[a] > claims.scores()[b]; });

  std::vector<double> values(grid.size());
  std::size_t next = 0;
  std::size_t included = 0;
  std::size_t false_included = 0;
  for (std::size_t k = grid.size(); k-- > 0;) {
    while (next < order.size() && claims.scores()[order[next]] >= grid[k]) {
      ++included;
      if (claims.labels()[order[next]] == 0) ++false_included;
      ++next;
    }
    if (kind == ClaimLoss::fdr) {
      values[k] = included == 0 ? 0.0 : static_cast<double>(false_included) / static_cast<double>(included);
    } else {
      values[k] = false_included > 0 ? 1.0 : 0.0;
    }
  }
  return LossCurve(std::move(values), 1.0);
}

ClaimRecord jitter_scores(const ClaimRecord& claims, Rng& rng, double magnitude) {
  std::vector<double> scores = claims.scores();
  for (double& s : scores) s = std::clamp(s + magnitude * uniform01(rng), 0.0, 1.0);
  return ClaimRecord(std::move(scores), claims.labels());
}

LossCurve monotonize(const LossCurve& curve) {
  std::vector<double> out(curve.values());
  for (std::size_t k = out.size(); k-- > 1;) out[k - 1] = std::max(out[k - 1], out[k]);
  return LossCurve(std::move(out), curve.bound());
}

bool is_nonincreasing(const LossCurve& curve) {
  for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
    if (curve[k + 1] > curve[k]) return false;
  }
  return true;
}

CounterexampleFamily counterexample_losses(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("counterexample_losses: alpha outside (0, 1]");
  const double b = 1.5 * alpha;
  const double h = b / 2.0;
  return CounterexampleFamily{
      Grid({0.25, 0.5, 0.75, 1.0}),
      {LossCurve({b, h, 0.0, 0.0}, b), LossCurve({h, b, 0.0, 0.0}, b), LossCurve({h, 0.0, b, 0.0}, b)},
      b,
      alpha,
  };
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool has_interior_local_min(const std::vector<double>& v) {
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    if (v[k] < v[k - 1] && v[k] < v[k + 1]) return true;
  }
  return false;
}

std::vector<double> draw_bump_curve(Rng& rng, const Grid& grid, double bound) {
  const double a0 = 0.15 + 0.30 * uniform01(rng);
  const double a1 = 0.50 + 1.00 * uniform01(rng);
  const double center = 0.35 + 0.40 * uniform01(rng);
  const double half_width = 0.05 + 0.10 * uniform01(rng);
  const double slope = half_width / 4.0;

  const double lo = grid.front();
  const double span = grid.back() - lo;
  std::vector<double> v(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double u = span > 0.0 ? (grid[k] - lo) / span : 1.0;
    const double bump = sigmoid((u - center + half_width) / slope) - sigmoid((u - center - half_width) / slope);
    v[k] = bound * std::clamp((1.0 - u) * (a0 + a1 * bump), 0.0, 1.0);
  }
  v.back() = 0.0;
  return v;
}

}  // namespace

LossCurve synthetic_nonmonotonic_curve(Rng& rng, const Grid& grid, double bound) {
  std::vector<double> v = draw_bump_curve(rng, grid, bound);
  if (grid.size() >= 3) {
    for (int attempt = 0; !has_interior_local_min(v); ++attempt) {
      if (attempt > 10000) throw std::runtime_error("synthetic_nonmonotonic_curve: grid too coarse for a bump");
      v = draw_bump_curve(rng, grid, bound);
    }
  }
  return LossCurve(std::move(v), bound);
}

std::vector<LossCurve> synthetic_nonmonotonic_family(std::uint64_t seed, std::size_t n, const Grid& grid,
                                                     double bound) {
  Rng rng = make_rng(seed);
  std::vector<LossCurve> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_nonmonotonic_curve(rng, grid, bound));
  return out;
}

LossCurve adversarial_discrete_curve(Rng& rng, const Grid& grid, double rate, double bound) {
  std::vector<double> v(grid.size(), 0.0);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) v[k] = uniform01(rng) < rate ? bound : 0.0;
  return LossCurve(std::move(v), bound);
}

}  // namespace cpc
