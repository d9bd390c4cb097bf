#include <algorithm>

#include "cpc/losses.hpp"
#include "doctest.h"

using namespace cpc;

TEST_CASE("grid rejects unsorted, empty and non-finite points") {
  CHECK_THROWS_AS(Grid({}), std::invalid_argument);
  CHECK_THROWS_AS(Grid({0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(Grid({1.0, 0.5}), std::invalid_argument);
  CHECK_THROWS(Grid({0.0, kInf}, SafeEnd::high));
  const Grid low({0.5, 2.0, kInf}, SafeEnd::low);
  CHECK(low.safe_value() == 0.5);
  CHECK(Grid({0.1, 0.2}).safe_value() == 0.2);
}

TEST_CASE("loss curve values must lie in [0, B]") {
  CHECK_THROWS(LossCurve({0.1, 1.2}, 1.0));
  CHECK_THROWS(LossCurve({-0.1}, 1.0));
  CHECK_THROWS(LossCurve({0.1}, 0.0));
  CHECK(LossCurve({0.0, 0.4, 0.2}, 1.0).max_value() == 0.4);
}

TEST_CASE("fdr loss by hand enumeration") {
  const ClaimRecord r({0.9, 0.6, 0.3}, {1, 0, 1});
  CHECK(fdr_loss(r, 0.5) == doctest::Approx(0.5));  // {0.9 true, 0.6 false}
  CHECK(fdr_loss(r, 0.95) == 0.0);
  CHECK(fdr_loss(ClaimRecord({0.2, 0.7}, {1, 1}), 0.1) == 0.0);
  CHECK(fdr_loss(ClaimRecord(), 0.5) == 0.0);
}

TEST_CASE("recall by hand enumeration") {
  const ClaimRecord r({0.9, 0.6, 0.3}, {1, 0, 1});
  CHECK(recall(r, 0.5) == doctest::Approx(0.5));
  CHECK(recall(r, 0.0) == 1.0);
  CHECK(recall(r, 0.95) == 0.0);
  CHECK(recall(ClaimRecord({0.4}, {0}), 0.9) == 1.0);
}

TEST_CASE("binary loss") {
  CHECK(binary_loss(ClaimRecord({0.9, 0.6}, {1, 0}), 0.5) == 1.0);
  CHECK(binary_loss(ClaimRecord({0.9, 0.6}, {1, 0}), 0.95) == 0.0);
  CHECK(binary_loss(ClaimRecord({0.9, 0.6}, {1, 1}), 0.0) == 0.0);
}

TEST_CASE("claim record validation") {
  CHECK_THROWS(ClaimRecord({0.5}, {1, 0}));
  CHECK_THROWS(ClaimRecord({1.5}, {1}));
  CHECK_THROWS(ClaimRecord({0.5}, {2}));
}

TEST_CASE("fdr loss is not monotone in the threshold") {
  // true at high score, false at mid, true at low
  const ClaimRecord r({0.9, 0.5, 0.1}, {1, 0, 1});
  const double low = fdr_loss(r, 0.05);   // all three: 1/3
  const double mid = fdr_loss(r, 0.3);    // two: 1/2
  const double high = fdr_loss(r, 0.7);   // one: 0
  CHECK(mid > low);
  CHECK(mid > high);
}

TEST_CASE("monotonize is a suffix maximum") {
  const auto m = monotonize(LossCurve({0.1, 0.4, 0.2, 0.0}, 1.0));
  CHECK(m.values() == std::vector<double>{0.4, 0.4, 0.2, 0.0});
  const LossCurve mono({0.5, 0.3, 0.3, 0.1}, 1.0);
  CHECK(monotonize(mono).values() == mono.values());
  CHECK(monotonize(LossCurve({0.25, 0.25, 0.25}, 1.0)).values() == std::vector<double>(3, 0.25));
}

TEST_CASE("monotonize: nonincreasing, dominating, idempotent on random curves") {
  Rng rng = make_rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(12);
    for (auto& x : v) x = uniform01(rng);
    const LossCurve c(v, 1.0);
    const auto m = monotonize(c);
    CHECK(is_nonincreasing(m));
    for (std::size_t k = 0; k < v.size(); ++k) {
      CHECK(m[k] >= c[k]);
      CHECK(m[k] == *std::max_element(v.begin() + static_cast<std::ptrdiff_t>(k), v.end()));
    }
    CHECK(monotonize(m).values() == m.values());
  }
}

TEST_CASE("binary loss curves are nonincreasing") {
  Rng rng = make_rng(9);
  const Grid grid = linspace_grid(0.0, 1.0, 30);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(6);
    std::vector<int> l(6);
    for (std::size_t i = 0; i < 6; ++i) {
      s[i] = uniform01(rng);
      l[i] = uniform01(rng) < 0.6 ? 1 : 0;
    }
    CHECK(is_nonincreasing(claim_loss_curve(ClaimRecord(s, l), grid, ClaimLoss::binary)));
  }
}

TEST_CASE("counterexample family table") {
  const auto f = counterexample_losses(0.4);
  CHECK(f.bound == doctest::Approx(0.6));
  CHECK(f.curves[0].values() == std::vector<double>{f.bound, f.bound / 2, 0.0, 0.0});
  CHECK(f.curves[0][0] == doctest::Approx(0.6));
  CHECK(f.curves[0][1] == doctest::Approx(0.3));
  for (double alpha : {0.05, 0.4, 0.9, 1.0}) {
    const auto g = counterexample_losses(alpha);
    const double b = 1.5 * alpha;
    CHECK(g.bound == b);
    CHECK(g.curves[0].values() == std::vector<double>{b, b / 2, 0.0, 0.0});
    CHECK(g.curves[1].values() == std::vector<double>{b / 2, b, 0.0, 0.0});
    CHECK(g.curves[2].values() == std::vector<double>{b / 2, 0.0, b, 0.0});
    for (const auto& c : g.curves) {
      CHECK(c[3] == 0.0);
      CHECK(c.max_value() == b);
    }
  }
  CHECK_THROWS(counterexample_losses(0.0));
  CHECK_THROWS(counterexample_losses(1.2));
}

TEST_CASE("synthetic non-monotone family") {
  const Grid grid = linspace_grid(0.0, 1.0, 25);
  CHECK(synthetic_nonmonotonic_family(1, 0, grid).empty());
  const auto a = synthetic_nonmonotonic_family(7, 50, grid, 2.0);
  const auto b = synthetic_nonmonotonic_family(7, 50, grid, 2.0);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].values() == b[i].values());
    CHECK(a[i][grid.size() - 1] == 0.0);
    bool interior_min = false;
    for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
      CHECK(a[i][k] >= 0.0);
      CHECK(a[i][k] <= 2.0);
      if (a[i][k] < a[i][k - 1] && a[i][k] < a[i][k + 1]) interior_min = true;
    }
    CHECK(interior_min);
  }
}

TEST_CASE("grid lipschitz constant by hand") {
  const Grid grid({0.0, 0.5, 1.0});
  const std::vector<LossCurve> c{LossCurve({0.0, 0.2, 0.0}, 1.0), LossCurve({1.0, 0.0, 0.0}, 1.0)};
  CHECK(grid_lipschitz(c, grid) == doctest::Approx(2.0));
}
