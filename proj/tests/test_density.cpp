#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ecgot/density.hpp"
#include "ecgot/ot.hpp"
#include "ecgot/rng.hpp"
#include "helpers.hpp"

using namespace ecgot;
using testutil::bump_density;
using testutil::dirac_density;

namespace {

double total_variation(const DensityOnGrid& a, const DensityOnGrid& b) {
  REQUIRE(a.size() == b.size());
  double tv = 0.0;
  for (int i = 0; i < a.size(); ++i) tv += std::abs(a.mass[i] - b.mass[i]);
  return 0.5 * tv;
}

DensityOnGrid shift_cells(const DensityOnGrid& d, int k) {
  DensityOnGrid out = d;
  std::fill(out.mass.begin(), out.mass.end(), 0.0);
  for (int i = 0; i < d.size(); ++i) {
    if (d.mass[i] == 0.0) continue;
    const int j = i + k;
    REQUIRE(j >= 0);
    REQUIRE(j < d.size());
    out.mass[j] = d.mass[i];
  }
  return out;
}

}  // namespace

TEST_CASE("to_density: constant signal becomes uniform", "[density]") {
  std::vector<double> x{5.0, 5.0, 5.0, 5.0};
  const auto d = to_density(x);
  for (double m : d.mass) CHECK(m == Catch::Approx(0.25).margin(1e-15));
  CHECK(d.offset == Catch::Approx(5.0));
  CHECK(d.scale == 0.0);
}

TEST_CASE("to_density: unit-mass nonnegative signal is nearly fixed",
          "[density]") {
  std::vector<double> x{0.0, 0.2, 0.5, 0.3, 0.0};
  const auto d = to_density(x);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(d.mass[i] - x[i]) <= kDensityFloorEta);
  CHECK(d.offset == 0.0);
}

TEST_CASE("to_density: output is a strictly positive unit-mass density",
          "[density]") {
  SplitMix64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(32);
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    const auto d = to_density(x);
    double sum = 0.0;
    for (double m : d.mass) {
      CHECK(m > 0.0);
      sum += m;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("to_density rejects non-finite input", "[density]") {
  std::vector<double> x{0.0, std::nan(""), 1.0};
  CHECK_THROWS_AS(to_density(x), std::invalid_argument);
}

TEST_CASE("w2_1d: identical densities cost zero", "[density]") {
  const auto d = bump_density(50, 0.4, 0.1);
  CHECK(w2_1d(d, d) == 0.0);
}

TEST_CASE("w2_1d: Dirac pair costs squared separation", "[density]") {
  // nodes of an 11-point grid sit exactly on 0.2 and 0.7
  const auto mu = dirac_density(11, 0.2);
  const auto nu = dirac_density(11, 0.7);
  CHECK(w2_1d(mu, nu) == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("w2_1d matches the entropic solver on random pairs", "[density]") {
  SplitMix64 rng(123);
  const int grid = 50;
  for (int rep = 0; rep < 5; ++rep) {
    const auto mu =
        bump_density(grid, rng.uniform(0.15, 0.45), rng.uniform(0.05, 0.12));
    const auto nu =
        bump_density(grid, rng.uniform(0.55, 0.85), rng.uniform(0.05, 0.12));
    const double closed = w2_1d(mu, nu);

    const CostMatrix cost = CostMatrix::squared_grid(grid);
    SinkhornParams params;
    params.lambda = 1e-3 * cost.m.maxCoeff();
    params.tol = 1e-9;
    params.max_iter = 20000;
    const auto entropic =
        sinkhorn(cost, DiscreteMeasure::from_weights(Eigen::Map<const Eigen::VectorXd>(
                           mu.mass.data(), grid)),
                 DiscreteMeasure::from_weights(
                     Eigen::Map<const Eigen::VectorXd>(nu.mass.data(), grid)),
                 params);
    CHECK(std::abs(closed - entropic.cost) / closed < 1e-2);
  }
}

TEST_CASE("w2_1d: symmetry, nonnegativity, triangle inequality", "[density]") {
  SplitMix64 rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a =
        bump_density(40, rng.uniform(0.1, 0.9), rng.uniform(0.04, 0.2));
    const auto b =
        bump_density(40, rng.uniform(0.1, 0.9), rng.uniform(0.04, 0.2));
    const auto c =
        bump_density(40, rng.uniform(0.1, 0.9), rng.uniform(0.04, 0.2));
    const double ab = w2_1d(a, b), ba = w2_1d(b, a);
    CHECK(ab >= 0.0);
    CHECK(ab == Catch::Approx(ba).margin(1e-14));
    const double ac = w2_1d(a, c), cb = w2_1d(c, b);
    CHECK(std::sqrt(ab) <= std::sqrt(ac) + std::sqrt(cb) + 1e-9);
  }
}

namespace {

// bump with compact support so cell-shifts stay on the grid
DensityOnGrid banded_bump(int grid, double center, double sigma, int lo,
                          int hi) {
  DensityOnGrid d;
  d.mass.assign(grid, 0.0);
  double sum = 0.0;
  for (int i = lo; i <= hi; ++i) {
    const double x = static_cast<double>(i) / (grid - 1);
    d.mass[i] =
        std::exp(-0.5 * (x - center) * (x - center) / (sigma * sigma)) + 1e-4;
    sum += d.mass[i];
  }
  for (double& m : d.mass) m /= sum;
  return d;
}

}  // namespace

TEST_CASE("w2_1d translation properties", "[density]") {
  SplitMix64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const int grid = 41;
    const double h = 1.0 / (grid - 1);
    const auto mu = banded_bump(grid, 0.35, rng.uniform(0.04, 0.08), 6, 22);
    const auto nu = banded_bump(grid, 0.45, rng.uniform(0.04, 0.08), 10, 26);
    const int k = 1 + static_cast<int>(rng.below(4));

    // shifting both measures by the same amount leaves the cost unchanged
    const double base = w2_1d(mu, nu);
    const double shifted = w2_1d(shift_cells(mu, k), shift_cells(nu, k));
    CHECK(shifted == Catch::Approx(base).epsilon(1e-10).margin(1e-12));

    // shifting one of two identical shapes costs exactly the squared shift
    const double s = k * h;
    CHECK(w2_1d(mu, shift_cells(mu, k)) ==
          Catch::Approx(s * s).epsilon(1e-10));
  }
}

TEST_CASE("quantile_interpolate endpoints", "[density]") {
  const auto mu = bump_density(50, 0.3, 0.07);
  const auto nu = bump_density(50, 0.7, 0.12);
  CHECK(total_variation(quantile_interpolate(mu, nu, 0.0), mu) < 1e-3);
  CHECK(total_variation(quantile_interpolate(mu, nu, 1.0), nu) < 1e-3);
}

TEST_CASE("quantile_interpolate: Dirac midpoint", "[density]") {
  const auto mu = dirac_density(11, 0.2);
  const auto nu = dirac_density(11, 0.6);
  const auto mid = quantile_interpolate(mu, nu, 0.5);
  const auto expect = dirac_density(11, 0.4);
  CHECK(total_variation(mid, expect) < 1e-12);
}

TEST_CASE("quantile_interpolate rejects alpha outside [0,1]", "[density]") {
  const auto d = bump_density(20, 0.5, 0.1);
  CHECK_THROWS_AS(quantile_interpolate(d, d, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(quantile_interpolate(d, d, 1.1), std::invalid_argument);
}

TEST_CASE("displacement scaling: cost grows as alpha squared", "[density]") {
  SplitMix64 rng(2024);
  const int grid = 50;
  for (int rep = 0; rep < 20; ++rep) {
    const auto mu =
        bump_density(grid, rng.uniform(0.15, 0.4), rng.uniform(0.06, 0.15));
    const auto nu =
        bump_density(grid, rng.uniform(0.6, 0.85), rng.uniform(0.06, 0.15));
    const double full = w2_1d(mu, nu);
    for (double alpha : {0.25, 0.5, 0.75}) {
      const auto mid = quantile_interpolate(mu, nu, alpha);
      const double part = w2_1d(mu, mid);
      CHECK(part == Catch::Approx(alpha * alpha * full).epsilon(1e-3));
    }
  }
}

TEST_CASE("density_to_beat: inverse of to_density up to the floor",
          "[density]") {
  SplitMix64 rng(31);
  std::vector<double> x(64);
  for (double& v : x) v = rng.uniform(-1.0, 2.0);
  const auto d = to_density(x);
  const auto beat = density_to_beat({d}, 64, 100.0);
  double range = *std::max_element(x.begin(), x.end()) -
                 *std::min_element(x.begin(), x.end());
  for (int i = 0; i < 64; ++i)
    CHECK(std::abs(beat.samples[i] - x[i]) <=
          kDensityFloorEta * range + 1e-5);
}

TEST_CASE("density_to_beat: uniform density gives a constant signal",
          "[density]") {
  DensityOnGrid d;
  d.mass.assign(10, 0.1);
  d.offset = 0.0;
  d.scale = 1.0;
  const auto beat = density_to_beat({d}, 10, 50.0);
  for (float v : beat.samples) CHECK(v == Catch::Approx(0.1).margin(1e-7));
}

TEST_CASE("density round trip on a smooth beat", "[density]") {
  const auto beat = testutil::bump_beat(
      100, 100.0, {{1.0, 0.5, 0.05}, {0.25, 0.75, 0.08}});
  const auto lead = testutil::lead_as_doubles(beat);
  const auto d = to_density(lead);
  const auto back = density_to_beat({d}, 100, 100.0);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 100; ++i) {
    num += (back.samples[i] - lead[i]) * (back.samples[i] - lead[i]);
    den += lead[i] * lead[i];
  }
  CHECK(std::sqrt(num / den) <= 0.02);
}

TEST_CASE("density_to_beat rejects inconsistent grids", "[density]") {
  const auto a = bump_density(30, 0.5, 0.1);
  const auto b = bump_density(40, 0.5, 0.1);
  CHECK_THROWS_AS(density_to_beat({a, b}, 30), std::invalid_argument);
}
