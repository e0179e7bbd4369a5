#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ewfm/energy.hpp"
#include "ewfm/error.hpp"
#include "test_util.hpp"

using namespace ewfm;

namespace {

// Naive mixture density in long double, no log-space tricks.
double gmm_oracle(const GmmSpec& spec, const std::vector<double>& x) {
  const std::size_t d = x.size();
  const std::size_t k = spec.means.size();
  long double sum = 0.0L;
  for (std::size_t c = 0; c < k; ++c) {
    long double r2 = 0.0L;
    for (std::size_t i = 0; i < d; ++i) {
      const long double diff = static_cast<long double>(x[i]) - spec.means[c][i];
      r2 += diff * diff;
    }
    const long double var = spec.variance;
    const long double norm = std::pow(2.0L * std::numbers::pi_v<long double>* var, -0.5L * d);
    sum += (1.0L / k) * norm * std::exp(-0.5L * r2 / var);
  }
  return static_cast<double>(-std::log(sum));
}

double dw_oracle_reversed(const std::vector<double>& x, std::size_t n, std::size_t sd, const DoubleWellParams& p) {
  double total = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = n; j-- > i + 1;) {
      double r2 = 0.0;
      for (std::size_t c = 0; c < sd; ++c) r2 += (x[i * sd + c] - x[j * sd + c]) * (x[i * sd + c] - x[j * sd + c]);
      const double s = std::sqrt(r2) - p.d0;
      total += p.a * s + p.b * s * s + p.c * s * s * s * s;
    }
  }
  return total / (2.0 * p.tau);
}

}  // namespace

TEST_SUITE("energy") {

TEST_CASE("single standard Gaussian at its mean") {
  GmmSpec spec;
  spec.means = {{0.0, 0.0}};
  GmmEnergy e(spec);
  CHECK(e.energy(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
}

TEST_CASE("symmetric two-component mixture") {
  GmmSpec spec;
  spec.means = {{-2.0, 1.0}, {2.0, -1.0}};
  GmmEnergy e(spec);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto x = testutil::normal_vector(rng, 2, 3.0);
    std::vector<double> neg{-x[0], -x[1]};
    CHECK(e.energy(x) == doctest::Approx(e.energy(neg)).epsilon(1e-14));
  }
}

TEST_CASE("ring mixture matches the extended-precision oracle") {
  const GmmSpec spec = ring_gmm(8, 6.0);
  GmmEnergy e(spec);
  // 20 grid points, plus random points within 6 sigma of some mean.
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) pts.push_back({-8.0 + 4.0 * i, -6.0 + 4.0 * j});
  }
  Rng rng(11);
  std::uniform_int_distribution<int> comp(0, 7);
  for (int i = 0; i < 200; ++i) {
    auto x = testutil::normal_vector(rng, 2, 2.0);
    const auto& m = spec.means[comp(rng)];
    x[0] += m[0];
    x[1] += m[1];
    pts.push_back(x);
  }
  for (const auto& x : pts) {
    const double oracle = gmm_oracle(spec, x);
    CHECK(std::abs(e.energy(x) - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("mixture with full covariances matches a direct evaluation") {
  GmmSpec spec;
  spec.means = {{0.0, 0.0}, {3.0, 1.0}};
  spec.covariances = {{2.0, 0.5, 0.5, 1.0}, {1.0, -0.3, -0.3, 0.5}};
  spec.weights = {0.3, 0.7};
  GmmEnergy e(spec);
  auto dens = [&](const std::vector<double>& x) {
    long double total = 0;
    for (int c = 0; c < 2; ++c) {
      const auto& s = spec.covariances[c];
      const long double det = s[0] * s[3] - s[1] * s[2];
      const long double dx = x[0] - spec.means[c][0], dy = x[1] - spec.means[c][1];
      const long double q = (s[3] * dx * dx - 2 * s[1] * dx * dy + s[0] * dy * dy) / det;
      total += spec.weights[c] * std::exp(-0.5L * q) / (2 * std::numbers::pi_v<long double> * std::sqrt(det));
    }
    return static_cast<double>(-std::log(total));
  };
  for (auto x : std::vector<std::vector<double>>{{0, 0}, {1, 2}, {3, 1}, {-2, 0.5}}) {
    CHECK(e.energy(x) == doctest::Approx(dens(x)).epsilon(1e-12));
  }
}

TEST_CASE("mixture validation") {
  GmmSpec bad;
  bad.means = {{0.0}, {1.0}};
  bad.weights = {0.5, 0.6};
  CHECK_THROWS_AS(GmmEnergy{bad}, InvalidInput);
  GmmSpec npd;
  npd.means = {{0.0, 0.0}};
  npd.covariances = {{1.0, 2.0, 2.0, 1.0}};
  CHECK_THROWS_AS(GmmEnergy{npd}, InvalidInput);
  GmmEnergy ok(ring_gmm(4, 2.0));
  CHECK_THROWS_AS(ok.energy(std::vector<double>{NAN, 0.0}), InvalidInput);
  CHECK_THROWS_AS(ok.energy(std::vector<double>{0.0}), InvalidInput);
}

TEST_CASE("layout generators") {
  const GmmSpec grid = grid_gmm(40, 40.0);
  CHECK(grid.means.size() == 40);
  for (const auto& m : grid.means) {
    CHECK(std::abs(m[0]) <= 40.0);
    CHECK(std::abs(m[1]) <= 40.0);
  }
  const GmmSpec a = uniform_random_gmm(40, 2, 40.0, 5);
  const GmmSpec b = uniform_random_gmm(40, 2, 40.0, 5);
  CHECK(a.means == b.means);
  for (const auto& m : a.means) CHECK(std::abs(m[0]) <= 40.0);
  const GmmSpec ring = ring_gmm(8, 6.0);
  for (const auto& m : ring.means) CHECK(std::hypot(m[0], m[1]) == doctest::Approx(6.0));
}

TEST_CASE("eval counter increments by batch size") {
  GmmEnergy e(ring_gmm(8, 6.0));
  e.reset_eval_count();
  Matrix xs(17, 2);
  e.energies(xs);
  CHECK(e.eval_count() == 17);
  e.energy(xs.row(0));
  CHECK(e.eval_count() == 18);
}

TEST_CASE("double well: pair terms at and away from d0") {
  const DoubleWellParams p;  // a=0, b=-4, c=0.9, d0=4, tau=1
  DoubleWellEnergy two({2, 2}, p);
  CHECK(two.energy(std::vector<double>{0.0, 0.0, 4.0, 0.0}) == 0.0);
  CHECK(two.energy(std::vector<double>{0.0, 0.0, 5.0, 0.0}) == doctest::Approx(-1.55).epsilon(1e-15));
  // Equilateral triangle: every pair at d0.
  DoubleWellEnergy three({3, 2}, p);
  const double h = 4.0 * std::sqrt(3.0) / 2.0;
  CHECK(std::abs(three.energy(std::vector<double>{0, 0, 4, 0, 2, h})) < 1e-14);
  CHECK(two.pair_term(5.0) == doctest::Approx(-3.1));
}

TEST_CASE("double well: permuted-order oracle, permutation and translation invariance") {
  DoubleWellParams p;
  p.a = 0.3;
  DoubleWellEnergy e({4, 2}, p);
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = testutil::normal_vector(rng, 8, 2.5);
    CHECK(std::abs(e.energy(x) - dw_oracle_reversed(x, 4, 2, p)) <= 1e-12 * std::max(1.0, std::abs(e.energy(x))));
    auto shifted = x;
    for (std::size_t i = 0; i < 4; ++i) {
      shifted[2 * i] += 3.7;
      shifted[2 * i + 1] -= 1.2;
    }
    CHECK(std::abs(e.energy(shifted) - e.energy(x)) <= 1e-10);
    auto perm = x;
    std::swap(perm[0], perm[6]);
    std::swap(perm[1], perm[7]);
    CHECK(std::abs(e.energy(perm) - e.energy(x)) <= 1e-10);
  }
  CHECK_THROWS_AS(e.energy(std::vector<double>(6, 0.0)), InvalidInput);
}

TEST_CASE("Lennard-Jones pair values") {
  LennardJonesParams p;
  p.c_osc = 0.0;
  LennardJonesEnergy e({2, 3}, p);
  CHECK(e.energy(std::vector<double>{0, 0, 0, 1, 0, 0}) == doctest::Approx(-1.0).epsilon(1e-15));
  // (r_m/r)^6 = 1/2: eps * (1/4 - 2 * 1/2).
  const double r = std::pow(2.0, 1.0 / 6.0);
  CHECK(e.energy(std::vector<double>{0, 0, 0, 0, r, 0}) == doctest::Approx(-0.75).epsilon(1e-14));
  p.epsilon = 2.0;
  p.r_m = 1.5;
  LennardJonesEnergy e2({2, 3}, p);
  CHECK(e2.energy(std::vector<double>{0, 0, 0, 0, 0, 1.5}) == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("Lennard-Jones singular configurations and invariances") {
  LennardJonesParams p;
  p.use_floor = false;
  LennardJonesEnergy e({3, 3}, p);
  CHECK_THROWS_AS(e.energy(std::vector<double>{1, 1, 1, 1, 1, 1, 0, 0, 0}), SingularConfiguration);
  e.set_use_floor(true);
  CHECK(std::isfinite(e.energy(std::vector<double>{1, 1, 1, 1, 1, 1, 0, 0, 0})));

  LennardJonesEnergy lj({5, 3}, LennardJonesParams{});
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto x = testutil::normal_vector(rng, 15, 1.0);
    auto shifted = x;
    for (std::size_t i = 0; i < 5; ++i) {
      shifted[3 * i] += 2.0;
      shifted[3 * i + 2] -= 0.5;
    }
    const double ex = lj.energy(x);
    CHECK(std::abs(lj.energy(shifted) - ex) <= 1e-10 * std::max(1.0, std::abs(ex)));
    auto perm = x;
    for (int c = 0; c < 3; ++c) std::swap(perm[c], perm[12 + c]);
    CHECK(std::abs(lj.energy(perm) - ex) <= 1e-10 * std::max(1.0, std::abs(ex)));
  }
}

TEST_CASE("Boltzmann log-density") {
  FunctionEnergy three("c", 1, 1.0, [](std::span<const double>) { return 3.0; });
  FunctionEnergy three_hot("c", 1, 3.0, [](std::span<const double>) { return 3.0; });
  const std::vector<double> x{0.2};
  CHECK(boltzmann_log_density_unnorm(three, x) == -3.0);
  CHECK(boltzmann_log_density_unnorm(three_hot, x) == -1.0);
  GmmEnergy cold(ring_gmm(3, 2.0), 1.0), hot(ring_gmm(3, 2.0), 2.0);
  const std::vector<double> y{0.4, -1.0};
  CHECK(boltzmann_log_density_unnorm(hot, y) == doctest::Approx(0.5 * boltzmann_log_density_unnorm(cold, y)));
}

TEST_CASE("energies are deterministic") {
  LennardJonesEnergy lj({4, 3}, LennardJonesParams{});
  Rng rng(9);
  auto x = testutil::normal_vector(rng, 12);
  CHECK(lj.energy(x) == lj.energy(x));
  HarmonicEnergy h(3, 2.0);
  CHECK(h.energy(std::vector<double>{2, 0, 0}) == doctest::Approx(0.5));
}

}
