#include <cmath>
#include <vector>

#include "doctest.h"
#include "ewfm/error.hpp"
#include "ewfm/kernels.hpp"
#include "test_util.hpp"

using namespace ewfm;
namespace k = ewfm::kernels;

TEST_SUITE("kernels") {

TEST_CASE("scalar table is always available") {
  CHECK(k::supported(k::Isa::scalar));
  CHECK(k::table(k::Isa::scalar).isa == k::Isa::scalar);
  CHECK(k::parse_isa("scalar") == k::Isa::scalar);
  CHECK(k::isa_name(k::Isa::avx2) == "avx2");
  CHECK_THROWS_AS(k::parse_isa("sse9"), InvalidInput);
}

TEST_CASE("scalar kernels against direct loops") {
  const auto& s = k::scalar_table();
  Rng rng(1);
  const std::size_t rows = 5, cols = 7;
  auto w = testutil::normal_vector(rng, rows * cols);
  auto b = testutil::normal_vector(rng, rows);
  auto x = testutil::normal_vector(rng, cols);
  std::vector<double> y(rows);
  s.affine(w.data(), b.data(), x.data(), y.data(), rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * x[c];
    CHECK(y[r] == doctest::Approx(acc).epsilon(1e-14));
  }
  std::vector<double> z{-3.0, 0.0, 2.0};
  std::vector<double> act(3), sig(3);
  s.silu(z.data(), act.data(), sig.data(), 3);
  for (int i = 0; i < 3; ++i) {
    const double sg = 1.0 / (1.0 + std::exp(-z[i]));
    CHECK(sig[i] == doctest::Approx(sg).epsilon(1e-15));
    CHECK(act[i] == doctest::Approx(z[i] * sg).epsilon(1e-15));
  }
}

// Every variant must agree with the scalar reference to rounding on random data,
// including odd lengths that exercise the vector tails.
TEST_CASE("available variants match the scalar reference") {
  const auto& ref = k::scalar_table();
  const k::Table* avx = k::avx2_table();
  if (!avx || !k::supported(k::Isa::avx2)) {
    MESSAGE("avx2 variant not available on this build/host; equivalence skipped");
    return;
  }
  Rng rng(7);
  for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 13u, 31u, 64u, 127u}) {
    const std::size_t rows = n % 9 + 1;
    auto a = testutil::normal_vector(rng, n, 3.0);
    auto b = testutil::normal_vector(rng, n, 3.0);
    CHECK(testutil::rel_err(avx->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), 1.0) < 1e-13);
    CHECK(testutil::rel_err(avx->squared_distance(a.data(), b.data(), n), ref.squared_distance(a.data(), b.data(), n),
                            1.0) < 1e-13);

    auto y1 = b, y2 = b;
    ref.axpy(0.37, a.data(), y1.data(), n);
    avx->axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-14 * (1.0 + std::abs(y1[i])));

    auto w = testutil::normal_vector(rng, rows * n);
    auto bias = testutil::normal_vector(rng, rows);
    std::vector<double> o1(rows), o2(rows);
    ref.affine(w.data(), bias.data(), a.data(), o1.data(), rows, n);
    avx->affine(w.data(), bias.data(), a.data(), o2.data(), rows, n);
    for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-12 * (1.0 + std::abs(o1[i])));
    ref.affine(w.data(), nullptr, a.data(), o1.data(), rows, n);
    avx->affine(w.data(), nullptr, a.data(), o2.data(), rows, n);
    for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-12 * (1.0 + std::abs(o1[i])));

    auto v = testutil::normal_vector(rng, rows);
    std::vector<double> t1(n, 0.5), t2(n, 0.5);
    ref.affine_t_acc(w.data(), v.data(), t1.data(), rows, n);
    avx->affine_t_acc(w.data(), v.data(), t2.data(), rows, n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(t1[i] - t2[i]) <= 1e-12 * (1.0 + std::abs(t1[i])));

    std::vector<double> g1(rows * n, 0.25), g2(rows * n, 0.25);
    ref.outer_acc(-1.5, v.data(), a.data(), g1.data(), rows, n);
    avx->outer_acc(-1.5, v.data(), a.data(), g2.data(), rows, n);
    for (std::size_t i = 0; i < rows * n; ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-13 * (1.0 + std::abs(g1[i])));

    std::vector<double> z = testutil::normal_vector(rng, n, 10.0);
    if (n > 2) {
      z[0] = -800.0;  // exp clamping paths
      z[1] = 800.0;
    }
    std::vector<double> a1(n), s1(n), a2(n), s2(n);
    ref.silu(z.data(), a1.data(), s1.data(), n);
    avx->silu(z.data(), a2.data(), s2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(s1[i] - s2[i]) <= 1e-14);
      CHECK(std::abs(a1[i] - a2[i]) <= 1e-13 * (1.0 + std::abs(a1[i])));
    }
    std::vector<double> up = testutil::normal_vector(rng, n), r1(n), r2(n);
    ref.silu_grad_mul(z.data(), s1.data(), up.data(), r1.data(), n);
    avx->silu_grad_mul(z.data(), s1.data(), up.data(), r2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r1[i] - r2[i]) <= 1e-13 * (1.0 + std::abs(r1[i])));
  }
}

TEST_CASE("selection switches the active table") {
  const k::Isa before = k::active_isa();
  k::select(k::Isa::scalar);
  CHECK(k::active().isa == k::Isa::scalar);
  k::select(before);
  CHECK(k::active_isa() == before);
}

}
