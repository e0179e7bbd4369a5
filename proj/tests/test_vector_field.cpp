#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "ewfm/error.hpp"
#include "ewfm/vector_field.hpp"
#include "test_util.hpp"

using namespace ewfm;

namespace {

// Straight loops over the documented parameter layout (per layer: W row-major, then b).
std::vector<double> oracle_forward(const VectorFieldNet& net, double t, const std::vector<double>& x) {
  const auto& a = net.architecture();
  std::vector<double> in = x;
  const std::size_t half = a.time_embed_dim / 2;
  std::vector<double> emb(a.time_embed_dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double w = half == 1 ? 1.0 : std::pow(a.time_max_frequency, double(k) / double(half - 1));
    emb[k] = std::sin(w * t);
    emb[half + k] = std::cos(w * t);
  }
  in.insert(in.end(), emb.begin(), emb.end());
  std::vector<std::size_t> widths = a.hidden;
  widths.push_back(a.dim);
  std::size_t off = 0;
  const auto p = net.params();
  for (std::size_t l = 0; l < widths.size(); ++l) {
    std::vector<double> out(widths[l]);
    for (std::size_t r = 0; r < widths[l]; ++r) {
      long double acc = 0;
      for (std::size_t c = 0; c < in.size(); ++c) acc += (long double)p[off + r * in.size() + c] * in[c];
      acc += p[off + widths[l] * in.size() + r];
      out[r] = (double)acc;
    }
    off += widths[l] * in.size() + widths[l];
    if (l + 1 < widths.size()) {
      for (double& v : out) v = v / (1.0 + std::exp(-v));
    }
    in = out;
  }
  return in;
}

double upstream_dot(const VectorFieldNet& net, double t, std::span<const double> x, std::span<const double> up) {
  const auto u = net.forward(t, x);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * up[i];
  return s;
}

}  // namespace

TEST_SUITE("vector_field") {

TEST_CASE("time embedding values") {
  const auto e0 = time_embedding(0.0, 8);
  for (int k = 0; k < 4; ++k) {
    CHECK(e0[k] == 0.0);
    CHECK(e0[4 + k] == 1.0);
  }
  const auto e = time_embedding(0.5, 4, 1000.0);
  CHECK(std::abs(e[0] - std::sin(0.5)) <= 1e-15);
  CHECK(std::abs(e[1] - std::sin(500.0)) <= 1e-15);
  CHECK(std::abs(e[2] - std::cos(0.5)) <= 1e-15);
  CHECK(std::abs(e[3] - std::cos(500.0)) <= 1e-15);
  CHECK_THROWS_AS(time_embedding(0.1, 3), ConfigError);
}

TEST_CASE("time embedding derivative bound") {
  const std::size_t dim = 10;
  const double maxf = 1000.0;
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double t = u(rng), s = u(rng);
    const auto a = time_embedding(t, dim, maxf), b = time_embedding(s, dim, maxf);
    for (std::size_t k = 0; k < dim / 2; ++k) {
      const double w = std::pow(maxf, double(k) / double(dim / 2 - 1));
      CHECK(std::abs(a[k] - b[k]) <= w * std::abs(t - s) + 1e-15);
      CHECK(std::abs(a[dim / 2 + k] - b[dim / 2 + k]) <= w * std::abs(t - s) + 1e-15);
    }
  }
}

TEST_CASE("zero parameters give a zero field") {
  VectorFieldNet net(testutil::small_arch(3));
  const auto u = net.forward(0.3, std::vector<double>{1.0, -2.0, 5.0});
  for (double v : u) CHECK(v == 0.0);
  const VectorFieldNet init = VectorFieldNet::initialized(testutil::small_arch(3), 4);
  for (double v : init.forward(0.7, std::vector<double>{1.0, -2.0, 5.0})) CHECK(v == 0.0);
}

TEST_CASE("affine network without hidden layers") {
  auto arch = testutil::small_arch(2, {}, 2, 1.0);
  VectorFieldNet net = testutil::random_net(arch, 5);
  // Zero the bias: output = W [x; embed(t)].
  const std::size_t in = arch.input_width();
  for (std::size_t i = 2 * in; i < net.num_params(); ++i) net.params()[i] = 0.0;
  const std::vector<double> x{0.3, -1.1};
  const double t = 0.25;
  const std::vector<double> z{x[0], x[1], std::sin(t), std::cos(t)};
  const auto u = net.forward(t, x);
  for (std::size_t r = 0; r < 2; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < in; ++c) acc += net.params()[r * in + c] * z[c];
    CHECK(u[r] == doctest::Approx(acc).epsilon(1e-15));
  }
  GradTape tape;
  net.forward(t, x, tape);
  const std::vector<double> up{0.7, -0.2};
  const auto gx = net.backward_input(tape, up);
  for (std::size_t c = 0; c < 2; ++c) {
    const double want = net.params()[0 * in + c] * up[0] + net.params()[1 * in + c] * up[1];
    CHECK(gx[c] == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("forward matches an independent implementation") {
  Rng rng(17);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto arch = testutil::small_arch(3, {12, 9, 7}, 6, 50.0);
    const VectorFieldNet net = testutil::random_net(arch, seed, 0.6);
    const auto x = testutil::normal_vector(rng, 3);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto got = net.forward(t, x);
    const auto want = oracle_forward(net, t, x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12 * std::max(1.0, std::abs(want[i])));
  }
}

TEST_CASE("parameter and input gradients against central differences") {
  const double h = 1e-6;
  Rng rng(99);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto arch = testutil::small_arch(2, {16, 16}, 4, 10.0);
    VectorFieldNet net = testutil::random_net(arch, 1000 + seed);
    const auto x = testutil::normal_vector(rng, 2);
    const auto up = testutil::normal_vector(rng, 2);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    GradTape tape;
    net.forward(t, x, tape);
    const auto gp = net.backward_params(tape, up);
    const auto gx = net.backward_input(tape, up);
    for (std::size_t i = 0; i < net.num_params(); ++i) {
      const double keep = net.params()[i];
      net.params()[i] = keep + h;
      const double fp = upstream_dot(net, t, x, up);
      net.params()[i] = keep - h;
      const double fm = upstream_dot(net, t, x, up);
      net.params()[i] = keep;
      worst = std::max(worst, testutil::rel_err(gp[i], (fp - fm) / (2 * h), 1e-5));
    }
    for (std::size_t i = 0; i < 2; ++i) {
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (upstream_dot(net, t, xp, up) - upstream_dot(net, t, xm, up)) / (2 * h);
      worst = std::max(worst, testutil::rel_err(gx[i], fd, 1e-5));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("gradient linearity and zero upstream") {
  const auto arch = testutil::small_arch(3);
  const VectorFieldNet net = testutil::random_net(arch, 8);
  GradTape tape;
  net.forward(0.4, std::vector<double>{0.1, 0.2, -0.3}, tape);
  const auto g0 = net.backward_params(tape, std::vector<double>{0, 0, 0});
  for (double g : g0) CHECK(g == 0.0);
  for (double g : net.backward_input(tape, std::vector<double>{0, 0, 0})) CHECK(g == 0.0);
  const std::vector<double> v{0.5, -1.0, 2.0}, v3{1.5, -3.0, 6.0};
  const auto a = net.backward_params(tape, v), b = net.backward_params(tape, v3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(3.0 * a[i]).epsilon(1e-13));
}

TEST_CASE("accumulating backward adds scale times gradient") {
  const VectorFieldNet net = testutil::random_net(testutil::small_arch(2), 12);
  GradTape tape;
  net.forward(0.9, std::vector<double>{1.0, 2.0}, tape);
  const std::vector<double> up{1.0, -1.0};
  const auto g = net.backward_params(tape, up);
  std::vector<double> acc(g.size(), 1.0);
  net.backward_params(tape, up, acc, 0.25);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(acc[i] == doctest::Approx(1.0 + 0.25 * g[i]).epsilon(1e-14));
}

TEST_CASE("tape mismatch is an internal error") {
  const VectorFieldNet a = testutil::random_net(testutil::small_arch(2), 1);
  const VectorFieldNet b = testutil::random_net(testutil::small_arch(2, {8}), 1);
  GradTape tape;
  a.forward(0.1, std::vector<double>{0, 0}, tape);
  CHECK_THROWS_AS(b.backward_params(tape, std::vector<double>{1, 1}), InternalError);
}

TEST_CASE("non-finite activations report the layer") {
  VectorFieldNet net = testutil::random_net(testutil::small_arch(2, {4}), 3);
  for (double& p : net.params()) p = 1e300;
  try {
    net.forward(0.5, std::vector<double>{1e10, 1e10});
    FAIL("expected overflow");
  } catch (const NumericalOverflow& e) {
    CHECK(e.layer() <= 1);
  }
}

TEST_CASE("exact trace equals the Jacobian diagonal sum") {
  const VectorFieldNet net = testutil::random_net(testutil::small_arch(4), 31);
  const std::vector<double> x{0.2, -0.4, 1.0, 0.5};
  GradTape tape;
  std::vector<double> vel(4);
  const double tr = net.forward_with_trace(0.6, x, nullptr, tape, vel);
  GradTape t2;
  net.forward(0.6, x, t2);
  double want = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> e(4, 0.0);
    e[i] = 1.0;
    want += net.backward_input(t2, e)[i];
  }
  CHECK(tr == doctest::Approx(want).epsilon(1e-12));
  const auto u = net.forward(0.6, x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(vel[i] == u[i]);
}

TEST_CASE("centered networks stay on the zero-centroid subspace") {
  auto arch = testutil::small_arch(6);
  arch.center_space_dim = 3;
  const VectorFieldNet net = testutil::random_net(arch, 2);
  const std::vector<double> x{1, 2, 3, -1, 0, 4};
  const auto u = net.forward(0.3, x);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(u[k] + u[3 + k]) < 1e-14);
  std::vector<double> shifted = x;
  for (int i = 0; i < 2; ++i) shifted[3 * i] += 5.0;
  const auto u2 = net.forward(0.3, shifted);
  for (int i = 0; i < 6; ++i) CHECK(u2[i] == doctest::Approx(u[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip and schema errors") {
  const auto dir = std::filesystem::temp_directory_path() / "ewfm_vf_test";
  std::filesystem::create_directories(dir);
  auto arch = testutil::small_arch(3, {5, 7}, 6, 123.5);
  const VectorFieldNet net = testutil::random_net(arch, 77);
  save_checkpoint(dir / "a.ckpt", net, 42);
  const Checkpoint ck = load_checkpoint(dir / "a.ckpt");
  CHECK(ck.seed == 42);
  CHECK(ck.net.architecture() == net.architecture());
  for (std::size_t i = 0; i < net.num_params(); ++i) CHECK(ck.net.params()[i] == net.params()[i]);

  std::ifstream in(dir / "a.ckpt");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  const auto pos = text.find("schema_version 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 16, "schema_version 9");
  std::ofstream(dir / "b.ckpt") << text;
  CHECK_THROWS_AS(load_checkpoint(dir / "b.ckpt"), ConfigError);
  std::filesystem::remove_all(dir);
}

}
