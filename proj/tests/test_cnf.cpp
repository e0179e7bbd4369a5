#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "ewfm/cnf.hpp"
#include "ewfm/error.hpp"
#include "test_util.hpp"

using namespace ewfm;

namespace {

// u(x) = a x + c with no hidden layers and no time dependence.
VectorFieldNet linear_field(std::size_t d, double a, double c = 0.0) {
  VectorFieldNet net(testutil::small_arch(d, {}, 2, 1.0));
  const std::size_t in = net.architecture().input_width();
  for (std::size_t r = 0; r < d; ++r) {
    net.params()[r * in + r] = a;
    net.params()[d * in + r] = c;
  }
  return net;
}

double std_normal_logpdf(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return -0.5 * s - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace

TEST_SUITE("cnf") {

TEST_CASE("identity flow returns the prior draws exactly") {
  const VectorFieldNet net = VectorFieldNet::initialized(testutil::small_arch(3), 1);
  const GaussianPrior prior(3);
  const Matrix s = sample_forward(net, prior, 10, OdeConfig{}, 5);
  for (std::size_t i = 0; i < 10; ++i) {
    Rng rng(derive_seed(5, streams::kSampling, i));
    std::vector<double> x0(3);
    prior.sample(rng, x0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(s(i, j) == x0[j]);
  }
}

TEST_CASE("constant field translates samples") {
  const VectorFieldNet net = linear_field(2, 0.0, 1.5);
  const GaussianPrior prior(2);
  const Matrix s = sample_forward(net, prior, 5, OdeConfig{7}, 2);
  const Matrix s0 = sample_forward(VectorFieldNet(testutil::small_arch(2, {}, 2, 1.0)), prior, 5, OdeConfig{7}, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(s(i, j) == doctest::Approx(s0(i, j) + 1.5).epsilon(1e-14));
  }
}

TEST_CASE("linear field: exponential flow and analytic log-density") {
  const double a = 0.7;
  const std::size_t d = 3;
  const VectorFieldNet net = linear_field(d, a);
  const GaussianPrior prior(d);
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto x0 = testutil::normal_vector(rng, d);
    auto x = x0;
    integrate_flow(net, x, OdeConfig{100});
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(x[j] - std::exp(a) * x0[j]) <= 1e-8);

    const Likelihood ll = log_likelihood(net, prior, x, OdeConfig{100}, DivergenceMode::exact(), 0);
    CHECK(std::abs(ll.log_p1 - (std_normal_logpdf(x0) - a * d)) <= 1e-6);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(ll.x0[j] - x0[j]) <= 1e-6);
  }
  const DensitySamples ds = sample_with_logdensity(net, prior, 20, OdeConfig{100}, DivergenceMode::exact(), 9);
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<double> x0(d);
    for (std::size_t j = 0; j < d; ++j) x0[j] = ds.samples(i, j) * std::exp(-a);
    CHECK(std::abs(ds.log_q[i] - (std_normal_logpdf(x0) - a * d)) <= 1e-6);
  }
}

TEST_CASE("identity flow likelihood is the prior density") {
  const VectorFieldNet net(testutil::small_arch(2));
  const GaussianPrior prior(2);
  const std::vector<double> x{0.3, -1.2};
  const Likelihood ll = log_likelihood(net, prior, x, OdeConfig{}, DivergenceMode::exact(), 0);
  CHECK(ll.log_p1 == doctest::Approx(std_normal_logpdf(x)).epsilon(1e-15));
  const DensitySamples ds = sample_with_logdensity(net, prior, 5, OdeConfig{}, DivergenceMode::hutchinson(2), 1);
  for (std::size_t i = 0; i < 5; ++i) CHECK(ds.log_q[i] == doctest::Approx(std_normal_logpdf(ds.samples.row(i))));
}

TEST_CASE("forward samples and reverse likelihood agree; round trip recovers x0") {
  const VectorFieldNet net = testutil::random_net(testutil::small_arch(2, {16, 16}, 4, 5.0), 44, 0.4);
  const GaussianPrior prior(2);
  const OdeConfig ode{100};
  for (std::uint64_t s = 0; s < 10; ++s) {
    const FlowSample fs = sample_one_with_logdensity(net, prior, ode, DivergenceMode::exact(), s);
    const Likelihood ll = log_likelihood(net, prior, fs.x, ode, DivergenceMode::exact(), 0);
    CHECK(std::abs(ll.log_p1 - fs.log_q) <= 1e-5);
    Rng rng(s);
    std::vector<double> x0(2);
    prior.sample(rng, x0);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(ll.x0[j] - x0[j]) <= 1e-6);
  }
}

TEST_CASE("1-D density integrates to one") {
  const VectorFieldNet net = testutil::random_net(testutil::small_arch(1, {16, 16}, 4, 5.0), 5, 0.4);
  const GaussianPrior prior(1);
  const double lo = -12.0, hi = 12.0;
  const int n = 2400;
  const double h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const std::vector<double> x{lo + h * i};
    const double p = std::exp(log_likelihood(net, prior, x, OdeConfig{100}, DivergenceMode::exact(), 0).log_p1);
    total += (i == 0 || i == n ? 0.5 : 1.0) * p * h;
  }
  CHECK(std::abs(total - 1.0) <= 1e-3);
}

TEST_CASE("Hutchinson likelihood is unbiased") {
  const VectorFieldNet net = testutil::random_net(testutil::small_arch(3, {8, 8}, 4, 5.0), 61, 0.5);
  const GaussianPrior prior(3);
  const std::vector<double> x{0.4, -0.8, 1.1};
  const OdeConfig ode{20};
  const double exact = log_likelihood(net, prior, x, ode, DivergenceMode::exact(), 0).log_p1;
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = log_likelihood(net, prior, x, ode, DivergenceMode::hutchinson(1), i).log_p1;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));
  CHECK(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("divergent integration reports the step") {
  const VectorFieldNet net = linear_field(2, 0.0, 1e308);
  std::vector<double> x{0.0, 0.0};
  try {
    integrate_flow(net, x, OdeConfig{10});
    FAIL("expected divergence");
  } catch (const OdeDivergence& e) {
    CHECK(e.step() < 10);
  }
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(OdeConfig{0}.validate(), ConfigError);
  CHECK_THROWS_AS(DivergenceMode::hutchinson(0).validate(), ConfigError);
}

TEST_CASE("subspace prior") {
  const GaussianPrior p(6, 3);
  CHECK(p.effective_dim() == 3);
  Rng rng(1);
  std::vector<double> x(6);
  p.sample(rng, x);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(x[k] + x[3 + k]) < 1e-14);
  // On the subspace the density is a 3-D standard normal in orthonormal coordinates.
  const std::vector<double> y{1, 0, 0, -1, 0, 0};
  CHECK(p.log_density(y) == doctest::Approx(-0.5 * 2.0 - 1.5 * std::log(2 * std::numbers::pi)));
}

}
