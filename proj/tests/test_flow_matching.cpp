#include <cmath>
#include <vector>

#include "doctest.h"
#include "ewfm/flow_matching.hpp"
#include "test_util.hpp"

using namespace ewfm;

TEST_SUITE("flow_matching") {

TEST_CASE("path endpoints") {
  const std::vector<double> x0{1.0, -2.0}, x1{3.0, 5.0};
  const auto d0 = make_conditional(0.0, x0, x1);
  const auto d1 = make_conditional(1.0, x0, x1);
  CHECK(d0.xt == x0);
  CHECK(d1.xt == x1);
  CHECK(d0.target == std::vector<double>{2.0, 7.0});
  const auto dh = make_conditional(0.25, x0, x1);
  CHECK(dh.xt[0] == 0.75 * 1.0 + 0.25 * 3.0);
}

TEST_CASE("interpolant mean over prior draws") {
  const GaussianPrior prior(2);
  const std::vector<double> x1{2.0, -1.0};
  Rng rng(5);
  // E[x_t | x1, t] = t x1: check the residual x_t - t x1 = (1-t) x0 has zero mean.
  const int n = 100000;
  double sum[2] = {0, 0}, sum2[2] = {0, 0};
  for (int i = 0; i < n; ++i) {
    const auto d = draw_conditional(x1, prior, rng);
    CHECK(d.t >= 0.0);
    CHECK(d.t <= 1.0);
    for (int j = 0; j < 2; ++j) {
      const double r = d.xt[j] - d.t * x1[j];
      sum[j] += r;
      sum2[j] += r * r;
    }
  }
  for (int j = 0; j < 2; ++j) {
    const double mean = sum[j] / n;
    const double se = std::sqrt((sum2[j] / n - mean * mean) / n);
    CHECK(std::abs(mean) <= 3 * se);
  }
}

TEST_CASE("zero field loss and exact-match loss") {
  const VectorFieldNet zero(testutil::small_arch(2));
  const auto d = make_conditional(0.3, std::vector<double>{0.5, 0.5}, std::vector<double>{2.0, -1.0});
  const SampleLoss s = cfm_sample_loss(zero, d);
  CHECK(s.loss == doctest::Approx(1.5 * 1.5 + 1.5 * 1.5));

  // A constant field equal to the target: bias only.
  VectorFieldNet c(testutil::small_arch(2, {}, 2, 1.0));
  const std::size_t in = c.architecture().input_width();
  c.params()[2 * in] = d.target[0];
  c.params()[2 * in + 1] = d.target[1];
  const SampleLoss m = cfm_sample_loss(c, d);
  CHECK(m.loss == 0.0);
  for (double g : m.grad) CHECK(g == 0.0);
}

TEST_CASE("loss gradient against central differences") {
  Rng rng(8);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    VectorFieldNet net = testutil::random_net(testutil::small_arch(2), 300 + seed);
    const auto d = make_conditional(std::uniform_real_distribution<double>(0, 1)(rng), testutil::normal_vector(rng, 2),
                                    testutil::normal_vector(rng, 2, 3.0));
    const SampleLoss s = cfm_sample_loss(net, d);
    CHECK(s.loss >= 0.0);
    for (std::size_t i = 0; i < net.num_params(); ++i) {
      const double keep = net.params()[i];
      net.params()[i] = keep + 1e-6;
      const double fp = cfm_sample_loss(net, d).loss;
      net.params()[i] = keep - 1e-6;
      const double fm = cfm_sample_loss(net, d).loss;
      net.params()[i] = keep;
      // Central differences of a loss of size L carry roundoff near 1e-10 L.
      worst = std::max(worst, testutil::rel_err(s.grad[i], (fp - fm) / 2e-6, std::max(1e-5, 1e-4 * s.loss)));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("accumulating variant matches the standalone loss") {
  const VectorFieldNet net = testutil::random_net(testutil::small_arch(2), 3);
  const auto d = make_conditional(0.6, std::vector<double>{0.1, 0.2}, std::vector<double>{-3.0, 4.0});
  const SampleLoss s = cfm_sample_loss(net, d);
  GradTape tape;
  std::vector<double> acc(net.num_params(), 0.0);
  const double l = cfm_sample_loss_accumulate(net, d, tape, acc, 0.5);
  CHECK(l == s.loss);
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] == doctest::Approx(0.5 * s.grad[i]).epsilon(1e-14));
}

}
