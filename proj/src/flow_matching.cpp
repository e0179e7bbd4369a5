#include "ewfm/flow_matching.hpp"

#include <cmath>
#include <random>

#include "ewfm/error.hpp"

namespace ewfm {

ConditionalDraw make_conditional(double t, std::span<const double> x0, std::span<const double> x1) {
  if (x0.size() != x1.size()) throw InvalidInput("conditional path: x0/x1 dimension mismatch");
  ConditionalDraw draw;
  draw.t = t;
  draw.x0.assign(x0.begin(), x0.end());
  draw.x1.assign(x1.begin(), x1.end());
  draw.xt.resize(x1.size());
  draw.target.resize(x1.size());
  for (std::size_t i = 0; i < x1.size(); ++i) {
    draw.xt[i] = (1.0 - t) * x0[i] + t * x1[i];
    draw.target[i] = x1[i] - x0[i];
  }
  return draw;
}

ConditionalDraw draw_conditional(std::span<const double> x1, const GaussianPrior& prior, Rng& rng) {
  if (x1.size() != prior.dim()) throw InvalidInput("conditional path: endpoint has wrong dimension");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double t = uni(rng);
  std::vector<double> x0(x1.size());
  prior.sample(rng, x0);
  return make_conditional(t, x0, x1);
}

double cfm_sample_loss_accumulate(const VectorFieldNet& net, const ConditionalDraw& draw, GradTape& tape,
                                  std::span<double> grad, double scale) {
  const auto u = net.forward(draw.t, draw.xt, tape);
  thread_local std::vector<double> residual;
  residual.resize(u.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    residual[i] = u[i] - draw.target[i];
    loss += residual[i] * residual[i];
  }
  if (scale != 0.0) net.backward_params(tape, residual, grad, 2.0 * scale);
  return loss;
}

SampleLoss cfm_sample_loss(const VectorFieldNet& net, const ConditionalDraw& draw) {
  SampleLoss out;
  out.grad.assign(net.num_params(), 0.0);
  GradTape tape;
  out.loss = cfm_sample_loss_accumulate(net, draw, tape, out.grad, 1.0);
  return out;
}

}  // namespace ewfm
