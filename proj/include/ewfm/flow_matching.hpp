#pragma once

#include <span>
#include <vector>

#include "ewfm/cnf.hpp"
#include "ewfm/rng.hpp"
#include "ewfm/vector_field.hpp"

namespace ewfm {

/// One draw of the linear conditional path: x_t = (1-t) x0 + t x1, target x1 - x0.
struct ConditionalDraw {
  double t = 0.0;
  std::vector<double> x0;
  std::vector<double> x1;
  std::vector<double> xt;
  std::vector<double> target;
};

/// Builds the path quantities for fixed (t, x0, x1).
ConditionalDraw make_conditional(double t, std::span<const double> x0, std::span<const double> x1);

/// t ~ U[0,1] then x0 ~ prior, in that order from `rng`.
ConditionalDraw draw_conditional(std::span<const double> x1, const GaussianPrior& prior, Rng& rng);

struct SampleLoss {
  double loss = 0.0;
  std::vector<double> grad;
};

/// |u_t(x_t) - target|^2 and its parameter gradient.
SampleLoss cfm_sample_loss(const VectorFieldNet& net, const ConditionalDraw& draw);

/// Loss only, accumulating scale * gradient into `grad`; reuses `tape`.
double cfm_sample_loss_accumulate(const VectorFieldNet& net, const ConditionalDraw& draw, GradTape& tape,
                                  std::span<double> grad, double scale);

}  // namespace ewfm
