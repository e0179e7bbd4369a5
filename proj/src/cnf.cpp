#include "ewfm/cnf.hpp"

#include <cmath>
#include <numbers>

#include "ewfm/error.hpp"
#include "ewfm/kernels.hpp"

namespace ewfm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double time_at(std::size_t step, std::size_t n_steps, bool reverse) {
  const double s = static_cast<double>(step) / static_cast<double>(n_steps);
  return reverse ? 1.0 - s : s;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Shared RK4 driver. `field` writes the velocity into its last argument and
// returns the divergence contribution (0 when not tracked).
template <typename Field>
double rk4(std::span<double> x, const OdeConfig& ode, bool reverse, Field&& field) {
  const std::size_t d = x.size();
  const auto& k = kernels::active();
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  const double h = (reverse ? -1.0 : 1.0) / static_cast<double>(ode.n_steps);
  double integral = 0.0;
  for (std::size_t s = 0; s < ode.n_steps; ++s) {
    const double t0 = time_at(s, ode.n_steps, reverse);
    const double t1 = time_at(s + 1, ode.n_steps, reverse);
    const double tm = 0.5 * (t0 + t1);
    try {
      const double d1 = field(t0, std::span<const double>(x), std::span<double>(k1));
      std::copy(x.begin(), x.end(), tmp.begin());
      k.axpy(0.5 * h, k1.data(), tmp.data(), d);
      const double d2 = field(tm, std::span<const double>(tmp), std::span<double>(k2));
      std::copy(x.begin(), x.end(), tmp.begin());
      k.axpy(0.5 * h, k2.data(), tmp.data(), d);
      const double d3 = field(tm, std::span<const double>(tmp), std::span<double>(k3));
      std::copy(x.begin(), x.end(), tmp.begin());
      k.axpy(h, k3.data(), tmp.data(), d);
      const double d4 = field(t1, std::span<const double>(tmp), std::span<double>(k4));
      for (std::size_t i = 0; i < d; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      integral += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    } catch (const NumericalOverflow& e) {
      throw OdeDivergence(std::string("network overflow during integration: ") + e.what(), s);
    } catch (const InvalidInput& e) {
      throw OdeDivergence(std::string("invalid state during integration: ") + e.what(), s);
    }
    if (!all_finite(x) || !std::isfinite(integral)) throw OdeDivergence("non-finite ODE state", s);
  }
  return integral;
}

}  // namespace

void OdeConfig::validate() const {
  if (n_steps == 0) throw ConfigError("ode: n_steps must be >= 1", 0, "ode_steps");
}

void DivergenceMode::validate() const {
  if (kind == DivergenceKind::hutchinson && probes == 0) {
    throw ConfigError("hutchinson divergence needs at least one probe", 0, "hutchinson_probes");
  }
}

GaussianPrior::GaussianPrior(std::size_t dim, std::size_t center_space_dim, double scale)
    : dim_(dim), center_space_dim_(center_space_dim), scale_(scale) {
  if (dim == 0) throw InvalidInput("prior dimension must be >= 1");
  if (!(scale > 0.0)) throw InvalidInput("prior scale must be > 0");
  if (center_space_dim != 0 && (dim % center_space_dim != 0 || dim == center_space_dim)) {
    throw InvalidInput("centered prior needs at least two particles");
  }
}

void GaussianPrior::sample(Rng& rng, std::span<double> out) const {
  fill_standard_normal(rng, out);
  if (scale_ != 1.0) {
    for (double& v : out) v *= scale_;
  }
  project_zero_centroid(out, center_space_dim_);
}

double GaussianPrior::log_density(std::span<const double> x) const {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double n = static_cast<double>(effective_dim());
  return -0.5 * sq / (scale_ * scale_) - 0.5 * n * (kLog2Pi + 2.0 * std::log(scale_));
}

GaussianPrior prior_for(const VectorFieldNet& net) {
  return GaussianPrior(net.dim(), net.architecture().center_space_dim);
}

void integrate_flow(const VectorFieldNet& net, std::span<double> x, const OdeConfig& ode, bool reverse) {
  ode.validate();
  GradTape tape;
  rk4(x, ode, reverse, [&](double t, std::span<const double> state, std::span<double> vel) {
    const auto u = net.forward(t, state, tape);
    std::copy(u.begin(), u.end(), vel.begin());
    return 0.0;
  });
}

double integrate_flow_with_divergence(const VectorFieldNet& net, std::span<double> x, const OdeConfig& ode,
                                      bool reverse, const Matrix* probes) {
  ode.validate();
  GradTape tape;
  return rk4(x, ode, reverse, [&](double t, std::span<const double> state, std::span<double> vel) {
    return net.forward_with_trace(t, state, probes, tape, vel);
  });
}

Matrix sample_forward(const VectorFieldNet& net, const GaussianPrior& prior, std::size_t n, const OdeConfig& ode,
                      std::uint64_t seed) {
  if (prior.dim() != net.dim()) throw InvalidInput("prior and network dimensions differ");
  Matrix out(n, net.dim());
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, streams::kSampling, i));
    prior.sample(rng, out.row(i));
    integrate_flow(net, out.row(i), ode, false);
  }
  return out;
}

namespace {

Matrix draw_probes(Rng& rng, const DivergenceMode& div, std::size_t d) {
  Matrix probes(div.probes, d);
  fill_rademacher(rng, probes.data());
  return probes;
}

}  // namespace

Likelihood log_likelihood(const VectorFieldNet& net, const GaussianPrior& prior, std::span<const double> x,
                          const OdeConfig& ode, const DivergenceMode& div, std::uint64_t seed) {
  div.validate();
  if (x.size() != net.dim()) throw InvalidInput("log_likelihood: wrong dimension");
  if (!all_finite(x)) throw InvalidInput("log_likelihood: non-finite input");
  Likelihood res;
  res.x0.assign(x.begin(), x.end());
  Matrix probes;
  if (div.kind == DivergenceKind::hutchinson) {
    Rng rng(derive_seed(seed, streams::kLikelihood));
    probes = draw_probes(rng, div, net.dim());
  }
  // Reverse integration accumulates int_1^0 div dt = -int_0^1 div dt.
  const double reverse_integral = integrate_flow_with_divergence(
      net, res.x0, ode, true, div.kind == DivergenceKind::hutchinson ? &probes : nullptr);
  res.log_p0 = prior.log_density(res.x0);
  res.log_p1 = res.log_p0 + reverse_integral;
  return res;
}

FlowSample sample_one_with_logdensity(const VectorFieldNet& net, const GaussianPrior& prior, const OdeConfig& ode,
                                      const DivergenceMode& div, std::uint64_t sample_seed) {
  div.validate();
  if (prior.dim() != net.dim()) throw InvalidInput("prior and network dimensions differ");
  Rng rng(sample_seed);
  FlowSample out;
  out.x.resize(net.dim());
  prior.sample(rng, out.x);
  const double log_p0 = prior.log_density(out.x);
  Matrix probes;
  if (div.kind == DivergenceKind::hutchinson) probes = draw_probes(rng, div, net.dim());
  const double integral =
      integrate_flow_with_divergence(net, out.x, ode, false, div.kind == DivergenceKind::hutchinson ? &probes : nullptr);
  out.log_q = log_p0 - integral;
  return out;
}

DensitySamples sample_with_logdensity(const VectorFieldNet& net, const GaussianPrior& prior, std::size_t n,
                                      const OdeConfig& ode, const DivergenceMode& div, std::uint64_t seed) {
  DensitySamples out;
  out.samples = Matrix(n, net.dim());
  out.log_q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    FlowSample s = sample_one_with_logdensity(net, prior, ode, div, derive_seed(seed, streams::kSampling, i));
    std::copy(s.x.begin(), s.x.end(), out.samples.row(i).begin());
    out.log_q[i] = s.log_q;
  }
  return out;
}

}  // namespace ewfm
