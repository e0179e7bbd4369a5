#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ewfm/matrix.hpp"
#include "ewfm/rng.hpp"
#include "ewfm/vector_field.hpp"

namespace ewfm {

/// Fixed-step classical RK4 on [0, 1] with step 1/n_steps.
struct OdeConfig {
  std::size_t n_steps = 100;
  void validate() const;
};

enum class DivergenceKind { exact, hutchinson };

struct DivergenceMode {
  DivergenceKind kind = DivergenceKind::exact;
  std::size_t probes = 1;  // Rademacher probes for hutchinson

  static DivergenceMode exact() { return {DivergenceKind::exact, 0}; }
  static DivergenceMode hutchinson(std::size_t k = 1) { return {DivergenceKind::hutchinson, k}; }
  void validate() const;
};

/// Isotropic N(0, scale^2 I). With center_space_dim > 0 the distribution lives
/// on the zero-centroid subspace (dimension dim - center_space_dim).
class GaussianPrior {
 public:
  explicit GaussianPrior(std::size_t dim, std::size_t center_space_dim = 0, double scale = 1.0);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t effective_dim() const noexcept { return dim_ - center_space_dim_; }
  double scale() const noexcept { return scale_; }

  void sample(Rng& rng, std::span<double> out) const;
  double log_density(std::span<const double> x) const;

 private:
  std::size_t dim_;
  std::size_t center_space_dim_;
  double scale_;
};

/// The base distribution matching a network's geometry.
GaussianPrior prior_for(const VectorFieldNet& net);

/// Integrates dx/dt = u_t(x) in place from t = 0 to 1 (forward) or 1 to 0.
/// Throws OdeDivergence with the failing step index.
void integrate_flow(const VectorFieldNet& net, std::span<double> x, const OdeConfig& ode, bool reverse = false);

/// Integrates the state together with the divergence as one augmented system and
/// returns the signed integral of div u along the path (in the direction of
/// integration). `probes` selects the Hutchinson estimator; null means exact.
double integrate_flow_with_divergence(const VectorFieldNet& net, std::span<double> x, const OdeConfig& ode,
                                      bool reverse, const Matrix* probes);

Matrix sample_forward(const VectorFieldNet& net, const GaussianPrior& prior, std::size_t n, const OdeConfig& ode,
                      std::uint64_t seed);

struct Likelihood {
  double log_p1 = 0.0;        // log q(x)
  double log_p0 = 0.0;        // prior log-density at the reverse endpoint
  std::vector<double> x0;     // reverse endpoint
};

Likelihood log_likelihood(const VectorFieldNet& net, const GaussianPrior& prior, std::span<const double> x,
                          const OdeConfig& ode, const DivergenceMode& div, std::uint64_t seed);

struct DensitySamples {
  Matrix samples;
  std::vector<double> log_q;
};

struct FlowSample {
  std::vector<double> x;
  double log_q = 0.0;
};

/// One forward solve per sample; sample i uses seed derive_seed(seed, kSampling, i).
DensitySamples sample_with_logdensity(const VectorFieldNet& net, const GaussianPrior& prior, std::size_t n,
                                      const OdeConfig& ode, const DivergenceMode& div, std::uint64_t seed);
FlowSample sample_one_with_logdensity(const VectorFieldNet& net, const GaussianPrior& prior, const OdeConfig& ode,
                                      const DivergenceMode& div, std::uint64_t sample_seed);

}  // namespace ewfm
