#include "ewfm/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "ewfm/error.hpp"
#include "ewfm/rng.hpp"

namespace ewfm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// In-place Cholesky of a row-major SPD matrix; returns false if not SPD.
bool cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 0.0)) return false;
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
  return true;
}

}  // namespace

EnergySystem::EnergySystem(std::string name, std::size_t dim, double temperature)
    : name_(std::move(name)), dim_(dim), temperature_(temperature) {
  if (dim == 0) throw InvalidInput("energy system dimension must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidInput("temperature must be > 0");
}

void EnergySystem::check_input(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw InvalidInput(name_ + ": expected " + std::to_string(dim_) + " coordinates, got " + std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidInput(name_ + ": non-finite coordinate");
  }
}

double EnergySystem::energy(std::span<const double> x) const {
  check_input(x);
  count_.fetch_add(1, std::memory_order_relaxed);
  return evaluate(x);
}

std::vector<double> EnergySystem::energies(const Matrix& xs) const {
  if (xs.rows() > 0 && xs.cols() != dim_) {
    throw InvalidInput(name_ + ": batch has " + std::to_string(xs.cols()) + " columns, expected " + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < xs.rows(); ++i) check_input(xs.row(i));
  count_.fetch_add(xs.rows(), std::memory_order_relaxed);
  std::vector<double> out(xs.rows());
  for (std::size_t i = 0; i < xs.rows(); ++i) out[i] = evaluate(xs.row(i));
  return out;
}

double boltzmann_log_density_unnorm(const EnergySystem& system, std::span<const double> x) {
  return -system.energy(x) / system.temperature();
}

// --- GMM layouts -------------------------------------------------------------

GmmSpec ring_gmm(std::size_t n_components, double radius, double variance) {
  if (n_components == 0) throw InvalidInput("ring GMM needs at least one component");
  GmmSpec spec;
  spec.variance = variance;
  for (std::size_t k = 0; k < n_components; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_components);
    spec.means.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }
  return spec;
}

GmmSpec grid_gmm(std::size_t n_components, double half_width, double variance) {
  if (n_components == 0) throw InvalidInput("grid GMM needs at least one component");
  std::size_t rows = 1;
  for (std::size_t r = 1; r * r <= n_components; ++r) {
    if (n_components % r == 0) rows = r;
  }
  const std::size_t cols = n_components / rows;
  auto coord = [half_width](std::size_t i, std::size_t count) {
    if (count == 1) return 0.0;
    return -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(count - 1);
  };
  GmmSpec spec;
  spec.variance = variance;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) spec.means.push_back({coord(c, cols), coord(r, rows)});
  }
  return spec;
}

GmmSpec uniform_random_gmm(std::size_t n_components, std::size_t dim, double half_width, std::uint64_t seed,
                           double variance) {
  if (n_components == 0 || dim == 0) throw InvalidInput("uniform-random GMM needs components and dim >= 1");
  Rng rng(derive_seed(seed, streams::kLayout));
  std::uniform_real_distribution<double> uni(-half_width, half_width);
  GmmSpec spec;
  spec.variance = variance;
  for (std::size_t k = 0; k < n_components; ++k) {
    std::vector<double> m(dim);
    for (double& v : m) v = uni(rng);
    spec.means.push_back(std::move(m));
  }
  return spec;
}

// --- GMM energy -------------------------------------------------------------

GmmEnergy::GmmEnergy(GmmSpec spec, double temperature, std::string name)
    : EnergySystem(std::move(name), spec.dim(), temperature), spec_(std::move(spec)) {
  const std::size_t k = spec_.means.size();
  const std::size_t d = dim();
  if (spec_.weights.empty()) spec_.weights.assign(k, 1.0 / static_cast<double>(k));
  if (spec_.weights.size() != k) throw InvalidInput("GMM: weights/means count mismatch");
  double total = 0.0;
  for (double w : spec_.weights) {
    if (!(w > 0.0)) throw InvalidInput("GMM: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("GMM: weights must sum to 1");
  if (!spec_.covariances.empty() && spec_.covariances.size() != k) {
    throw InvalidInput("GMM: covariances/means count mismatch");
  }
  if (spec_.covariances.empty() && !(spec_.variance > 0.0)) throw InvalidInput("GMM: variance must be > 0");

  for (std::size_t i = 0; i < k; ++i) {
    if (spec_.means[i].size() != d) throw InvalidInput("GMM: inconsistent mean dimension");
    std::vector<double> chol(d * d, 0.0);
    if (spec_.covariances.empty()) {
      for (std::size_t j = 0; j < d; ++j) chol[j * d + j] = spec_.variance;
    } else {
      chol = spec_.covariances[i];
      if (chol.size() != d * d) throw InvalidInput("GMM: covariance must be d x d");
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < r; ++c) {
          if (std::abs(chol[r * d + c] - chol[c * d + r]) > 1e-12 * (1.0 + std::abs(chol[r * d + c]))) {
            throw InvalidInput("GMM: covariance not symmetric");
          }
        }
      }
    }
    if (!cholesky(chol, d)) throw InvalidInput("GMM: covariance not positive-definite");
    double log_det = 0.0;
    for (std::size_t j = 0; j < d; ++j) log_det += 2.0 * std::log(chol[j * d + j]);
    components_.push_back({spec_.means[i], std::move(chol),
                           std::log(spec_.weights[i]) - 0.5 * (static_cast<double>(d) * kLog2Pi + log_det)});
  }
}

double GmmEnergy::evaluate(std::span<const double> x) const {
  const std::size_t d = dim();
  thread_local std::vector<double> z;
  thread_local std::vector<double> terms;
  z.resize(d);
  terms.resize(components_.size());
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < components_.size(); ++c) {
    const Component& comp = components_[c];
    // Solve L z = x - mean by forward substitution.
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double s = x[i] - comp.mean[i];
      for (std::size_t k = 0; k < i; ++k) s -= comp.chol[i * d + k] * z[k];
      z[i] = s / comp.chol[i * d + i];
      quad += z[i] * z[i];
    }
    terms[c] = comp.log_norm - 0.5 * quad;
    max_term = std::max(max_term, terms[c]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - max_term);
  return -(max_term + std::log(sum));
}

std::size_t GmmEnergy::nearest_component(std::span<const double> x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < spec_.means.size(); ++c) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double diff = x[i] - spec_.means[c][i];
      d2 += diff * diff;
    }
    if (d2 < best_d) {
      best_d = d2;
      best = c;
    }
  }
  return best;
}

// --- particle systems ---------------------------------------------------------

std::vector<double> pair_distances(std::span<const double> x, std::size_t n_particles, std::size_t space_dim) {
  if (x.size() != n_particles * space_dim) throw InvalidInput("pair_distances: size mismatch");
  std::vector<double> out;
  out.reserve(n_particles * (n_particles - 1) / 2);
  for (std::size_t i = 0; i < n_particles; ++i) {
    for (std::size_t j = i + 1; j < n_particles; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < space_dim; ++k) {
        const double diff = x[i * space_dim + k] - x[j * space_dim + k];
        s += diff * diff;
      }
      out.push_back(std::sqrt(s));
    }
  }
  return out;
}

DoubleWellEnergy::DoubleWellEnergy(ParticleSpec layout, DoubleWellParams params, double temperature, std::string name)
    : EnergySystem(std::move(name), layout.dim(), temperature), layout_(layout), params_(params) {
  if (layout.n_particles < 2 || layout.space_dim == 0) throw InvalidInput("double well needs >= 2 particles");
  if (!(params.tau > 0.0)) throw InvalidInput("double well tau must be > 0");
}

double DoubleWellEnergy::pair_term(double r) const {
  const double s = r - params_.d0;
  const double s2 = s * s;
  return params_.a * s + params_.b * s2 + params_.c * s2 * s2;
}

double DoubleWellEnergy::evaluate(std::span<const double> x) const {
  const std::size_t n = layout_.n_particles;
  const std::size_t sd = layout_.space_dim;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < sd; ++k) {
        const double diff = x[i * sd + k] - x[j * sd + k];
        s += diff * diff;
      }
      total += pair_term(std::sqrt(s));
    }
  }
  return total / (2.0 * params_.tau);
}

LennardJonesEnergy::LennardJonesEnergy(ParticleSpec layout, LennardJonesParams params, double temperature,
                                       std::string name)
    : EnergySystem(std::move(name), layout.dim(), temperature), layout_(layout), params_(params) {
  if (layout.n_particles < 2 || layout.space_dim == 0) throw InvalidInput("Lennard-Jones needs >= 2 particles");
  if (!(params.r_m > 0.0) || !(params.epsilon > 0.0)) throw InvalidInput("Lennard-Jones: epsilon, r_m must be > 0");
  if (params.c_osc < 0.0) throw InvalidInput("Lennard-Jones: c_osc must be >= 0");
}

double LennardJonesEnergy::evaluate(std::span<const double> x) const {
  const std::size_t n = layout_.n_particles;
  const std::size_t sd = layout_.space_dim;
  const double rm2 = params_.r_m * params_.r_m;
  const double floor2 = params_.r_min * params_.r_min;
  double lj = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < sd; ++k) {
        const double diff = x[i * sd + k] - x[j * sd + k];
        r2 += diff * diff;
      }
      if (params_.use_floor) {
        r2 = std::max(r2, floor2);
      } else if (r2 == 0.0) {
        throw SingularConfiguration("Lennard-Jones: particles " + std::to_string(i) + " and " + std::to_string(j) +
                                    " coincide");
      }
      const double inv6 = std::pow(rm2 / r2, 3);
      lj += params_.epsilon * (inv6 * inv6 - 2.0 * inv6);
    }
  }
  double confine = 0.0;
  if (params_.c_osc > 0.0) {
    for (std::size_t k = 0; k < sd; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x[i * sd + k];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double diff = x[i * sd + k] - mean;
        confine += diff * diff;
      }
    }
  }
  return lj + params_.c_osc * confine;
}

HarmonicEnergy::HarmonicEnergy(std::size_t dim, double sigma, double temperature)
    : EnergySystem("harmonic", dim, temperature), sigma_(sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("harmonic sigma must be > 0");
}

double HarmonicEnergy::evaluate(std::span<const double> x) const {
  double s = 0.0;
  for (double v : x) s += v * v;
  return 0.5 * s / (sigma_ * sigma_);
}

FunctionEnergy::FunctionEnergy(std::string name, std::size_t dim, double temperature, Fn fn)
    : EnergySystem(std::move(name), dim, temperature), fn_(std::move(fn)) {
  if (!fn_) throw InvalidInput("FunctionEnergy needs a callable");
}

}  // namespace ewfm
