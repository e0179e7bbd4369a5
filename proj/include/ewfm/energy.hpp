#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ewfm/matrix.hpp"

namespace ewfm {

/// A Boltzmann target exp(-E(x)/T) over R^dim. Every call through energy() or
/// energies() is counted; the counter is the energy budget reported by runs.
class EnergySystem {
 public:
  EnergySystem(std::string name, std::size_t dim, double temperature);
  virtual ~EnergySystem() = default;
  EnergySystem(const EnergySystem&) = delete;
  EnergySystem& operator=(const EnergySystem&) = delete;

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  double temperature() const noexcept { return temperature_; }

  std::uint64_t eval_count() const noexcept { return count_.load(std::memory_order_relaxed); }
  void reset_eval_count() noexcept { count_.store(0, std::memory_order_relaxed); }

  /// Counts one evaluation. Throws InvalidInput on wrong size or non-finite x.
  double energy(std::span<const double> x) const;
  /// Counts rows() evaluations in one increment.
  std::vector<double> energies(const Matrix& xs) const;

  /// Particle layout; zero for non-particle systems.
  virtual std::size_t n_particles() const noexcept { return 0; }
  virtual std::size_t space_dim() const noexcept { return 0; }
  /// Known metastable centres (GMM means), used to seed reference chains.
  virtual std::vector<std::vector<double>> mode_centers() const { return {}; }

 protected:
  virtual double evaluate(std::span<const double> x) const = 0;

 private:
  void check_input(std::span<const double> x) const;

  std::string name_;
  std::size_t dim_;
  double temperature_;
  mutable std::atomic<std::uint64_t> count_{0};
};

/// -E(x)/T. The normalizer is never formed.
double boltzmann_log_density_unnorm(const EnergySystem& system, std::span<const double> x);

// ---------------------------------------------------------------------------
// Gaussian mixture

struct GmmSpec {
  std::vector<std::vector<double>> means;
  /// Row-major d x d per component; empty means isotropic `variance`.
  std::vector<std::vector<double>> covariances;
  std::vector<double> weights;  // empty means uniform
  double variance = 1.0;

  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
};

GmmSpec ring_gmm(std::size_t n_components, double radius, double variance = 1.0);
/// Near-square lattice spanning [-half_width, half_width]^2 (2-D only).
GmmSpec grid_gmm(std::size_t n_components, double half_width, double variance = 1.0);
GmmSpec uniform_random_gmm(std::size_t n_components, std::size_t dim, double half_width, std::uint64_t seed,
                           double variance = 1.0);

class GmmEnergy final : public EnergySystem {
 public:
  explicit GmmEnergy(GmmSpec spec, double temperature = 1.0, std::string name = "gmm");

  const GmmSpec& spec() const noexcept { return spec_; }
  std::vector<std::vector<double>> mode_centers() const override { return spec_.means; }
  /// Index of the closest mean in Euclidean distance.
  std::size_t nearest_component(std::span<const double> x) const;

 protected:
  double evaluate(std::span<const double> x) const override;

 private:
  struct Component {
    std::vector<double> mean;
    std::vector<double> chol;  // lower triangular, row-major
    double log_norm;           // log w - 0.5 (d log 2pi + log det Sigma)
  };
  GmmSpec spec_;
  std::vector<Component> components_;
};

// ---------------------------------------------------------------------------
// Particle systems

struct ParticleSpec {
  std::size_t n_particles = 4;
  std::size_t space_dim = 2;
  std::size_t dim() const { return n_particles * space_dim; }
};

struct DoubleWellParams {
  double a = 0.0;
  double b = -4.0;
  double c = 0.9;
  double d0 = 4.0;
  double tau = 1.0;

  friend bool operator==(const DoubleWellParams&, const DoubleWellParams&) = default;
};

/// (1/2tau) sum_{i<j} a(r-d0) + b(r-d0)^2 + c(r-d0)^4 over pair distances r.
class DoubleWellEnergy final : public EnergySystem {
 public:
  DoubleWellEnergy(ParticleSpec layout, DoubleWellParams params, double temperature = 1.0, std::string name = "dw4");

  std::size_t n_particles() const noexcept override { return layout_.n_particles; }
  std::size_t space_dim() const noexcept override { return layout_.space_dim; }
  const DoubleWellParams& params() const noexcept { return params_; }

  double pair_term(double r) const;

 protected:
  double evaluate(std::span<const double> x) const override;

 private:
  ParticleSpec layout_;
  DoubleWellParams params_;
};

struct LennardJonesParams {
  double epsilon = 1.0;
  double r_m = 1.0;
  double c_osc = 0.5;
  /// Pair distances are floored at r_min when use_floor is set; otherwise a
  /// zero distance raises SingularConfiguration.
  double r_min = 1e-6;
  bool use_floor = true;

  friend bool operator==(const LennardJonesParams&, const LennardJonesParams&) = default;
};

/// sum_{i<j} eps[(r_m/r)^12 - 2(r_m/r)^6] + c_osc sum_i |x_i - centroid|^2
class LennardJonesEnergy final : public EnergySystem {
 public:
  LennardJonesEnergy(ParticleSpec layout, LennardJonesParams params, double temperature = 1.0,
                     std::string name = "lj");

  std::size_t n_particles() const noexcept override { return layout_.n_particles; }
  std::size_t space_dim() const noexcept override { return layout_.space_dim; }
  const LennardJonesParams& params() const noexcept { return params_; }
  void set_use_floor(bool on) noexcept { params_.use_floor = on; }

 protected:
  double evaluate(std::span<const double> x) const override;

 private:
  ParticleSpec layout_;
  LennardJonesParams params_;
};

/// |x|^2 / (2 sigma^2); log Z = (d/2) log(2 pi sigma^2 T).
class HarmonicEnergy final : public EnergySystem {
 public:
  HarmonicEnergy(std::size_t dim, double sigma = 1.0, double temperature = 1.0);
  double sigma() const noexcept { return sigma_; }

 protected:
  double evaluate(std::span<const double> x) const override;

 private:
  double sigma_;
};

/// Wraps an arbitrary callable; used for ad-hoc targets in tests and tools.
class FunctionEnergy final : public EnergySystem {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  FunctionEnergy(std::string name, std::size_t dim, double temperature, Fn fn);

 protected:
  double evaluate(std::span<const double> x) const override { return fn_(x); }

 private:
  Fn fn_;
};

/// All pairwise particle distances, i<j order, for a flattened configuration.
std::vector<double> pair_distances(std::span<const double> x, std::size_t n_particles, std::size_t space_dim);

}  // namespace ewfm
