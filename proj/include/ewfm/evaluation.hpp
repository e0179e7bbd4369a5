#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ewfm/cnf.hpp"
#include "ewfm/energy.hpp"
#include "ewfm/matrix.hpp"
#include "ewfm/vector_field.hpp"

namespace ewfm {

// --- optimal transport ------------------------------------------------------------

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
/// potentials, O(n^3)).
Assignment solve_assignment(const Matrix& cost);

/// Squared Euclidean distances between all rows of a and b.
Matrix squared_distance_matrix(const Matrix& a, const Matrix& b);

struct W2Options {
  std::size_t exact_threshold = 4096;
  /// Entropic regularization as a fraction of the mean ground cost.
  double sinkhorn_reg = 0.01;
  /// Stop when the L1 row-marginal error falls below this.
  double sinkhorn_tol = 1e-6;
  std::size_t sinkhorn_max_iter = 5000;
  bool force_approximate = false;
};

struct W2Result {
  double value = 0.0;
  bool exact = true;
  std::size_t iterations = 0;
};

/// Exact assignment when both sets have the same size <= exact_threshold,
/// otherwise log-domain Sinkhorn with uniform marginals (approximate).
W2Result w2_distance(const Matrix& a, const Matrix& b, const W2Options& opts = {});

// --- likelihood and reweighting ------------------------------------------------------

struct NllResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t failures = 0;
};

/// Mean -log q(x) over test rows. Exact divergence for dim <= 8, otherwise
/// Hutchinson with 10 probes unless `div` is given. Throws EvaluationError when
/// at least 1% of the rows fail to integrate.
NllResult model_nll(const VectorFieldNet& net, const Matrix& test_samples, const OdeConfig& ode,
                    std::optional<DivergenceMode> div = std::nullopt, std::uint64_t seed = 0);

/// sum w_i O_i / sum w_i with w_i = exp(-E_i/T - log q_i).
double snis_observable(std::span<const double> log_q, std::span<const double> energies, double temperature,
                       std::span<const double> observable);

/// log mean exp(-E/T - log mu_prop).
double estimate_log_partition(std::span<const double> log_prop, std::span<const double> energies, double temperature);
/// Delta-method standard error of estimate_log_partition.
double log_partition_std_error(std::span<const double> log_prop, std::span<const double> energies, double temperature);

// --- 1-D distribution comparison -------------------------------------------------

/// Exact 1-D Wasserstein-1 between empirical distributions (quantile integral).
double histogram_w1(std::span<const double> a, std::span<const double> b);

struct HistogramData {
  std::vector<double> bin_center;
  std::vector<double> density_a;
  std::vector<double> density_b;
};

/// Shared-bin densities over [lo, hi]; values outside are ignored.
HistogramData histogram_densities(std::span<const double> a, std::span<const double> b, std::size_t n_bins, double lo,
                                  double hi);
/// Range covering both sets (min..max), padded when degenerate.
std::pair<double, double> joint_range(std::span<const double> a, std::span<const double> b);
void write_histogram_csv(const std::filesystem::path& path, const HistogramData& h);

// --- report -----------------------------------------------------------------------

struct EvalReport {
  double w2 = 0.0;
  bool w2_exact = true;
  double nll = 0.0;
  double nll_std_error = 0.0;
  double energy_hist_w1 = 0.0;
  double dist_hist_w1 = 0.0;  // 0 for systems without particles
  double weight_ess_fraction = 0.0;
  std::uint64_t eval_count = 0;
  std::size_t n_model_samples = 0;
  std::size_t n_reference = 0;

  /// Ordered key/value pairs in schema order.
  std::vector<std::pair<std::string, std::string>> fields() const;
  std::string to_key_value() const;
  std::string csv_header() const;
  std::string csv_row() const;
};

struct EvalOptions {
  std::size_t n_model_samples = 2000;
  OdeConfig ode;
  W2Options w2;
  std::size_t histogram_bins = 50;
  std::uint64_t seed = 0;
};

struct EvalOutputs {
  EvalReport report;
  Matrix model_samples;
  HistogramData energy_hist;
  std::optional<HistogramData> distance_hist;
};

/// Full evaluation against reference samples. Energy calls made here are not
/// part of the training budget; eval_count is left for the caller to fill.
EvalOutputs evaluate_model(const EnergySystem& system, const VectorFieldNet& net, const Matrix& reference,
                           const EvalOptions& opts);

/// All pairwise interatomic distances of every row, concatenated.
std::vector<double> all_pair_distances(const Matrix& samples, std::size_t n_particles, std::size_t space_dim);

}  // namespace ewfm
