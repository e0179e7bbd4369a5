#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ewfm/cnf.hpp"
#include "ewfm/energy.hpp"
#include "ewfm/ewfm_core.hpp"
#include "ewfm/matrix.hpp"
#include "ewfm/vector_field.hpp"

namespace ewfm {

// --- optimizer ------------------------------------------------------------------

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  void reset(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
  }
};

/// Bias-corrected Adam update. Returns false and changes nothing when the
/// gradient has a non-finite entry.
bool optimizer_step(std::span<double> params, std::span<const double> grad, AdamState& state, const AdamConfig& cfg);

// --- buffer ---------------------------------------------------------------------

enum class ProposalSource { initial_proposal, model };
std::string_view proposal_source_name(ProposalSource s);

/// Cached (x, log mu_prop(x), E(x)) triples. log_prop and energy are computed
/// once at generation time.
struct SampleBuffer {
  Matrix x;
  std::vector<double> log_prop;
  std::vector<double> energy;
  std::size_t generation = 0;
  std::size_t dropped = 0;  // samples lost to non-finite model output
  ProposalSource source = ProposalSource::initial_proposal;

  std::size_t size() const noexcept { return x.rows(); }
};

/// N(0, scale^2 I) draws with exact log-densities (zero-centroid subspace when
/// center_space_dim > 0). Sample i uses derive_seed(seed, kSampling, i).
DensitySamples initial_proposal_sample(std::size_t dim, double scale, std::size_t n, std::uint64_t seed,
                                       std::size_t center_space_dim = 0);

// --- configuration --------------------------------------------------------------

enum class Algorithm { ewfm, iewfm, aewfm };
Algorithm parse_algorithm(std::string_view name);
std::string_view algorithm_name(Algorithm a);

struct TrainConfig {
  AdamConfig adam;
  std::size_t n_buffer = 5000;
  std::size_t n_batch = 5000;
  std::size_t epochs = 5000;
  std::size_t minibatches_per_epoch = 10;
  std::size_t refresh_every = 1;
  ClipPolicy clip;
  OdeConfig ode;
  /// Divergence used for buffer densities; `auto_divergence` picks exact for
  /// dim <= 8 and one Hutchinson probe above.
  bool auto_divergence = true;
  DivergenceMode divergence = DivergenceMode::exact();
  double proposal_scale = 1.0;
  std::uint64_t seed = 0;
  bool reset_moments_per_level = false;
  std::size_t max_degenerate_steps = 3;

  void validate() const;
  DivergenceMode buffer_divergence(std::size_t dim) const;
};

/// Geometric temperature ladder T_k = T_init (T_final/T_init)^(k/K), k = 0..K,
/// K = total_anneal_epochs / epochs_per_temperature.
struct AnnealSchedule {
  double t_init = 10.0;
  double t_final = 1.0;
  std::size_t epochs_per_temperature = 2;
  std::size_t total_anneal_epochs = 100;

  void validate() const;
  std::vector<double> levels() const;
  /// Temperature for 0-based epoch index; T_final after the annealing phase.
  double temperature_at_epoch(std::size_t epoch) const;
  std::size_t level_at_epoch(std::size_t epoch) const;
};

// --- training -------------------------------------------------------------------

struct MetricsRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double temperature = 0.0;
  double loss_estimate = 0.0;
  double ess = 0.0;
  std::size_t clip_count = 0;
  std::size_t dropped = 0;
  std::uint64_t eval_count = 0;
  double grad_norm = 0.0;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

struct TrainHooks {
  /// Called after every epoch (1-based epoch index).
  std::function<void(std::size_t epoch, const VectorFieldNet& net)> on_epoch_end;
  /// Also fires on the initial buffer (generation 0).
  std::function<void(const SampleBuffer& buffer)> on_buffer;
  std::function<void(std::string_view message)> log;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::uint64_t eval_count = 0;     // energy evaluations made by this run
  std::size_t buffer_generations = 0;
  std::size_t refresh_count = 0;
  std::size_t samples_dropped = 0;  // buffer samples lost before energy evaluation
  std::size_t degenerate_steps = 0;
  std::size_t rejected_updates = 0;
  ProposalSource final_source = ProposalSource::initial_proposal;
  double final_temperature = 0.0;
};

/// Regenerates the buffer from the model: one ODE solve per sample for x and
/// log q, then one energy evaluation per kept sample.
SampleBuffer refresh_buffer(const VectorFieldNet& net, const EnergySystem& system, const TrainConfig& cfg,
                            std::size_t generation);

/// Fixed initial-Gaussian proposal for the whole run.
TrainResult train_ewfm(const EnergySystem& system, VectorFieldNet& net, const TrainConfig& cfg,
                       const TrainHooks& hooks = {});
TrainResult train_iewfm(const EnergySystem& system, VectorFieldNet& net, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});
TrainResult train_aewfm(const EnergySystem& system, VectorFieldNet& net, const TrainConfig& cfg,
                        const AnnealSchedule& schedule, const TrainHooks& hooks = {});

}  // namespace ewfm
