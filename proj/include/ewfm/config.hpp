#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ewfm/energy.hpp"
#include "ewfm/evaluation.hpp"
#include "ewfm/reference_sampler.hpp"
#include "ewfm/trainer.hpp"
#include "ewfm/vector_field.hpp"

namespace ewfm {

inline constexpr int kConfigSchema = 1;

struct SystemSection {
  std::string type = "gmm";  // gmm | double-well | lennard-jones | harmonic
  double temperature = 1.0;
  std::size_t dim = 2;       // gmm (non-grid layouts) and harmonic

  // gmm
  std::string layout = "ring";  // ring | grid | uniform-random | explicit
  std::size_t components = 8;
  double radius = 6.0;
  double half_width = 40.0;
  double variance = 1.0;
  std::vector<std::vector<double>> means;  // explicit layout only
  std::vector<double> weights;             // empty means uniform

  // particle systems
  std::size_t n_particles = 4;
  std::size_t space_dim = 2;
  DoubleWellParams dw;
  LennardJonesParams lj;

  // harmonic
  double sigma = 1.0;

  friend bool operator==(const SystemSection&, const SystemSection&) = default;
};

struct ModelSection {
  std::vector<std::size_t> hidden{128, 128, 128};
  std::size_t time_embed_dim = 16;
  double time_max_frequency = 1000.0;

  friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct TrainSection {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t n_buffer = 5000;
  std::size_t n_batch = 5000;
  std::size_t epochs = 5000;
  std::size_t minibatches_per_epoch = 10;
  std::size_t refresh_every = 1;
  std::string clip = "clip-logweight";  // none | clip-energy | clip-logweight
  double clip_percentile = 99.9;
  std::size_t ode_steps = 100;
  std::string divergence = "auto";  // auto | exact | hutchinson
  std::size_t hutchinson_probes = 1;
  double proposal_scale = 1.0;
  bool reset_moments_per_level = false;
  std::size_t max_degenerate_steps = 3;
  std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint

  friend bool operator==(const TrainSection&, const TrainSection&) = default;
};

struct AnnealSection {
  double t_init = 10.0;
  double t_final = 1.0;
  std::size_t epochs_per_temperature = 2;
  std::size_t total_anneal_epochs = 100;

  friend bool operator==(const AnnealSection&, const AnnealSection&) = default;
};

struct EvalSection {
  std::size_t n_model_samples = 2000;
  std::size_t ode_steps = 100;
  std::size_t w2_exact_threshold = 4096;
  double sinkhorn_reg = 0.01;
  std::size_t histogram_bins = 50;

  friend bool operator==(const EvalSection&, const EvalSection&) = default;
};

struct OracleSection {
  double step_size = 0.5;
  std::size_t n_chains = 8;
  std::size_t burn_in = 1000;
  std::size_t thinning = 10;
  std::size_t n_samples = 2000;

  friend bool operator==(const OracleSection&, const OracleSection&) = default;
};

/// Line-oriented config: `key = value` pairs under `[section]` headers, `#`
/// comments. Top-level keys: schema, seed, output_dir.
struct RunConfig {
  int schema = kConfigSchema;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  SystemSection system;
  ModelSection model;
  TrainSection train;
  std::optional<AnnealSection> anneal;
  EvalSection eval;
  OracleSection oracle;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ConfigError carrying the line number and key of the first problem.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form listing every key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);
/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

std::unique_ptr<EnergySystem> make_system(const RunConfig& cfg);
MlpArchitecture make_architecture(const RunConfig& cfg, const EnergySystem& system);
TrainConfig make_train_config(const RunConfig& cfg);
AnnealSchedule make_anneal_schedule(const AnnealSection& a);
EvalOptions make_eval_options(const RunConfig& cfg);
MhConfig make_mh_config(const RunConfig& cfg);

}  // namespace ewfm
