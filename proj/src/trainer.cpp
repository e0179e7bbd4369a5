#include "ewfm/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "ewfm/csv.hpp"
#include "ewfm/error.hpp"
#include "ewfm/flow_matching.hpp"
#include "ewfm/rng.hpp"

namespace ewfm {

// --- optimizer ------------------------------------------------------------------

bool optimizer_step(std::span<double> params, std::span<const double> grad, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grad.size()) throw InternalError("optimizer: parameter/gradient length mismatch");
  if (state.m.size() != params.size()) state.reset(params.size());
  for (double g : grad) {
    if (!std::isfinite(g)) return false;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  return true;
}

// --- small enums ------------------------------------------------------------------

std::string_view proposal_source_name(ProposalSource s) {
  return s == ProposalSource::model ? "model" : "initial-proposal";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "ewfm") return Algorithm::ewfm;
  if (name == "iewfm") return Algorithm::iewfm;
  if (name == "aewfm") return Algorithm::aewfm;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'", 0, "algo");
}

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::ewfm:
      return "ewfm";
    case Algorithm::iewfm:
      return "iewfm";
    case Algorithm::aewfm:
      return "aewfm";
  }
  return "iewfm";
}

// --- configuration --------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(adam.lr > 0.0)) throw ConfigError("train: lr must be > 0", 0, "lr");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train: Adam decay rates must be in [0, 1)", 0, "beta1");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("train: eps must be > 0", 0, "eps");
  if (n_buffer == 0) throw ConfigError("train: n_buffer must be >= 1", 0, "n_buffer");
  if (n_batch == 0) throw ConfigError("train: n_batch must be >= 1", 0, "n_batch");
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1", 0, "epochs");
  if (minibatches_per_epoch == 0) throw ConfigError("train: minibatches_per_epoch must be >= 1", 0, "minibatches_per_epoch");
  if (refresh_every == 0) throw ConfigError("train: refresh_every must be >= 1", 0, "refresh_every");
  if (!(proposal_scale > 0.0)) throw ConfigError("train: proposal_scale must be > 0", 0, "proposal_scale");
  if (max_degenerate_steps == 0) throw ConfigError("train: max_degenerate_steps must be >= 1");
  clip.validate();
  ode.validate();
  divergence.validate();
}

DivergenceMode TrainConfig::buffer_divergence(std::size_t dim) const {
  if (!auto_divergence) return divergence;
  return dim <= 8 ? DivergenceMode::exact() : DivergenceMode::hutchinson(1);
}

void AnnealSchedule::validate() const {
  if (!(t_init > 0.0) || !(t_final > 0.0)) throw ConfigError("anneal: temperatures must be > 0", 0, "t_init");
  if (t_init < t_final) throw ConfigError("anneal: t_init must be >= t_final", 0, "t_init");
  if (epochs_per_temperature == 0) throw ConfigError("anneal: epochs_per_temperature must be >= 1", 0, "epochs_per_temperature");
  if (total_anneal_epochs % epochs_per_temperature != 0) {
    throw ConfigError("anneal: total_anneal_epochs must be a multiple of epochs_per_temperature", 0,
                      "total_anneal_epochs");
  }
  if (total_anneal_epochs == 0 && t_init != t_final) {
    throw ConfigError("anneal: a single-level schedule needs t_init == t_final", 0, "total_anneal_epochs");
  }
}

std::vector<double> AnnealSchedule::levels() const {
  validate();
  const std::size_t k_max = total_anneal_epochs / epochs_per_temperature;
  std::vector<double> out(k_max + 1);
  for (std::size_t k = 0; k < k_max; ++k) {
    out[k] = t_init * std::pow(t_final / t_init, static_cast<double>(k) / static_cast<double>(k_max));
  }
  out[k_max] = t_final;
  return out;
}

std::size_t AnnealSchedule::level_at_epoch(std::size_t epoch) const {
  const std::size_t k_max = total_anneal_epochs / epochs_per_temperature;
  if (epoch >= total_anneal_epochs) return k_max;
  return epoch / epochs_per_temperature;
}

double AnnealSchedule::temperature_at_epoch(std::size_t epoch) const { return levels()[level_at_epoch(epoch)]; }

// --- metrics --------------------------------------------------------------------

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write metrics " + path.string());
  out << "epoch,step,temperature,loss_estimate,ess,clip_count,dropped,eval_count,grad_norm\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << format_double(r.temperature) << ',' << format_double(r.loss_estimate)
        << ',' << format_double(r.ess) << ',' << r.clip_count << ',' << r.dropped << ',' << r.eval_count << ','
        << format_double(r.grad_norm) << '\n';
  }
}

// --- buffers --------------------------------------------------------------------

DensitySamples initial_proposal_sample(std::size_t dim, double scale, std::size_t n, std::uint64_t seed,
                                       std::size_t center_space_dim) {
  const GaussianPrior proposal(dim, center_space_dim, scale);
  DensitySamples out;
  out.samples = Matrix(n, dim);
  out.log_q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, streams::kSampling, i));
    proposal.sample(rng, out.samples.row(i));
    out.log_q[i] = proposal.log_density(out.samples.row(i));
  }
  return out;
}

namespace {

bool finite_sample(const FlowSample& s) {
  if (!std::isfinite(s.log_q)) return false;
  for (double v : s.x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

SampleBuffer initial_buffer(const EnergySystem& system, const VectorFieldNet& net, const TrainConfig& cfg) {
  DensitySamples draw = initial_proposal_sample(system.dim(), cfg.proposal_scale, cfg.n_buffer,
                                                derive_seed(cfg.seed, streams::kInitialBuffer),
                                                net.architecture().center_space_dim);
  SampleBuffer buf;
  buf.energy = system.energies(draw.samples);
  buf.x = std::move(draw.samples);
  buf.log_prop = std::move(draw.log_q);
  buf.generation = 0;
  buf.source = ProposalSource::initial_proposal;
  return buf;
}

}  // namespace

SampleBuffer refresh_buffer(const VectorFieldNet& net, const EnergySystem& system, const TrainConfig& cfg,
                            std::size_t generation) {
  if (net.dim() != system.dim()) throw InvalidInput("network and system dimensions differ");
  const GaussianPrior prior = prior_for(net);
  const DivergenceMode div = cfg.buffer_divergence(system.dim());
  const std::uint64_t gen_seed = derive_seed(cfg.seed, streams::kModelBuffer, generation);

  SampleBuffer buf;
  buf.x = Matrix(0, system.dim());
  buf.generation = generation;
  buf.source = ProposalSource::model;
  std::optional<std::size_t> first_failure_step;

  auto attempt = [&](std::uint64_t s) -> std::optional<FlowSample> {
    try {
      FlowSample fs = sample_one_with_logdensity(net, prior, cfg.ode, div, s);
      if (finite_sample(fs)) return fs;
      if (!first_failure_step) first_failure_step = cfg.ode.n_steps;
    } catch (const OdeDivergence& e) {
      if (!first_failure_step) first_failure_step = e.step();
    }
    return std::nullopt;
  };

  for (std::size_t j = 0; j < cfg.n_buffer; ++j) {
    auto fs = attempt(derive_seed(gen_seed, 0, j));
    if (!fs) fs = attempt(derive_seed(gen_seed, 1, j));  // one resample, then drop
    if (!fs) {
      ++buf.dropped;
      continue;
    }
    buf.x.append_row(fs->x);
    buf.log_prop.push_back(fs->log_q);
  }
  if (buf.dropped * 2 > cfg.n_buffer) {
    throw BufferGenerationError("buffer generation " + std::to_string(generation) + " lost " +
                                    std::to_string(buf.dropped) + " of " + std::to_string(cfg.n_buffer) + " samples",
                                first_failure_step.value_or(0));
  }
  buf.energy = system.energies(buf.x);
  return buf;
}

// --- training loop ----------------------------------------------------------------

namespace {

void emit(const TrainHooks& hooks, const std::string& msg) {
  if (hooks.log) {
    hooks.log(msg);
  } else {
    std::cerr << "[ewfm] " << msg << '\n';
  }
}

template <typename TemperatureFn, typename LevelFn>
TrainResult run_training(const EnergySystem& system, VectorFieldNet& net, const TrainConfig& cfg, Algorithm algo,
                         TemperatureFn&& temperature_at, LevelFn&& level_at, const TrainHooks& hooks) {
  cfg.validate();
  if (net.dim() != system.dim()) throw InvalidInput("network and system dimensions differ");

  const std::uint64_t start_count = system.eval_count();
  const GaussianPrior prior = prior_for(net);
  const std::size_t n_params = net.num_params();

  TrainResult result;
  AdamState adam;
  adam.reset(n_params);

  SampleBuffer buffer = initial_buffer(system, net, cfg);
  result.buffer_generations = 1;
  if (hooks.on_buffer) hooks.on_buffer(buffer);

  Rng rng(derive_seed(cfg.seed, streams::kTrainLoop));
  std::vector<double> grad(n_params);
  std::vector<double> batch_energy(cfg.n_batch), batch_logprop(cfg.n_batch);
  std::vector<std::size_t> batch_index(cfg.n_batch);
  GradTape tape;
  std::size_t step = 0;
  std::size_t consecutive_degenerate = 0;
  std::size_t previous_level = level_at(0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double temperature = temperature_at(epoch - 1);
    const std::size_t level = level_at(epoch - 1);
    if (cfg.reset_moments_per_level && level != previous_level) adam.reset(n_params);
    previous_level = level;

    if (algo != Algorithm::ewfm && (epoch - 1) % cfg.refresh_every == 0 && epoch > 1) {
      buffer = refresh_buffer(net, system, cfg, result.buffer_generations);
      ++result.buffer_generations;
      ++result.refresh_count;
      result.samples_dropped += buffer.dropped;
      if (buffer.dropped > 0) {
        emit(hooks, "buffer generation " + std::to_string(buffer.generation) + ": dropped " +
                        std::to_string(buffer.dropped) + " non-finite samples");
      }
      if (hooks.on_buffer) hooks.on_buffer(buffer);
    }
    if (buffer.size() == 0) throw TrainingAborted("sample buffer is empty");

    for (std::size_t mb = 0; mb < cfg.minibatches_per_epoch; ++mb, ++step) {
      std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
      for (std::size_t n = 0; n < cfg.n_batch; ++n) {
        batch_index[n] = pick(rng);
        batch_energy[n] = buffer.energy[batch_index[n]];
        batch_logprop[n] = buffer.log_prop[batch_index[n]];
      }
      MetricsRow row;
      row.epoch = epoch;
      row.step = step;
      row.temperature = temperature;

      std::vector<double> weights;
      try {
        const ClippedLogWeights lw = clipped_log_weights(batch_energy, temperature, batch_logprop, cfg.clip);
        row.clip_count = lw.clipped;
        row.dropped = lw.dropped;
        weights = normalize_weights(lw.values);
      } catch (const DegenerateBatch&) {
        ++result.degenerate_steps;
        ++consecutive_degenerate;
        emit(hooks, "step " + std::to_string(step) + ": degenerate batch skipped");
        if (consecutive_degenerate >= cfg.max_degenerate_steps) {
          throw TrainingAborted("aborting after " + std::to_string(consecutive_degenerate) +
                                " consecutive degenerate batches (epoch " + std::to_string(epoch) +
                                "); the proposal has no overlap with the target");
        }
        row.eval_count = system.eval_count() - start_count;
        result.metrics.push_back(row);
        continue;
      }
      consecutive_degenerate = 0;

      std::fill(grad.begin(), grad.end(), 0.0);
      double loss_estimate = 0.0;
      for (std::size_t n = 0; n < cfg.n_batch; ++n) {
        const ConditionalDraw draw = draw_conditional(buffer.x.row(batch_index[n]), prior, rng);
        if (weights[n] == 0.0) continue;
        const double loss = cfm_sample_loss_accumulate(net, draw, tape, grad, weights[n]);
        loss_estimate += weights[n] * loss;
      }
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;

      if (!optimizer_step(net.params(), grad, adam, cfg.adam)) {
        ++result.rejected_updates;
        emit(hooks, "step " + std::to_string(step) + ": non-finite gradient, update rejected");
      }
      row.loss_estimate = loss_estimate;
      row.ess = weight_ess(weights);
      row.grad_norm = std::sqrt(norm2);
      row.eval_count = system.eval_count() - start_count;
      result.metrics.push_back(row);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, net);
  }

  result.eval_count = system.eval_count() - start_count;
  result.final_source = buffer.source;
  result.final_temperature = temperature_at(cfg.epochs - 1);
  return result;
}

}  // namespace

TrainResult train_ewfm(const EnergySystem& system, VectorFieldNet& net, const TrainConfig& cfg,
                       const TrainHooks& hooks) {
  const double t = system.temperature();
  return run_training(
      system, net, cfg, Algorithm::ewfm, [t](std::size_t) { return t; }, [](std::size_t) { return std::size_t{0}; },
      hooks);
}

TrainResult train_iewfm(const EnergySystem& system, VectorFieldNet& net, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  const double t = system.temperature();
  return run_training(
      system, net, cfg, Algorithm::iewfm, [t](std::size_t) { return t; }, [](std::size_t) { return std::size_t{0}; },
      hooks);
}

TrainResult train_aewfm(const EnergySystem& system, VectorFieldNet& net, const TrainConfig& cfg,
                        const AnnealSchedule& schedule, const TrainHooks& hooks) {
  const std::vector<double> levels = schedule.levels();
  if (schedule.t_final != system.temperature()) {
    throw ConfigError("anneal: t_final must equal the system temperature", 0, "t_final");
  }
  return run_training(
      system, net, cfg, Algorithm::aewfm,
      [&](std::size_t e) { return levels[schedule.level_at_epoch(e)]; },
      [&](std::size_t e) { return schedule.level_at_epoch(e); }, hooks);
}

}  // namespace ewfm
