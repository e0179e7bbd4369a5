#include "ewfm/reference_sampler.hpp"

#include <cmath>
#include <random>

#include "ewfm/error.hpp"
#include "ewfm/rng.hpp"

namespace ewfm {

void MhConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("oracle: step_size must be > 0", 0, "step_size");
  if (n_chains == 0) throw ConfigError("oracle: n_chains must be >= 1", 0, "n_chains");
  if (thinning == 0) throw ConfigError("oracle: thinning must be >= 1", 0, "thinning");
}

double mh_acceptance_probability(double e_current, double e_proposed, double temperature) {
  if (e_proposed <= e_current) return 1.0;
  return std::exp((e_current - e_proposed) / temperature);
}

MhResult mh_sample(const EnergySystem& system, const MhConfig& cfg,
                   const std::vector<std::vector<double>>& initial_states) {
  cfg.validate();
  if (initial_states.empty()) throw InvalidInput("oracle: no initial states");
  const std::size_t d = system.dim();
  const double temperature = system.temperature();
  const std::size_t per_chain = (cfg.n_samples + cfg.n_chains - 1) / cfg.n_chains;

  std::vector<Matrix> chain_samples(cfg.n_chains);
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  for (std::size_t c = 0; c < cfg.n_chains; ++c) {
    Rng rng(derive_seed(cfg.seed, streams::kOracle, c));
    std::normal_distribution<double> normal(0.0, cfg.step_size);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> x = initial_states[c % initial_states.size()];
    if (x.size() != d) throw InvalidInput("oracle: initial state has wrong dimension");
    double e = system.energy(x);
    std::vector<double> y(d);
    chain_samples[c] = Matrix(0, d);
    const std::size_t total_steps = cfg.burn_in + per_chain * cfg.thinning;
    for (std::size_t s = 0; s < total_steps; ++s) {
      for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + normal(rng);
      double e_new = 0.0;
      bool valid = true;
      try {
        e_new = system.energy(y);
      } catch (const SingularConfiguration&) {
        valid = false;
      }
      const double u = uni(rng);
      const bool post_burn = s >= cfg.burn_in;
      if (post_burn) ++proposed;
      if (valid && std::isfinite(e_new) && u < mh_acceptance_probability(e, e_new, temperature)) {
        x.swap(y);
        e = e_new;
        if (post_burn) ++accepted;
      }
      if (post_burn && (s - cfg.burn_in + 1) % cfg.thinning == 0) chain_samples[c].append_row(x);
    }
  }

  MhResult result;
  result.samples = Matrix(0, d);
  // Interleave so any prefix of the output mixes all chains.
  for (std::size_t k = 0; k < per_chain && result.samples.rows() < cfg.n_samples; ++k) {
    for (std::size_t c = 0; c < cfg.n_chains && result.samples.rows() < cfg.n_samples; ++c) {
      result.samples.append_row(chain_samples[c].row(k));
    }
  }
  result.acceptance_rate = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  if (proposed > 0 && (result.acceptance_rate < 0.05 || result.acceptance_rate > 0.95)) {
    result.warnings.push_back("acceptance rate " + std::to_string(result.acceptance_rate) +
                              " outside [0.05, 0.95]; " +
                              (result.acceptance_rate < 0.05 ? "decrease" : "increase") + " step_size");
  }
  return result;
}

std::vector<std::vector<double>> default_initial_states(const EnergySystem& system, std::size_t n_chains,
                                                        std::uint64_t seed) {
  auto modes = system.mode_centers();
  if (!modes.empty()) return modes;
  const std::size_t d = system.dim();
  std::vector<std::vector<double>> states;
  if (system.n_particles() > 0) {
    // Cubic lattice with unit spacing, centred, plus a small jitter per chain.
    const std::size_t n = system.n_particles();
    const std::size_t sd = system.space_dim();
    std::size_t side = 1;
    while (static_cast<std::size_t>(std::pow(static_cast<double>(side), static_cast<double>(sd))) < n) ++side;
    for (std::size_t c = 0; c < std::max<std::size_t>(n_chains, 1); ++c) {
      Rng rng(derive_seed(seed, streams::kOracle, 1000 + c));
      std::normal_distribution<double> jitter(0.0, 0.05);
      std::vector<double> x(d);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx = i;
        for (std::size_t k = 0; k < sd; ++k) {
          x[i * sd + k] = static_cast<double>(idx % side) - 0.5 * static_cast<double>(side - 1) + jitter(rng);
          idx /= side;
        }
      }
      states.push_back(std::move(x));
    }
    return states;
  }
  states.emplace_back(d, 0.0);
  return states;
}

}  // namespace ewfm
