#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ewfm/energy.hpp"
#include "ewfm/matrix.hpp"

namespace ewfm {

struct MhConfig {
  double step_size = 0.5;
  std::size_t n_chains = 8;
  std::size_t burn_in = 1000;
  std::size_t thinning = 10;
  std::size_t n_samples = 2000;  // total across chains
  std::uint64_t seed = 0;
  void validate() const;
};

struct MhResult {
  Matrix samples;
  double acceptance_rate = 0.0;
  std::vector<std::string> warnings;
};

/// Gaussian random-walk Metropolis–Hastings. Chains start at `initial_states`
/// (cycled when there are fewer states than chains); samples are interleaved
/// chain by chain in chain order.
MhResult mh_sample(const EnergySystem& system, const MhConfig& cfg, const std::vector<std::vector<double>>& initial_states);

/// Starting points for the oracle: the system's known mode centres, or a
/// jittered lattice for particle systems, or the origin.
std::vector<std::vector<double>> default_initial_states(const EnergySystem& system, std::size_t n_chains,
                                                        std::uint64_t seed);

/// Acceptance probability min(1, exp((E_current - E_proposed)/T)).
double mh_acceptance_probability(double e_current, double e_proposed, double temperature);

}  // namespace ewfm
