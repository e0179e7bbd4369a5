#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace ewfm {

enum class ClipStrategy { none, clip_energy, clip_logweight };

ClipStrategy parse_clip_strategy(std::string_view name);
std::string_view clip_strategy_name(ClipStrategy s);

struct ClipPolicy {
  ClipStrategy strategy = ClipStrategy::clip_logweight;
  double percentile = 99.9;  // in (0, 100]
  void validate() const;
};

/// -E_i/T - log_prop_i. Entries whose inputs are not finite (or whose energy is
/// NaN) are set to -inf, which removes them from the batch, and counted.
struct LogWeights {
  std::vector<double> values;
  std::size_t dropped = 0;
};

LogWeights compute_log_weights(std::span<const double> energies, double temperature, std::span<const double> log_prop);

/// Nearest-rank percentile over the finite entries: the ceil(p/100 * n)-th
/// smallest value. Throws DegenerateBatch when no entry is finite.
double nearest_rank_percentile(std::span<const double> values, double percentile);

struct ClipResult {
  std::vector<double> values;
  std::size_t clipped = 0;
  double threshold = 0.0;
};

/// min(value, tau) with tau the batch percentile of the unclipped values;
/// identity for ClipStrategy::none. -inf entries stay -inf.
ClipResult clip_log_weights(std::span<const double> values, const ClipPolicy& policy);

/// Log-weights with the policy applied in the right place: clip_energy caps
/// -E/T before log_prop is subtracted, clip_logweight caps the sum.
struct ClippedLogWeights {
  std::vector<double> values;
  std::size_t clipped = 0;
  std::size_t dropped = 0;
};

ClippedLogWeights clipped_log_weights(std::span<const double> energies, double temperature,
                                      std::span<const double> log_prop, const ClipPolicy& policy);

/// Softmax via max shift. Throws DegenerateBatch when all entries are -inf.
std::vector<double> normalize_weights(std::span<const double> log_w);

/// sum_i w_i g_i over rows of the n x P gradient matrix `grads`.
std::vector<double> snis_gradient(std::span<const double> grads, std::size_t n_params,
                                  std::span<const double> norm_weights);

double ewfm_loss_estimate(std::span<const double> losses, std::span<const double> norm_weights);

/// 1 / sum w_i^2.
double weight_ess(std::span<const double> norm_weights);

/// log mean exp(log_w) over finite entries, computed with a max shift.
double log_mean_exp(std::span<const double> log_w);

}  // namespace ewfm
