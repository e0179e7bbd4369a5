#include "ewfm/ewfm_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ewfm/error.hpp"

namespace ewfm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

ClipStrategy parse_clip_strategy(std::string_view name) {
  if (name == "none") return ClipStrategy::none;
  if (name == "clip-energy") return ClipStrategy::clip_energy;
  if (name == "clip-logweight") return ClipStrategy::clip_logweight;
  throw ConfigError("unknown clip strategy '" + std::string(name) + "'", 0, "clip_strategy");
}

std::string_view clip_strategy_name(ClipStrategy s) {
  switch (s) {
    case ClipStrategy::none:
      return "none";
    case ClipStrategy::clip_energy:
      return "clip-energy";
    case ClipStrategy::clip_logweight:
      return "clip-logweight";
  }
  return "none";
}

void ClipPolicy::validate() const {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw ConfigError("clip percentile must be in (0, 100]", 0, "clip_percentile");
  }
}

LogWeights compute_log_weights(std::span<const double> energies, double temperature, std::span<const double> log_prop) {
  if (energies.size() != log_prop.size()) throw InternalError("energies/log_prop length mismatch");
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be > 0");
  LogWeights out;
  out.values.resize(energies.size());
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const double e = energies[i];
    const double lp = log_prop[i];
    // E = +inf is a legitimate zero-weight sample; everything else non-finite is dropped.
    if (!std::isfinite(lp) || std::isnan(e) || e == -std::numeric_limits<double>::infinity()) {
      out.values[i] = kNegInf;
      ++out.dropped;
      continue;
    }
    out.values[i] = -e / temperature - lp;
  }
  return out;
}

double nearest_rank_percentile(std::span<const double> values, double percentile) {
  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) throw DegenerateBatch("percentile of a batch without finite entries");
  const double n = static_cast<double>(finite.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, finite.size());
  std::nth_element(finite.begin(), finite.begin() + static_cast<std::ptrdiff_t>(rank - 1), finite.end());
  return finite[rank - 1];
}

ClipResult clip_log_weights(std::span<const double> values, const ClipPolicy& policy) {
  policy.validate();
  ClipResult out;
  out.values.assign(values.begin(), values.end());
  out.threshold = std::numeric_limits<double>::infinity();
  if (policy.strategy == ClipStrategy::none || values.empty()) return out;
  out.threshold = nearest_rank_percentile(values, policy.percentile);
  for (double& v : out.values) {
    if (v > out.threshold) {
      v = out.threshold;
      ++out.clipped;
    }
  }
  return out;
}

ClippedLogWeights clipped_log_weights(std::span<const double> energies, double temperature,
                                      std::span<const double> log_prop, const ClipPolicy& policy) {
  ClippedLogWeights out;
  if (policy.strategy == ClipStrategy::clip_energy) {
    LogWeights base = compute_log_weights(energies, temperature, log_prop);
    out.dropped = base.dropped;
    std::vector<double> neg_energy(energies.size(), kNegInf);
    for (std::size_t i = 0; i < energies.size(); ++i) {
      if (std::isfinite(base.values[i])) neg_energy[i] = -energies[i] / temperature;
    }
    ClipResult capped = clip_log_weights(neg_energy, policy);
    out.clipped = capped.clipped;
    out.values.resize(energies.size());
    for (std::size_t i = 0; i < energies.size(); ++i) {
      out.values[i] = std::isfinite(base.values[i]) ? capped.values[i] - log_prop[i] : kNegInf;
    }
    return out;
  }
  LogWeights base = compute_log_weights(energies, temperature, log_prop);
  out.dropped = base.dropped;
  ClipResult capped = clip_log_weights(base.values, policy);
  out.values = std::move(capped.values);
  out.clipped = capped.clipped;
  return out;
}

std::vector<double> normalize_weights(std::span<const double> log_w) {
  double m = kNegInf;
  for (double v : log_w) {
    if (std::isnan(v)) throw InvalidInput("NaN log-weight");
    m = std::max(m, v);
  }
  if (m == kNegInf) throw DegenerateBatch("all importance weights are zero");
  if (m == std::numeric_limits<double>::infinity()) throw InvalidInput("infinite log-weight");
  std::vector<double> w(log_w.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    w[i] = std::exp(log_w[i] - m);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

std::vector<double> snis_gradient(std::span<const double> grads, std::size_t n_params,
                                  std::span<const double> norm_weights) {
  if (grads.size() != n_params * norm_weights.size()) throw InternalError("snis_gradient: weight/gradient count mismatch");
  std::vector<double> out(n_params, 0.0);
  for (std::size_t i = 0; i < norm_weights.size(); ++i) {
    const double w = norm_weights[i];
    if (w == 0.0) continue;
    const double* g = grads.data() + i * n_params;
    for (std::size_t p = 0; p < n_params; ++p) out[p] += w * g[p];
  }
  return out;
}

double ewfm_loss_estimate(std::span<const double> losses, std::span<const double> norm_weights) {
  if (losses.size() != norm_weights.size()) throw InternalError("ewfm_loss_estimate: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (norm_weights[i] != 0.0) s += norm_weights[i] * losses[i];
  }
  return s;
}

double weight_ess(std::span<const double> norm_weights) {
  double s = 0.0;
  for (double w : norm_weights) s += w * w;
  return 1.0 / s;
}

double log_mean_exp(std::span<const double> log_w) {
  double m = kNegInf;
  std::size_t n = 0;
  for (double v : log_w) {
    if (std::isnan(v)) continue;
    m = std::max(m, v);
    ++n;
  }
  if (n == 0 || m == kNegInf) throw DegenerateBatch("log_mean_exp of an empty or all-zero batch");
  double s = 0.0;
  for (double v : log_w) {
    if (!std::isnan(v)) s += std::exp(v - m);
  }
  return m + std::log(s) - std::log(static_cast<double>(n));
}

}  // namespace ewfm
