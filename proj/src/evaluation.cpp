#include "ewfm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ewfm/csv.hpp"
#include "ewfm/error.hpp"
#include "ewfm/ewfm_core.hpp"
#include "ewfm/rng.hpp"

namespace ewfm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* v, std::size_t n) {
  double m = kNegInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

W2Result sinkhorn_w2(const Matrix& a, const Matrix& b, const W2Options& opts) {
  const Matrix cost = squared_distance_matrix(a, b);
  const std::size_t n = a.rows();
  const std::size_t m = b.rows();
  const double mean_cost =
      std::accumulate(cost.data().begin(), cost.data().end(), 0.0) / static_cast<double>(n * m);
  if (mean_cost == 0.0) return {0.0, false, 0};
  const double eps = opts.sinkhorn_reg * mean_cost;
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));

  std::vector<double> f(n, 0.0), g(m, 0.0), scratch(std::max(n, m));
  W2Result res;
  res.exact = false;
  for (std::size_t it = 0; it < opts.sinkhorn_max_iter; ++it) {
    res.iterations = it + 1;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) scratch[j] = (g[j] - cost(i, j)) / eps;
      f[i] = eps * (log_a - log_sum_exp(scratch.data(), m));
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = (f[i] - cost(i, j)) / eps;
      g[j] = eps * (log_b - log_sum_exp(scratch.data(), n));
    }
    // After the g update the column marginals are exact; check the rows.
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += std::exp((f[i] + g[j] - cost(i, j)) / eps);
      err += std::abs(row - 1.0 / static_cast<double>(n));
    }
    if (err < opts.sinkhorn_tol) break;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) total += std::exp((f[i] + g[j] - cost(i, j)) / eps) * cost(i, j);
  }
  res.value = std::sqrt(std::max(total, 0.0));
  return res;
}

}  // namespace

W2Result w2_distance(const Matrix& a, const Matrix& b, const W2Options& opts) {
  if (a.rows() == 0 || b.rows() == 0) throw InvalidInput("w2_distance: empty sample set");
  if (a.cols() != b.cols()) throw InvalidInput("w2_distance: dimension mismatch");
  if (!opts.force_approximate && a.rows() == b.rows() && a.rows() <= opts.exact_threshold) {
    const Matrix cost = squared_distance_matrix(a, b);
    const Assignment match = solve_assignment(cost);
    return {std::sqrt(std::max(match.total_cost, 0.0) / static_cast<double>(a.rows())), true, 0};
  }
  return sinkhorn_w2(a, b, opts);
}

NllResult model_nll(const VectorFieldNet& net, const Matrix& test_samples, const OdeConfig& ode,
                    std::optional<DivergenceMode> div, std::uint64_t seed) {
  if (test_samples.rows() == 0) throw InvalidInput("model_nll: no test samples");
  if (test_samples.cols() != net.dim()) throw InvalidInput("model_nll: dimension mismatch");
  const DivergenceMode mode = div.value_or(net.dim() <= 8 ? DivergenceMode::exact() : DivergenceMode::hutchinson(10));
  const GaussianPrior prior = prior_for(net);
  NllResult res;
  double sum = 0.0, sum2 = 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < test_samples.rows(); ++i) {
    try {
      const Likelihood ll = log_likelihood(net, prior, test_samples.row(i), ode, mode, derive_seed(seed, 0, i));
      if (!std::isfinite(ll.log_p1)) {
        ++res.failures;
        continue;
      }
      sum += -ll.log_p1;
      sum2 += ll.log_p1 * ll.log_p1;
      ++ok;
    } catch (const OdeDivergence&) {
      ++res.failures;
    } catch (const InvalidInput&) {
      ++res.failures;
    }
  }
  if (res.failures * 100 >= test_samples.rows() || ok == 0) {
    throw EvaluationError("model_nll: " + std::to_string(res.failures) + " of " + std::to_string(test_samples.rows()) +
                          " likelihood evaluations failed");
  }
  const double n = static_cast<double>(ok);
  res.mean = sum / n;
  const double var = std::max(sum2 / n - res.mean * res.mean, 0.0);
  res.std_error = ok > 1 ? std::sqrt(var * n / (n - 1.0) / n) : 0.0;
  return res;
}

double snis_observable(std::span<const double> log_q, std::span<const double> energies, double temperature,
                       std::span<const double> observable) {
  if (log_q.size() != energies.size() || observable.size() != energies.size()) {
    throw InvalidInput("snis_observable: length mismatch");
  }
  const LogWeights lw = compute_log_weights(energies, temperature, log_q);
  const std::vector<double> w = normalize_weights(lw.values);
  double s = 0.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    s += w[i] * observable[i];
    wsum += w[i];
  }
  return s / wsum;
}

double estimate_log_partition(std::span<const double> log_prop, std::span<const double> energies, double temperature) {
  if (log_prop.size() != energies.size()) throw InvalidInput("estimate_log_partition: length mismatch");
  if (energies.empty()) throw InvalidInput("estimate_log_partition: no samples");
  const LogWeights lw = compute_log_weights(energies, temperature, log_prop);
  return log_mean_exp(lw.values);
}

double log_partition_std_error(std::span<const double> log_prop, std::span<const double> energies, double temperature) {
  const LogWeights lw = compute_log_weights(energies, temperature, log_prop);
  double m = kNegInf;
  for (double v : lw.values) m = std::max(m, v);
  if (m == kNegInf) throw DegenerateBatch("log_partition_std_error: all weights zero");
  const double n = static_cast<double>(lw.values.size());
  double s1 = 0.0, s2 = 0.0;
  for (double v : lw.values) {
    const double w = std::exp(v - m);
    s1 += w;
    s2 += w * w;
  }
  const double mean = s1 / n;
  const double var = std::max(s2 / n - mean * mean, 0.0) * n / std::max(n - 1.0, 1.0);
  return std::sqrt(var / n) / mean;
}

double histogram_w1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("histogram_w1: empty input");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  for (double v : sa) {
    if (!std::isfinite(v)) throw InvalidInput("histogram_w1: non-finite value");
  }
  for (double v : sb) {
    if (!std::isfinite(v)) throw InvalidInput("histogram_w1: non-finite value");
  }
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  // Walk the merged quantile breakpoints k/na and l/nb.
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double next_a = static_cast<double>(i + 1) / na;
    const double next_b = static_cast<double>(j + 1) / nb;
    const double next = std::min(next_a, next_b);
    total += (next - u) * std::abs(sa[i] - sb[j]);
    u = next;
    if (next_a <= next) ++i;
    if (next_b <= next) ++j;
  }
  return total;
}

std::pair<double, double> joint_range(std::span<const double> a, std::span<const double> b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : a) {
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  for (double v : b) {
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  if (!(lo < hi)) {
    if (!std::isfinite(lo)) return {0.0, 1.0};
    return {lo - 0.5, lo + 0.5};
  }
  return {lo, hi};
}

HistogramData histogram_densities(std::span<const double> a, std::span<const double> b, std::size_t n_bins, double lo,
                                  double hi) {
  if (n_bins == 0 || !(hi > lo)) throw InvalidInput("histogram: need n_bins >= 1 and hi > lo");
  HistogramData h;
  const double width = (hi - lo) / static_cast<double>(n_bins);
  h.bin_center.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) h.bin_center[k] = lo + (static_cast<double>(k) + 0.5) * width;
  auto fill = [&](std::span<const double> vals, std::vector<double>& dens) {
    dens.assign(n_bins, 0.0);
    if (vals.empty()) return;
    for (double v : vals) {
      if (!(v >= lo && v <= hi)) continue;
      auto k = static_cast<std::size_t>((v - lo) / width);
      dens[std::min(k, n_bins - 1)] += 1.0;
    }
    for (double& d : dens) d /= static_cast<double>(vals.size()) * width;
  };
  fill(a, h.density_a);
  fill(b, h.density_b);
  return h;
}

void write_histogram_csv(const std::filesystem::path& path, const HistogramData& h) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "bin_center,density_a,density_b\n";
  for (std::size_t k = 0; k < h.bin_center.size(); ++k) {
    out << format_double(h.bin_center[k]) << ',' << format_double(h.density_a[k]) << ','
        << format_double(h.density_b[k]) << '\n';
  }
}

std::vector<double> all_pair_distances(const Matrix& samples, std::size_t n_particles, std::size_t space_dim) {
  std::vector<double> out;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const auto d = pair_distances(samples.row(i), n_particles, space_dim);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

// --- report -----------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> EvalReport::fields() const {
  return {
      {"w2", format_double(w2)},
      {"w2_exact", w2_exact ? "true" : "false"},
      {"nll", format_double(nll)},
      {"nll_std_error", format_double(nll_std_error)},
      {"energy_hist_w1", format_double(energy_hist_w1)},
      {"dist_hist_w1", format_double(dist_hist_w1)},
      {"weight_ess_fraction", format_double(weight_ess_fraction)},
      {"eval_count", std::to_string(eval_count)},
      {"n_model_samples", std::to_string(n_model_samples)},
      {"n_reference", std::to_string(n_reference)},
  };
}

std::string EvalReport::to_key_value() const {
  std::ostringstream out;
  for (const auto& [k, v] : fields()) out << k << " = " << v << '\n';
  return out.str();
}

std::string EvalReport::csv_header() const {
  std::string s;
  for (const auto& [k, v] : fields()) s += (s.empty() ? "" : ",") + k;
  return s;
}

std::string EvalReport::csv_row() const {
  std::string s;
  bool first = true;
  for (const auto& [k, v] : fields()) {
    s += (first ? "" : ",") + v;
    first = false;
  }
  return s;
}

EvalOutputs evaluate_model(const EnergySystem& system, const VectorFieldNet& net, const Matrix& reference,
                           const EvalOptions& opts) {
  if (reference.rows() == 0) throw InvalidInput("evaluate: empty reference set");
  if (reference.cols() != system.dim() || net.dim() != system.dim()) {
    throw InvalidInput("evaluate: reference/model/system dimensions differ");
  }
  EvalOutputs out;
  const std::size_t n = std::min(opts.n_model_samples, reference.rows());
  const GaussianPrior prior = prior_for(net);
  const DivergenceMode div = system.dim() <= 8 ? DivergenceMode::exact() : DivergenceMode::hutchinson(10);
  DensitySamples model = sample_with_logdensity(net, prior, n, opts.ode, div, derive_seed(opts.seed, streams::kSampling));

  Matrix ref(0, reference.cols());
  for (std::size_t i = 0; i < n; ++i) ref.append_row(reference.row(i));

  const W2Result w2 = w2_distance(model.samples, ref, opts.w2);
  out.report.w2 = w2.value;
  out.report.w2_exact = w2.exact;

  const NllResult nll = model_nll(net, ref, opts.ode, std::nullopt, derive_seed(opts.seed, streams::kLikelihood));
  out.report.nll = nll.mean;
  out.report.nll_std_error = nll.std_error;

  const std::vector<double> e_model = system.energies(model.samples);
  const std::vector<double> e_ref = system.energies(ref);
  std::vector<double> e_model_finite, e_ref_finite;
  for (double e : e_model) {
    if (std::isfinite(e)) e_model_finite.push_back(e);
  }
  for (double e : e_ref) {
    if (std::isfinite(e)) e_ref_finite.push_back(e);
  }
  out.report.energy_hist_w1 = histogram_w1(e_model_finite, e_ref_finite);
  // Clamp the plotting range to the reference bulk; model tails can be huge.
  auto [lo, hi] = joint_range(e_ref_finite, e_ref_finite);
  out.energy_hist = histogram_densities(e_model_finite, e_ref_finite, opts.histogram_bins, lo, hi);

  if (system.n_particles() > 0) {
    const auto d_model = all_pair_distances(model.samples, system.n_particles(), system.space_dim());
    const auto d_ref = all_pair_distances(ref, system.n_particles(), system.space_dim());
    out.report.dist_hist_w1 = histogram_w1(d_model, d_ref);
    auto [dlo, dhi] = joint_range(d_model, d_ref);
    out.distance_hist = histogram_densities(d_model, d_ref, opts.histogram_bins, dlo, dhi);
  }

  const LogWeights lw = compute_log_weights(e_model, system.temperature(), model.log_q);
  const std::vector<double> w = normalize_weights(lw.values);
  out.report.weight_ess_fraction = weight_ess(w) / static_cast<double>(w.size());
  out.report.n_model_samples = n;
  out.report.n_reference = ref.rows();
  out.model_samples = std::move(model.samples);
  return out;
}

}  // namespace ewfm
