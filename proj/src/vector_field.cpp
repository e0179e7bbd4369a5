#include "ewfm/vector_field.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ewfm/csv.hpp"
#include "ewfm/error.hpp"
#include "ewfm/kernels.hpp"
#include "ewfm/rng.hpp"

namespace ewfm {

std::size_t MlpArchitecture::num_params() const {
  std::size_t total = 0;
  std::size_t in = input_width();
  for (std::size_t h : hidden) {
    total += h * in + h;
    in = h;
  }
  return total + dim * in + dim;
}

void MlpArchitecture::validate() const {
  if (dim == 0) throw ConfigError("model: dim must be >= 1");
  if (time_embed_dim == 0 || time_embed_dim % 2 != 0) {
    throw ConfigError("model: time_embed_dim must be an even positive integer", 0, "time_embed_dim");
  }
  if (!(time_max_frequency >= 1.0)) throw ConfigError("model: time_max_frequency must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("model: hidden widths must be positive", 0, "hidden");
  }
  if (center_space_dim != 0 && dim % center_space_dim != 0) {
    throw ConfigError("model: dim must be a multiple of center_space_dim", 0, "center_space_dim");
  }
}

void time_embedding(double t, double max_frequency, std::span<double> out) {
  if (out.size() == 0 || out.size() % 2 != 0) throw ConfigError("time embedding width must be even and positive");
  const std::size_t half = out.size() / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double omega =
        half == 1 ? 1.0 : std::pow(max_frequency, static_cast<double>(k) / static_cast<double>(half - 1));
    out[k] = std::sin(omega * t);
    out[half + k] = std::cos(omega * t);
  }
}

std::vector<double> time_embedding(double t, std::size_t dim, double max_frequency) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("time embedding width must be even and positive");
  std::vector<double> out(dim);
  time_embedding(t, max_frequency, out);
  return out;
}

void project_zero_centroid(std::span<double> x, std::size_t space_dim) {
  if (space_dim == 0) return;
  const std::size_t n = x.size() / space_dim;
  for (std::size_t k = 0; k < space_dim; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i * space_dim + k];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) x[i * space_dim + k] -= mean;
  }
}

VectorFieldNet::VectorFieldNet(MlpArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t in = arch_.input_width();
  std::size_t offset = 0;
  auto add = [&](std::size_t out) {
    layers_.push_back({in, out, offset, offset + in * out});
    offset += in * out + out;
    in = out;
  };
  for (std::size_t h : arch_.hidden) add(h);
  add(arch_.dim);
  params_.assign(offset, 0.0);
}

VectorFieldNet VectorFieldNet::initialized(MlpArchitecture arch, std::uint64_t seed) {
  VectorFieldNet net(std::move(arch));
  Rng rng(derive_seed(seed, streams::kInit));
  for (std::size_t l = 0; l + 1 < net.layers_.size(); ++l) {
    const Layer& layer = net.layers_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (std::size_t i = 0; i < layer.in * layer.out + layer.out; ++i) net.params_[layer.w_offset + i] = uni(rng);
  }
  return net;
}

void VectorFieldNet::set_params(std::span<const double> p) {
  if (p.size() != params_.size()) throw InvalidInput("parameter vector length does not match architecture");
  std::copy(p.begin(), p.end(), params_.begin());
}

void VectorFieldNet::check_tape(const GradTape& tape) const {
  if (tape.owner_params != params_.size() || tape.owner_input != arch_.input_width() ||
      tape.pre.size() != arch_.hidden.size() || tape.output.size() != arch_.dim) {
    throw InternalError("gradient tape does not belong to this network");
  }
}

std::span<const double> VectorFieldNet::forward(double t, std::span<const double> x, GradTape& tape) const {
  const auto& k = kernels::active();
  const std::size_t d = arch_.dim;
  if (x.size() != d) throw InvalidInput("forward: input has wrong dimension");

  tape.owner_params = params_.size();
  tape.owner_input = arch_.input_width();
  tape.input.resize(arch_.input_width());
  std::copy(x.begin(), x.end(), tape.input.begin());
  project_zero_centroid(std::span(tape.input).first(d), arch_.center_space_dim);
  time_embedding(t, arch_.time_max_frequency, std::span(tape.input).subspan(d));

  const std::size_t n_hidden = arch_.hidden.size();
  tape.pre.resize(n_hidden);
  tape.sig.resize(n_hidden);
  tape.act.resize(n_hidden);
  const double* a = tape.input.data();
  for (std::size_t l = 0; l < n_hidden; ++l) {
    const Layer& L = layers_[l];
    tape.pre[l].resize(L.out);
    tape.sig[l].resize(L.out);
    tape.act[l].resize(L.out);
    k.affine(params_.data() + L.w_offset, params_.data() + L.b_offset, a, tape.pre[l].data(), L.out, L.in);
    k.silu(tape.pre[l].data(), tape.act[l].data(), tape.sig[l].data(), L.out);
    for (double v : tape.act[l]) {
      if (!std::isfinite(v)) throw NumericalOverflow("non-finite activation", l);
    }
    a = tape.act[l].data();
  }
  const Layer& last = layers_.back();
  tape.output.resize(d);
  k.affine(params_.data() + last.w_offset, params_.data() + last.b_offset, a, tape.output.data(), d, last.in);
  project_zero_centroid(tape.output, arch_.center_space_dim);
  for (double v : tape.output) {
    if (!std::isfinite(v)) throw NumericalOverflow("non-finite output", n_hidden);
  }
  return tape.output;
}

std::vector<double> VectorFieldNet::forward(double t, std::span<const double> x) const {
  GradTape tape;
  const auto out = forward(t, x, tape);
  return {out.begin(), out.end()};
}

void VectorFieldNet::backpropagate(const GradTape& tape, std::span<const double> upstream, double scale,
                                   double* grad, std::vector<double>& input_grad) const {
  check_tape(tape);
  if (upstream.size() != arch_.dim) throw InternalError("upstream gradient has wrong dimension");
  const auto& k = kernels::active();
  thread_local std::vector<double> delta, prev;

  delta.assign(upstream.begin(), upstream.end());
  project_zero_centroid(delta, arch_.center_space_dim);
  if (scale != 1.0) {
    for (double& v : delta) v *= scale;
  }

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    const double* a_in = l == 0 ? tape.input.data() : tape.act[l - 1].data();
    if (grad) {
      k.outer_acc(1.0, delta.data(), a_in, grad + L.w_offset, L.out, L.in);
      k.axpy(1.0, delta.data(), grad + L.b_offset, L.out);
    }
    if (l == 0 && grad) break;  // parameter pass never needs the input gradient
    prev.assign(L.in, 0.0);
    k.affine_t_acc(params_.data() + L.w_offset, delta.data(), prev.data(), L.out, L.in);
    if (l > 0) k.silu_grad_mul(tape.pre[l - 1].data(), tape.sig[l - 1].data(), prev.data(), prev.data(), L.in);
    delta.swap(prev);
  }
  if (!grad) {
    input_grad.assign(delta.begin(), delta.begin() + static_cast<std::ptrdiff_t>(arch_.dim));
    project_zero_centroid(input_grad, arch_.center_space_dim);
  }
}

void VectorFieldNet::backward_params(const GradTape& tape, std::span<const double> upstream, std::span<double> grad,
                                     double scale) const {
  if (grad.size() != params_.size()) throw InternalError("gradient buffer has wrong length");
  std::vector<double> unused;
  backpropagate(tape, upstream, scale, grad.data(), unused);
}

std::vector<double> VectorFieldNet::backward_params(const GradTape& tape, std::span<const double> upstream) const {
  std::vector<double> grad(params_.size(), 0.0);
  backward_params(tape, upstream, grad);
  return grad;
}

std::vector<double> VectorFieldNet::backward_input(const GradTape& tape, std::span<const double> upstream) const {
  std::vector<double> out;
  backpropagate(tape, upstream, 1.0, nullptr, out);
  return out;
}

double VectorFieldNet::forward_with_trace(double t, std::span<const double> x, const Matrix* probes, GradTape& tape,
                                          std::span<double> velocity) const {
  const auto& k = kernels::active();
  const std::size_t d = arch_.dim;
  const auto u = forward(t, x, tape);
  std::copy(u.begin(), u.end(), velocity.begin());

  const std::size_t n_probe = probes ? probes->rows() : d;
  if (probes && probes->cols() != d) throw InternalError("probe dimension mismatch");

  std::size_t max_width = arch_.input_width();
  for (std::size_t h : arch_.hidden) max_width = std::max(max_width, h);
  tape.scratch_a.resize(max_width);
  tape.scratch_b.resize(max_width);

  double trace = 0.0;
  for (std::size_t p = 0; p < n_probe; ++p) {
    // Tangent of the network input: the embedding does not depend on x.
    double* ta = tape.scratch_a.data();
    double* tb = tape.scratch_b.data();
    std::fill(ta, ta + arch_.input_width(), 0.0);
    if (probes) {
      std::copy(probes->row(p).begin(), probes->row(p).end(), ta);
    } else {
      ta[p] = 1.0;
    }
    std::span<double> dir(ta, d);
    project_zero_centroid(dir, arch_.center_space_dim);

    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      k.affine(params_.data() + L.w_offset, nullptr, ta, tb, L.out, L.in);
      if (l + 1 < layers_.size()) k.silu_grad_mul(tape.pre[l].data(), tape.sig[l].data(), tb, tb, L.out);
      std::swap(ta, tb);
    }
    std::span<double> jv(ta, d);
    project_zero_centroid(jv, arch_.center_space_dim);
    if (probes) {
      trace += k.dot(probes->row(p).data(), ta, d);
    } else {
      trace += ta[p];
    }
  }
  if (probes) trace /= static_cast<double>(n_probe);
  if (!std::isfinite(trace)) throw NumericalOverflow("non-finite divergence", layers_.size() - 1);
  return trace;
}

// --- checkpoints ---------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const VectorFieldNet& net, std::uint64_t seed) {
  const auto& a = net.architecture();
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write checkpoint " + path.string());
  out << "ewfm-checkpoint\n";
  out << "schema_version " << kCheckpointSchema << '\n';
  out << "dim " << a.dim << '\n';
  out << "time_embed_dim " << a.time_embed_dim << '\n';
  out << "time_max_frequency " << format_double(a.time_max_frequency) << '\n';
  out << "hidden";
  for (std::size_t h : a.hidden) out << ' ' << h;
  out << '\n';
  out << "center_space_dim " << a.center_space_dim << '\n';
  out << "seed " << seed << '\n';
  out << "num_params " << net.num_params() << '\n';
  out << "params\n";
  for (double p : net.params()) out << format_double(p) << '\n';
  if (!out) throw InvalidInput("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw ConfigError("checkpoint truncated", line_no + 1);
    ++line_no;
    return line;
  };
  if (trim(next()) != "ewfm-checkpoint") throw ConfigError("not an ewfm checkpoint", line_no);

  MlpArchitecture arch;
  arch.hidden.clear();
  std::uint64_t seed = 0;
  std::size_t n_params = 0;
  bool have_schema = false;
  while (true) {
    const std::string l(trim(next()));
    if (l == "params") break;
    std::istringstream ss(l);
    std::string key;
    ss >> key;
    if (key == "schema_version") {
      int v = 0;
      ss >> v;
      if (v != kCheckpointSchema) {
        throw ConfigError("checkpoint schema " + std::to_string(v) + " not supported (expected " +
                              std::to_string(kCheckpointSchema) + ")",
                          line_no, key);
      }
      have_schema = true;
    } else if (key == "dim") {
      ss >> arch.dim;
    } else if (key == "time_embed_dim") {
      ss >> arch.time_embed_dim;
    } else if (key == "time_max_frequency") {
      std::string tok;
      ss >> tok;
      arch.time_max_frequency = parse_double(tok);
    } else if (key == "hidden") {
      std::size_t h;
      while (ss >> h) arch.hidden.push_back(h);
    } else if (key == "center_space_dim") {
      ss >> arch.center_space_dim;
    } else if (key == "seed") {
      ss >> seed;
    } else if (key == "num_params") {
      ss >> n_params;
    } else {
      throw ConfigError("unknown checkpoint key '" + key + "'", line_no, key);
    }
    if (ss.fail() && key != "hidden") throw ConfigError("malformed value", line_no, key);
  }
  if (!have_schema) throw ConfigError("checkpoint has no schema_version");
  VectorFieldNet net(arch);
  if (n_params != net.num_params()) throw ConfigError("checkpoint parameter count does not match architecture");
  std::vector<double> params;
  params.reserve(n_params);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      params.push_back(parse_double(line));
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what(), line_no);
    }
  }
  if (params.size() != n_params) throw ConfigError("checkpoint has " + std::to_string(params.size()) + " parameters");
  net.set_params(params);
  return {std::move(net), seed};
}

}  // namespace ewfm
