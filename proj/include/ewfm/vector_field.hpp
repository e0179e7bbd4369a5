#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ewfm/matrix.hpp"

namespace ewfm {

/// Shape of the time-conditioned MLP u_t(x). Input is [x; embed(t)], hidden
/// layers use x*sigmoid(x), the output layer is affine with width dim.
struct MlpArchitecture {
  std::size_t dim = 2;
  std::size_t time_embed_dim = 16;
  std::vector<std::size_t> hidden{128, 128, 128};
  double time_max_frequency = 1000.0;
  /// Non-zero for particle systems: input and output are projected onto the
  /// zero-centroid subspace of `center_space_dim`-dimensional particles.
  std::size_t center_space_dim = 0;

  std::size_t input_width() const { return dim + time_embed_dim; }
  std::size_t num_params() const;
  /// Throws ConfigError on inconsistent values.
  void validate() const;

  friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

/// [sin(w_1 t) .. sin(w_K t), cos(w_1 t) .. cos(w_K t)], K = dim/2, with w_k
/// geometric from 1 to max_frequency.
std::vector<double> time_embedding(double t, std::size_t dim, double max_frequency = 1000.0);
void time_embedding(double t, double max_frequency, std::span<double> out);

/// Subtracts the per-coordinate particle centroid in place.
void project_zero_centroid(std::span<double> x, std::size_t space_dim);

/// Activations of one forward pass, reused across calls to avoid allocation.
struct GradTape {
  std::size_t owner_params = 0;
  std::size_t owner_input = 0;
  std::vector<double> input;                // [x (centered); embed(t)]
  std::vector<std::vector<double>> pre;     // z per hidden layer
  std::vector<std::vector<double>> sig;     // sigmoid(z)
  std::vector<std::vector<double>> act;     // z * sigmoid(z)
  std::vector<double> output;
  // scratch for backward and tangent passes
  std::vector<double> scratch_a, scratch_b;
};

class VectorFieldNet {
 public:
  /// All parameters zero.
  explicit VectorFieldNet(MlpArchitecture arch);
  /// Fan-in uniform hidden layers, zero output layer: the initial flow is the identity.
  static VectorFieldNet initialized(MlpArchitecture arch, std::uint64_t seed);

  const MlpArchitecture& architecture() const noexcept { return arch_; }
  std::size_t dim() const noexcept { return arch_.dim; }
  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  void set_params(std::span<const double> p);

  /// u_t(x); the returned span aliases tape.output. Throws NumericalOverflow.
  std::span<const double> forward(double t, std::span<const double> x, GradTape& tape) const;
  std::vector<double> forward(double t, std::span<const double> x) const;

  /// grad += scale * d(upstream . u)/d(theta). Throws InternalError on tape mismatch.
  void backward_params(const GradTape& tape, std::span<const double> upstream, std::span<double> grad,
                       double scale = 1.0) const;
  std::vector<double> backward_params(const GradTape& tape, std::span<const double> upstream) const;
  /// d(upstream . u)/dx.
  std::vector<double> backward_input(const GradTape& tape, std::span<const double> upstream) const;

  /// Forward pass plus the mean of v_k^T J v_k over the rows of `probes` (J = du/dx),
  /// computed with forward-mode tangents. With probes == nullptr the unit
  /// vectors are used and summed, which gives the exact Jacobian trace.
  double forward_with_trace(double t, std::span<const double> x, const Matrix* probes, GradTape& tape,
                            std::span<double> velocity) const;

 private:
  struct Layer {
    std::size_t in, out, w_offset, b_offset;
  };
  void check_tape(const GradTape& tape) const;
  // delta (output-layer error) -> propagate back; accumulates into grad if non-null, returns input grad in tape scratch
  void backpropagate(const GradTape& tape, std::span<const double> upstream, double scale, double* grad,
                     std::vector<double>& input_grad) const;

  MlpArchitecture arch_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

struct Checkpoint {
  VectorFieldNet net;
  std::uint64_t seed = 0;
};

inline constexpr int kCheckpointSchema = 1;

void save_checkpoint(const std::filesystem::path& path, const VectorFieldNet& net, std::uint64_t seed);
/// Throws ConfigError on schema or shape mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ewfm
