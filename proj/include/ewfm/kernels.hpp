#pragma once

#include <cstddef>
#include <string_view>

// Inner-loop arithmetic used by the network, the ODE integrator and the
// evaluation metrics. Every kernel has a scalar reference implementation; wider
// ISA variants are compiled in separate translation units and picked at
// runtime. Variants agree with the reference to rounding (see
// tests/test_kernels.cpp), not bitwise.

namespace ewfm::kernels {

enum class Isa { scalar, avx2 };

struct Table {
  Isa isa;
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = W x + b for row-major W (rows x cols); b may be null
  void (*affine)(const double* w, const double* b, const double* x, double* y, std::size_t rows, std::size_t cols);
  // out += W^T v
  void (*affine_t_acc)(const double* w, const double* v, double* out, std::size_t rows, std::size_t cols);
  // G += alpha * u v^T
  void (*outer_acc)(double alpha, const double* u, const double* v, double* g, std::size_t rows, std::size_t cols);
  // act = z * sigmoid(z), sig = sigmoid(z)
  void (*silu)(const double* z, double* act, double* sig, std::size_t n);
  // out = in * silu'(z) elementwise, given sig = sigmoid(z)
  void (*silu_grad_mul)(const double* z, const double* sig, const double* in, double* out, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
};

const Table& scalar_table();
/// Null when the variant was not compiled in.
const Table* avx2_table();

bool supported(Isa isa);
const Table& table(Isa isa);

/// The table used by the library. Defaults to the widest supported ISA;
/// EWFM_KERNELS=scalar|avx2 in the environment overrides at first use.
const Table& active();
Isa active_isa();
/// Throws InvalidInput when the ISA is not available on this machine/build.
void select(Isa isa);

Isa parse_isa(std::string_view name);
std::string_view isa_name(Isa isa);

}  // namespace ewfm::kernels
