#include "ewfm/kernels.hpp"

#include <cmath>

namespace ewfm::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine(const double* w, const double* b, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(w + r * cols, x, cols) + (b ? b[r] : 0.0);
}

void affine_t_acc(const double* w, const double* v, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(v[r], w + r * cols, out, cols);
}

void outer_acc(double alpha, const double* u, const double* v, double* g, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(alpha * u[r], v, g + r * cols, cols);
}

void silu(const double* z, double* act, double* sig, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    sig[i] = s;
    act[i] = z[i] * s;
  }
}

void silu_grad_mul(const double* z, const double* sig, const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * (sig[i] * (1.0 + z[i] * (1.0 - sig[i])));
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

constexpr Table kScalar{Isa::scalar, "scalar", dot, axpy, affine, affine_t_acc, outer_acc, silu, silu_grad_mul, squared_distance};

}  // namespace

const Table& scalar_table() { return kScalar; }

}  // namespace ewfm::kernels
