#pragma once
// Dense double-precision kernels used by the gradient oracles and the
// coordinator. Every kernel has a scalar reference implementation; an AVX2
// variant is selected at runtime when the CPU supports it.
//
// Elementwise kernels (axpy, add, sub, scale, gemv_acc, ger_acc,
// softplus_sigmoid) are bitwise identical across backends because they perform
// the same multiplies and adds in the same per-lane order without fusing. Reductions (dot, sum_sq,
// gemv_dot) reassociate and agree only up to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace fedsim::kernels {

struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_sq)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a + b, out = a - b, out = alpha * a
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(double alpha, const double* a, double* out, std::size_t n);
  // y[j] += sum_i coef[i] * rows[i * cols + j], accumulated over i in order
  void (*gemv_acc)(const double* rows, std::size_t n_rows, std::size_t cols,
                   const double* coef, double* y);
  // out[i] = dot(rows[i, :], x)
  void (*gemv_dot)(const double* rows, std::size_t n_rows, std::size_t cols,
                   const double* x, double* out);
  // m[i, j] += u[i] * v[j]
  void (*ger_acc)(const double* u, std::size_t n_rows, const double* v,
                  std::size_t cols, double* m);
  // sp[i] = log(1 + exp(a[i])), sig[i] = 1 / (1 + exp(-a[i])); elementwise
  void (*softplus_sigmoid)(const double* a, double* sp, double* sig, std::size_t n);
};

enum class Backend { Scalar, Avx2 };

const KernelTable& scalar_table();
// nullptr when the binary or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// Table used by the library. Chosen once from the CPU, unless FEDSIM_SIMD=scalar
// is set in the environment or select_backend() is called.
const KernelTable& active();
// Returns false when the requested backend is unavailable.
bool select_backend(Backend backend);
std::string_view active_name();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum_sq(std::span<const double> a) { return active().sum_sq(a.data(), a.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().add(a.data(), b.data(), out.data(), a.size());
}
inline void sub(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().sub(a.data(), b.data(), out.data(), a.size());
}
inline void scale(double alpha, std::span<const double> a, std::span<double> out) {
  active().scale(alpha, a.data(), out.data(), a.size());
}

}  // namespace fedsim::kernels
