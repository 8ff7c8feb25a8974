#include "kernels_impl.hpp"
#include "softplus_impl.hpp"

namespace fedsim::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq(const double* a, std::size_t n) { return dot(a, a, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void scale(double alpha, const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * a[i];
}

void gemv_acc(const double* rows, std::size_t n_rows, std::size_t cols, const double* coef,
              double* y) {
  for (std::size_t i = 0; i < n_rows; ++i) {
    const double c = coef[i];
    const double* r = rows + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] = y[j] + c * r[j];
  }
}

void gemv_dot(const double* rows, std::size_t n_rows, std::size_t cols, const double* x,
              double* out) {
  for (std::size_t i = 0; i < n_rows; ++i) out[i] = dot(rows + i * cols, x, cols);
}

void ger_acc(const double* u, std::size_t n_rows, const double* v, std::size_t cols, double* m) {
  for (std::size_t i = 0; i < n_rows; ++i) axpy(u[i], v, m + i * cols, cols);
}

void softplus_sigmoid(const double* a, double* sp, double* sig, std::size_t n) {
  softplus_sigmoid_body(a, sp, sig, n);
}

}  // namespace

const KernelTable kScalarTable{"scalar", dot, sum_sq, axpy, add, sub, scale,
                               gemv_acc, gemv_dot, ger_acc, softplus_sigmoid};

}  // namespace fedsim::kernels::detail
