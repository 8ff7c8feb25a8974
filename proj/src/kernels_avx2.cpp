#include "kernels_impl.hpp"
#include "softplus_impl.hpp"

#if FEDSIM_HAVE_AVX2_TU
#include <immintrin.h>

namespace fedsim::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq(const double* a, std::size_t n) { return dot(a, a, n); }

// No FMA below: results must match the scalar table bit for bit.
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void scale(double alpha, const double* a, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = alpha * a[i];
}

// Keeps a 16-wide block of y in registers while sweeping all rows.
void gemv_acc(const double* rows, std::size_t n_rows, std::size_t cols, const double* coef,
              double* y) {
  std::size_t j = 0;
  for (; j + 16 <= cols; j += 16) {
    __m256d y0 = _mm256_loadu_pd(y + j);
    __m256d y1 = _mm256_loadu_pd(y + j + 4);
    __m256d y2 = _mm256_loadu_pd(y + j + 8);
    __m256d y3 = _mm256_loadu_pd(y + j + 12);
    for (std::size_t i = 0; i < n_rows; ++i) {
      const __m256d c = _mm256_set1_pd(coef[i]);
      const double* r = rows + i * cols + j;
      y0 = _mm256_add_pd(y0, _mm256_mul_pd(c, _mm256_loadu_pd(r)));
      y1 = _mm256_add_pd(y1, _mm256_mul_pd(c, _mm256_loadu_pd(r + 4)));
      y2 = _mm256_add_pd(y2, _mm256_mul_pd(c, _mm256_loadu_pd(r + 8)));
      y3 = _mm256_add_pd(y3, _mm256_mul_pd(c, _mm256_loadu_pd(r + 12)));
    }
    _mm256_storeu_pd(y + j, y0);
    _mm256_storeu_pd(y + j + 4, y1);
    _mm256_storeu_pd(y + j + 8, y2);
    _mm256_storeu_pd(y + j + 12, y3);
  }
  for (; j + 4 <= cols; j += 4) {
    __m256d y0 = _mm256_loadu_pd(y + j);
    for (std::size_t i = 0; i < n_rows; ++i)
      y0 = _mm256_add_pd(
          y0, _mm256_mul_pd(_mm256_set1_pd(coef[i]), _mm256_loadu_pd(rows + i * cols + j)));
    _mm256_storeu_pd(y + j, y0);
  }
  for (; j < cols; ++j) {
    double acc = y[j];
    for (std::size_t i = 0; i < n_rows; ++i) acc = acc + coef[i] * rows[i * cols + j];
    y[j] = acc;
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

const KernelTable kAvx2Table{"avx2", dot, sum_sq, axpy, add, sub, scale,
                             gemv_acc, gemv_dot, ger_acc, softplus_sigmoid};

}  // namespace fedsim::kernels::detail
#endif
