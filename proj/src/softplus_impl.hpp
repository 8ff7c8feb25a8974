#pragma once
// Softplus and logistic sigmoid from +, -, *, / and a bit cast only, so the
// loop vectorizes and every backend rounds identically. Accurate to a few ulp.
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace fedsim::kernels::detail {

// exp(x) for x in [-700, 0]
inline double exp_nonpos(double x) {
  constexpr double kLog2e = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kShift = 0x1.8p52;
  const double kd = x * kLog2e + kShift;
  const double n = kd - kShift;
  const double r = (x - n * kLn2Hi) - n * kLn2Lo;
  // Taylor to degree 13 on |r| <= ln2 / 2
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const std::uint64_t bits = (std::bit_cast<std::uint64_t>(kd) + 1023u) << 52;
  return p * std::bit_cast<double>(bits);
}

// log(1 + e) for e in [0, 1]
inline double log1p_unit(double e) {
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  // 1 + e = 2^j (1 + s) / (1 - s) with |s| <= 3 - 2 sqrt 2
  const bool upper = e > 0.41421356237309503;
  const double s = (upper ? e - 1.0 : e) / (upper ? e + 3.0 : e + 2.0);
  const double j = upper ? 1.0 : 0.0;
  const double s2 = s * s;
  double p = 1.0 / 23.0;
  p = p * s2 + 1.0 / 21.0;
  p = p * s2 + 1.0 / 19.0;
  p = p * s2 + 1.0 / 17.0;
  p = p * s2 + 1.0 / 15.0;
  p = p * s2 + 1.0 / 13.0;
  p = p * s2 + 1.0 / 11.0;
  p = p * s2 + 1.0 / 9.0;
  p = p * s2 + 1.0 / 7.0;
  p = p * s2 + 1.0 / 5.0;
  p = p * s2 + 1.0 / 3.0;
  const double tail = 2.0 * s * s2 * p;
  return j * kLn2Hi + (2.0 * s + (tail + j * kLn2Lo));
}

inline void softplus_sigmoid_body(const double* a, double* sp, double* sig, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = a[i];
    const double e = exp_nonpos(std::max(-std::abs(v), -700.0));
    const double d = 1.0 + e;
    sp[i] = std::max(v, 0.0) + log1p_unit(e);
    sig[i] = (v >= 0.0 ? 1.0 : e) / d;
  }
}

}  // namespace fedsim::kernels::detail
