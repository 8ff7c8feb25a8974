#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedsim/kernels.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;
namespace k = fedsim::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

const std::size_t kSizes[] = {0, 1, 3, 4, 7, 8, 15, 16, 17, 31, 33, 64, 129, 1000};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar reference values") {
    const auto& s = k::scalar_table();
    const double a[] = {1, 2, 3}, b[] = {4, -5, 6};
    CHECK(s.dot(a, b, 3) == 12.0);
    CHECK(s.sum_sq(a, 3) == 14.0);
    double y[] = {1, 1, 1};
    s.axpy(2.0, a, y, 3);
    CHECK(y[2] == 7.0);
    double out[3];
    s.sub(a, b, out, 3);
    CHECK(out[1] == 7.0);
    // rows = [[1,2,3],[4,-5,6]]
    const double rows[] = {1, 2, 3, 4, -5, 6};
    const double coef[] = {2, 1};
    double acc[] = {0, 0, 0};
    s.gemv_acc(rows, 2, 3, coef, acc);
    CHECK(acc[0] == 6.0);
    CHECK(acc[1] == -1.0);
    double mv[2];
    s.gemv_dot(rows, 2, 3, a, mv);
    CHECK(mv[0] == 14.0);
    CHECK(mv[1] == 12.0);
    double m[6] = {};
    s.ger_acc(coef, 2, a, 3, m);
    CHECK(m[5] == 3.0);
  }

  TEST_CASE("avx2 elementwise kernels are bitwise equal to scalar") {
    const auto* v = k::avx2_table();
    if (!v) {
      MESSAGE("AVX2 unavailable; skipped");
      return;
    }
    const auto& s = k::scalar_table();
    Rng rng(11);
    for (std::size_t n : kSizes) {
      CAPTURE(n);
      const auto a = random_vec(rng, n), b = random_vec(rng, n);
      std::vector<double> o1(n), o2(n);
      s.add(a.data(), b.data(), o1.data(), n);
      v->add(a.data(), b.data(), o2.data(), n);
      CHECK(o1 == o2);
      s.sub(a.data(), b.data(), o1.data(), n);
      v->sub(a.data(), b.data(), o2.data(), n);
      CHECK(o1 == o2);
      s.scale(0.37, a.data(), o1.data(), n);
      v->scale(0.37, a.data(), o2.data(), n);
      CHECK(o1 == o2);
      o1 = b;
      o2 = b;
      s.axpy(-1.3, a.data(), o1.data(), n);
      v->axpy(-1.3, a.data(), o2.data(), n);
      CHECK(o1 == o2);

      const std::size_t r = 5;
      const auto rows = random_vec(rng, r * n), coef = random_vec(rng, r);
      std::vector<double> y1 = random_vec(rng, n), y2 = y1;
      s.gemv_acc(rows.data(), r, n, coef.data(), y1.data());
      v->gemv_acc(rows.data(), r, n, coef.data(), y2.data());
      CHECK(y1 == y2);
      std::vector<double> m1 = random_vec(rng, r * n), m2 = m1;
      s.ger_acc(coef.data(), r, a.data(), n, m1.data());
      v->ger_acc(coef.data(), r, a.data(), n, m2.data());
      CHECK(m1 == m2);

      std::vector<double> wide(n), sp1(n), sp2(n), sg1(n), sg2(n);
      for (std::size_t i = 0; i < n; ++i) wide[i] = 15.0 * a[i];
      s.softplus_sigmoid(wide.data(), sp1.data(), sg1.data(), n);
      v->softplus_sigmoid(wide.data(), sp2.data(), sg2.data(), n);
      CHECK(sp1 == sp2);
      CHECK(sg1 == sg2);
    }
  }

  TEST_CASE("softplus and sigmoid match the math library") {
    std::vector<double> a;
    for (double t = -760.0; t <= 760.0; t += 0.37) a.push_back(t);
    for (double t = -3.0; t <= 3.0; t += 1.0 / 1024.0) a.push_back(t);
    for (double t : {0.0, -0.0, 1e-300, -1e-300, 0.34657359, -0.34657359, 0.88137358702,
                     -0.88137358702, 700.0, -700.0, 1e308, -1e308})
      a.push_back(t);
    const std::size_t n = a.size();
    std::vector<double> sp(n), sig(n);
    k::scalar_table().softplus_sigmoid(a.data(), sp.data(), sig.data(), n);
    double worst_sp = 0.0, worst_sig = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const long double x = a[i];
      const long double ref_sp =
          std::max(x, 0.0L) + std::log1p(std::exp(-std::fabs(x)));
      const long double ref_sig = 1.0L / (1.0L + std::exp(-x));
      CAPTURE(a[i]);
      CHECK(std::isfinite(sp[i]));
      CHECK(sp[i] > 0.0);
      CHECK(sig[i] >= 0.0);
      CHECK(sig[i] <= 1.0);
      // underflowed tails: exp is clamped at e^-700
      if (ref_sp > 1e-290L) {
        worst_sp = std::max(worst_sp, static_cast<double>(std::fabs(sp[i] - ref_sp) / ref_sp));
      }
      if (ref_sig > 1e-290L) {
        worst_sig = std::max(worst_sig, static_cast<double>(std::fabs(sig[i] - ref_sig) / ref_sig));
      }
    }
    CHECK(worst_sp < 1e-15);
    CHECK(worst_sig < 1e-15);
    MESSAGE("max relative error softplus " << worst_sp << " sigmoid " << worst_sig);
  }

  TEST_CASE("avx2 reductions agree with scalar within rounding") {
    const auto* v = k::avx2_table();
    if (!v) return;
    const auto& s = k::scalar_table();
    Rng rng(12);
    for (std::size_t n : kSizes) {
      CAPTURE(n);
      const auto a = random_vec(rng, n), b = random_vec(rng, n);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::fabs(a[i] * b[i]);
      CHECK(std::fabs(s.dot(a.data(), b.data(), n) - v->dot(a.data(), b.data(), n)) <=
            1e-14 * (1.0 + mag));
      CHECK(std::fabs(s.sum_sq(a.data(), n) - v->sum_sq(a.data(), n)) <=
            1e-14 * (1.0 + s.sum_sq(a.data(), n)));
      const std::size_t r = 3;
      const auto rows = random_vec(rng, r * n);
      std::vector<double> o1(r), o2(r);
      s.gemv_dot(rows.data(), r, n, a.data(), o1.data());
      v->gemv_dot(rows.data(), r, n, a.data(), o2.data());
      for (std::size_t i = 0; i < r; ++i) CHECK(std::fabs(o1[i] - o2[i]) <= 1e-13 * (1.0 + n));
    }
  }

  TEST_CASE("backend selection") {
    CHECK(k::select_backend(k::Backend::Scalar));
    CHECK(k::active_name() == "scalar");
    if (k::avx2_table()) {
      CHECK(k::select_backend(k::Backend::Avx2));
      CHECK(k::active_name() == "avx2");
    } else {
      CHECK_FALSE(k::select_backend(k::Backend::Avx2));
    }
  }
}
