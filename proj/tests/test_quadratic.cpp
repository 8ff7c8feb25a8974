#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "fedsim/errors.hpp"
#include "fedsim/quadratic.hpp"

using namespace fedsim;

namespace {

ParamVector random_point(Rng& rng, std::size_t d) {
  ParamVector x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = rng.normal();
  return x;
}

ParamVector full_grad(const Problem& prob, std::size_t p, const ParamVector& x) {
  ParamVector g(prob.dim());
  prob.local(p).full_grad(x.span(), g.span());
  return g;
}

}  // namespace

TEST_SUITE("quadratic") {
  TEST_CASE("pairwise spectral gap equals zeta (P=2, d=4, zeta=0.5, seed 7)") {
    QuadraticSpec s;
    s.P = 2;
    s.d = 4;
    s.zeta = 0.5;
    s.L = 1.0;
    s.mu = 0.1;
    const Problem prob = gen_quadratic_family(s, 7);
    const Eigen::MatrixXd diff = *prob.local(0).hessian() - *prob.local(1).hessian();
    // independent oracle: dense eigenvalues of the 4x4 difference
    Eigen::EigenSolver<Eigen::MatrixXd> es(diff);
    const double gap = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(std::fabs(gap - 0.5) <= 1e-10);
    CHECK(std::fabs(prob.meta.hetero_zeta - 0.5) <= 1e-10);
    CHECK(prob.meta.zeta_exact);
  }

  TEST_CASE("hessians are symmetric, L-smooth, and the mean is positive definite") {
    QuadraticSpec s;
    s.zeta = 0.8;
    const Problem prob = gen_quadratic_family(s, 3);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(s.d, s.d);
    for (std::size_t p = 0; p < s.P; ++p) {
      const Eigen::MatrixXd& h = *prob.local(p).hessian();
      CHECK((h - h.transpose()).norm() == 0.0);
      CHECK(spectral_norm_sym(h) <= s.L + 1e-12);
      mean += h / static_cast<double>(s.P);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mean);
    CHECK(es.eigenvalues().minCoeff() >= s.mu - 1e-10);
    CHECK(prob.meta.hetero_zeta <= 2.0 * prob.meta.smoothness_L);
  }

  TEST_CASE("zeta = 0 gives identical local gradients") {
    QuadraticSpec s;
    s.P = 4;  // a power of two keeps the tree mean exact
    s.zeta = 0.0;
    const Problem prob = gen_quadratic_family(s, 1);
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
      const ParamVector x = random_point(rng, s.d);
      const ParamVector g = prob.global_grad(x);
      for (std::size_t p = 0; p < s.P; ++p) CHECK(full_grad(prob, p, x) == g);
    }
  }

  TEST_CASE("gradient vanishes at the closed-form optimum") {
    for (double zeta : {0.0, 0.3, 1.0}) {
      QuadraticSpec s;
      s.zeta = zeta;
      s.linear_hetero = 0.5;
      const Problem prob = gen_quadratic_family(s, 11);
      REQUIRE(prob.meta.optimum.has_value());
      CHECK(prob.global_grad(*prob.meta.optimum).norm() <= 1e-9);
      CHECK(std::fabs(prob.global_loss(*prob.meta.optimum) - *prob.meta.optimum_value) <= 1e-9);
    }
  }

  TEST_CASE("rejects invalid specs") {
    QuadraticSpec s;
    s.zeta = 2.5;
    CHECK_THROWS_AS(gen_quadratic_family(s, 0), ConfigError);
    s.zeta = 1.9;  // mu = 0.1 > L - zeta/2 = 0.05
    CHECK_THROWS_AS(gen_quadratic_family(s, 0), ConfigError);
    s.zeta = 0.0;
    s.mu = 0.0;
    CHECK_THROWS_AS(gen_quadratic_family(s, 0), ConfigError);
    s.mu = 1.5;
    CHECK_THROWS_AS(gen_quadratic_family(s, 0), ConfigError);
  }

  TEST_CASE("per-example average over the support equals full_grad") {
    QuadraticSpec s;
    s.zeta = 0.5;
    const Problem prob = gen_quadratic_family(s, 5);
    Rng rng(6);
    const ParamVector x = random_point(rng, s.d);
    for (std::size_t p = 0; p < s.P; ++p) {
      ParamVector avg(s.d), g(s.d);
      for (std::size_t i = 0; i < s.samples_per_worker; ++i) {
        prob.local(p).grad(x.span(), Example{i}, g.span());
        avg.axpy(1.0 / static_cast<double>(s.samples_per_worker), g);
      }
      const ParamVector full = full_grad(prob, p, x);
      CHECK(distance(avg, full) <= 1e-12 * full.norm());
    }
  }

  TEST_CASE("smoothness witness") {
    QuadraticSpec s;
    s.zeta = 0.6;
    const Problem prob = gen_quadratic_family(s, 8);
    Rng rng(9);
    const double L = prob.meta.smoothness_L;
    ParamVector gx(s.d), gy(s.d);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t p = rng.below(s.P);
      const Example z{rng.below(s.samples_per_worker)};
      const ParamVector x = random_point(rng, s.d), y = random_point(rng, s.d);
      prob.local(p).grad(x.span(), z, gx.span());
      prob.local(p).grad(y.span(), z, gy.span());
      REQUIRE(distance(gx, gy) <= L * distance(x, y) + 1e-9);
    }
  }

  TEST_CASE("variance witness: E||grad(x,z) - grad f_p(x)||^2 <= sigma^2 + 3 SE") {
    QuadraticSpec s;
    s.sigma2 = 1.0;
    const Problem prob = gen_quadratic_family(s, 10);
    Rng rng(12);
    ParamVector g(s.d);
    std::vector<Example> draw;
    for (int i = 0; i < 10; ++i) {
      const std::size_t p = rng.below(s.P);
      const ParamVector x = random_point(rng, s.d);
      const ParamVector full = full_grad(prob, p, x);
      const int n = 10000;
      double sum = 0, sum2 = 0;
      for (int r = 0; r < n; ++r) {
        prob.local(p).sample(rng, 1, draw);
        prob.local(p).grad(x.span(), draw[0], g.span());
        const double e = (g - full).norm2();
        sum += e;
        sum2 += e * e;
      }
      const double mean = sum / n;
      const double se = std::sqrt((sum2 / n - mean * mean) / n);
      CHECK(mean <= s.sigma2 + 3.0 * se);
    }
  }

  TEST_CASE("global gradient: per-worker average equals pooled average") {
    QuadraticSpec s;
    s.zeta = 0.7;
    s.linear_hetero = 1.0;
    const Problem prob = gen_quadratic_family(s, 13);
    Rng rng(14);
    const ParamVector x = random_point(rng, s.d);
    ParamVector pooled(s.d), g(s.d);
    const double n = static_cast<double>(s.P * s.samples_per_worker);
    for (std::size_t p = 0; p < s.P; ++p)
      for (std::size_t i = 0; i < s.samples_per_worker; ++i) {
        prob.local(p).grad(x.span(), Example{i}, g.span());
        pooled.axpy(1.0 / n, g);
      }
    const ParamVector global = prob.global_grad(x);
    CHECK(distance(global, pooled) <= 1e-12 * global.norm());
  }

  TEST_CASE("online supports") {
    QuadraticSpec s;
    s.samples_per_worker = 0;
    s.sigma2 = 2.0;
    const Problem prob = gen_quadratic_family(s, 15);
    CHECK_FALSE(prob.finite_support());
    CHECK_FALSE(prob.local(0).support_size().has_value());
    ParamVector g(s.d);
    CHECK_THROWS_AS(prob.local(0).full_grad(g.span(), g.span()), ConfigError);
    // the shift of an example is a pure function of its key
    ParamVector a(s.d), b(s.d);
    prob.local(0).grad(g.span(), Example{123}, a.span());
    prob.local(0).grad(g.span(), Example{123}, b.span());
    CHECK(a == b);
  }

  TEST_CASE("generator is deterministic in the seed") {
    QuadraticSpec s;
    s.zeta = 0.4;
    const Problem a = gen_quadratic_family(s, 21), b = gen_quadratic_family(s, 21),
                  c = gen_quadratic_family(s, 22);
    CHECK(*a.local(3).hessian() == *b.local(3).hessian());
    CHECK(*a.local(3).hessian() != *c.local(3).hessian());
  }
}
