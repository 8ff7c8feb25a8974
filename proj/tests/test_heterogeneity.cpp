#include <doctest.h>

#include <cmath>

#include "fedsim/heterogeneity.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/quadratic.hpp"

using namespace fedsim;

TEST_SUITE("heterogeneity") {
  TEST_CASE("identical objectives have zero heterogeneity") {
    QuadraticSpec s;
    s.zeta = 0.0;
    const Problem prob = gen_quadratic_family(s, 1);
    CHECK(estimate_heterogeneity(prob, 4, 2) == 0.0);
    HeterogeneityOptions o;
    o.force_probe = true;
    CHECK(estimate_heterogeneity(prob, 4, 2, o) <= 1e-6);
  }

  TEST_CASE("exact path recovers the generator's zeta") {
    QuadraticSpec s;
    s.zeta = 0.5;
    const Problem prob = gen_quadratic_family(s, 3);
    CHECK(std::fabs(estimate_heterogeneity(prob, 1, 4) - 0.5) <= 1e-10);
  }

  TEST_CASE("probe estimate is a lower bound and close on quadratics") {
    QuadraticSpec s;
    s.P = 3;
    s.d = 8;
    s.zeta = 0.7;
    const Problem prob = gen_quadratic_family(s, 5);
    HeterogeneityOptions o;
    o.force_probe = true;
    o.power_iterations = 60;
    const double est = estimate_heterogeneity(prob, 2, 6, o);
    CHECK(est <= 0.7 + 1e-6);
    CHECK(est >= 0.6);
  }

  TEST_CASE("single worker gives zero") {
    QuadraticSpec s;
    s.P = 1;
    const Problem prob = gen_quadratic_family(s, 7);
    CHECK(estimate_heterogeneity(prob, 3, 1) == 0.0);
  }

  TEST_CASE("probe estimate grows with label skew on the network") {
    auto zeta_at = [](double q) {
      ClassPartitionConfig c;
      c.q = q;
      c.samples_per_class = 30;
      c.feature_dim = 8;
      const auto d = gen_classification(c, 9);
      const Problem prob = make_mlp_problem(d, mlp_objective(6), 9, {false, false, 0});
      return estimate_heterogeneity(prob, 3, 10);
    };
    const double uniform = zeta_at(0.1), skewed = zeta_at(1.0);
    CHECK(uniform >= 0.0);
    CHECK(skewed > uniform);
  }
}
