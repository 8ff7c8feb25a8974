#include <doctest.h>

#include "fedsim/mlp.hpp"
#include "fedsim/quadratic.hpp"
#include "fedsim/verify.hpp"

using namespace fedsim;

namespace {

Problem quad(double zeta, std::uint64_t seed = 1) {
  QuadraticSpec s;
  s.d = 8;
  s.zeta = zeta;
  return gen_quadratic_family(s, seed);
}

}  // namespace

TEST_SUITE("verify") {
  TEST_CASE("bias bound holds and its witnesses are tight") {
    for (double zeta : {0.0, 0.5, 1.2}) {
      const CheckReport r = check_bias_bound(quad(zeta), 300, 2);
      INFO(r.to_json().dump());
      CHECK(r.passed());
    }
  }

  TEST_CASE("bias bound rejects a halved zeta") {
    const CheckReport r = check_bias_bound(quad(0.5), 300, 3, 0.25);
    CHECK(r.status == CheckStatus::Fail);
    const CheckReport n = negative_control(r);
    CHECK(n.passed());
    CHECK(n.name.find("negative-control") != std::string::npos);
  }

  TEST_CASE("SARAH equivalence and its control") {
    AlgoParams a{.eta = 0.2, .K = 1, .b = 4, .b_tilde = 20, .T = 3, .S = 3};
    CHECK(check_sarah_equivalence(quad(0.5), a, 4).passed());
    a.K = 2;
    CHECK(check_sarah_equivalence(quad(0.5), a, 4).status == CheckStatus::Fail);
  }

  TEST_CASE("snapshot variance, halving and the exact branch") {
    const Problem p = quad(0.3);
    CHECK(check_snapshot_variance(p, 4, 3000, 5).passed());
    CHECK(check_snapshot_halving(p, 4, 3000, 6).passed());
    CHECK(check_snapshot_variance(p, 100, 5, 7).passed());
    CHECK(check_snapshot_halving(p, 50, 10, 8).status == CheckStatus::Skipped);
    CHECK(check_snapshot_variance(p, 4, 3000, 9, 0.25).status == CheckStatus::Fail);
  }

  TEST_CASE("unbiasedness") {
    const Problem p = quad(0.5);
    CHECK(check_unbiasedness(p, 4, 3000, 10).passed());
    CHECK(check_unbiasedness(p, 100, 1, 11).passed());
    CHECK(check_unbiasedness(p, 4, 3000, 12, [](std::span<double> g) { g[0] += 1.0; }).status ==
          CheckStatus::Fail);
    CHECK(check_unbiasedness(p, 100, 1, 11, [](std::span<double> g) { g[0] += 1e-9; }).status ==
          CheckStatus::Fail);
  }

  TEST_CASE("gradient checks") {
    CHECK(check_gradient(quad(0.5), 30, 13).passed());
    ClassPartitionConfig c;
    c.q = 0.6;
    c.samples_per_class = 10;
    c.feature_dim = 6;
    const Problem mlp = make_mlp_problem(gen_classification(c, 1), mlp_objective(5), 2,
                                         {false, false, 0});
    CHECK(check_gradient(mlp, 10, 14).passed());
    CHECK(check_gradient(mlp, 5, 15, [](std::span<double> g) { g[0] += 1e-3; }).status ==
          CheckStatus::Fail);
  }

  TEST_CASE("trend checks with calibrated constants") {
    const Problem p = quad(0.25);
    const double L = p.meta.smoothness_L;
    const CheckReport d = check_descent_trend(p, 0.25 / L, 4, 4, 400, 16);
    CHECK(d.passed());
    CHECK(d.constant_calibrated);
    CHECK(check_inner_variance_trend(p, 0.25 / L, 4, 4, 400, 17).passed());
    CHECK(check_descent_trend(p, 4.0 / L, 8, 4, 100, 18).status == CheckStatus::Fail);
  }

  TEST_CASE("reports serialize") {
    const CheckReport r = check_gradient(quad(0.1), 3, 19);
    const auto j = r.to_json();
    CHECK(j["name"].get<std::string>() == r.name);
    CHECK(j["status"] == "pass");
    CHECK(j["seed"] == 19);
  }
}
