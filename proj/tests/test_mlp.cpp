#include <doctest.h>

#include <cmath>
#include <memory>

#include "fedsim/errors.hpp"
#include "fedsim/mlp.hpp"

using namespace fedsim;

namespace {

ClassificationData small_data(double q = 0.35, std::uint64_t seed = 1) {
  ClassPartitionConfig c;
  c.q = q;
  c.samples_per_class = 20;
  c.feature_dim = 6;
  return gen_classification(c, seed);
}

MlpShape shape_of(const ClassificationData& d, std::size_t hidden) {
  return MlpShape{d.workers[0].dim, hidden, d.config.num_classes};
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("zero weights give ln(classes) and uniform probabilities") {
    const auto d = small_data();
    const Problem prob = make_mlp_problem(d, mlp_objective(4, 0.0), 1, {false, false, 0});
    const ParamVector zero(prob.dim());
    CHECK(std::fabs(prob.global_loss(zero) - std::log(10.0)) <= 1e-12);
    CHECK(std::fabs(prob.local(2).loss(zero.span(), Example{5}) - std::log(10.0)) <= 1e-12);
  }

  TEST_CASE("per-example gradients match central differences") {
    const auto d = small_data();
    const auto shape = shape_of(d, 5);
    const Problem prob = make_mlp_problem(d, mlp_objective(5, 1e-2), 2, {false, false, 0});
    Rng rng(3);
    const double h = 1e-5;
    for (int t = 0; t < 5; ++t) {
      ParamVector x = glorot_init(shape, rng);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.1 * rng.normal();  // nonzero biases
      const std::size_t p = rng.below(prob.workers());
      const Example z{rng.below(*prob.local(p).support_size())};
      ParamVector g(x.size()), fd(x.size());
      prob.local(p).grad(x.span(), z, g.span());
      for (std::size_t i = 0; i < x.size(); ++i) {
        ParamVector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (prob.local(p).loss(xp.span(), z) - prob.local(p).loss(xm.span(), z)) / (2 * h);
      }
      CHECK(distance(g, fd) <= 1e-5 * std::max(1.0, g.norm()));
    }
  }

  TEST_CASE("batch with duplicates equals the explicit average") {
    const auto d = small_data();
    const auto shape = shape_of(d, 3);
    const Problem prob = make_mlp_problem(d, mlp_objective(3, 0.0), 4, {false, false, 0});
    Rng rng(5);
    const ParamVector x = glorot_init(shape, rng);
    const std::vector<Example> batch = {{4}, {1}, {4}, {4}, {7}};
    ParamVector g(x.size()), ref(x.size()), one(x.size());
    prob.local(0).batch_grad(x.span(), batch, g.span());
    for (const auto& z : batch) {
      prob.local(0).grad(x.span(), z, one.span());
      ref.axpy(1.0 / batch.size(), one);
    }
    CHECK(distance(g, ref) <= 1e-14 * std::max(1.0, ref.norm()));
  }

  TEST_CASE("full gradient equals the average over the support") {
    const auto d = small_data();
    const auto shape = shape_of(d, 3);
    const Problem prob = make_mlp_problem(d, mlp_objective(3), 4, {false, false, 0});
    Rng rng(6);
    const ParamVector x = glorot_init(shape, rng);
    const auto n = *prob.local(1).support_size();
    ParamVector full(x.size()), ref(x.size()), one(x.size());
    prob.local(1).full_grad(x.span(), full.span());
    for (std::size_t i = 0; i < n; ++i) {
      prob.local(1).grad(x.span(), Example{i}, one.span());
      ref.axpy(1.0 / static_cast<double>(n), one);
    }
    CHECK(distance(full, ref) <= 1e-12 * std::max(1.0, ref.norm()));
  }

  TEST_CASE("fused evaluation matches the separate passes bitwise") {
    const auto d = small_data();
    const auto shape = shape_of(d, 4);
    const Problem prob = make_mlp_problem(d, mlp_objective(4), 4, {false, false, 0});
    Rng rng(8);
    const ParamVector x = glorot_init(shape, rng);
    ParamVector g;
    const Evaluation fused = prob.global_evaluate_with_grad(x, g);
    const Evaluation plain = prob.global_evaluate(x);
    CHECK(fused.loss == plain.loss);
    CHECK(fused.accuracy == plain.accuracy);
    CHECK(g == prob.global_grad(x));
  }

  TEST_CASE("glorot init respects the layer bounds and zero biases") {
    const MlpShape s{50, 32, 10};
    Rng rng(7);
    const ParamVector x = glorot_init(s, rng);
    REQUIRE(x.size() == 50 * 32 + 32 + 32 * 10 + 10);
    const double a1 = std::sqrt(6.0 / 82.0), a2 = std::sqrt(6.0 / 42.0);
    for (std::size_t i = 0; i < 50 * 32; ++i) CHECK(std::fabs(x[s.w1_offset() + i]) <= a1);
    for (std::size_t i = 0; i < 32 * 10; ++i) CHECK(std::fabs(x[s.w2_offset() + i]) <= a2);
    for (std::size_t i = 0; i < 32; ++i) CHECK(x[s.b1_offset() + i] == 0.0);
    for (std::size_t i = 0; i < 10; ++i) CHECK(x[s.b2_offset() + i] == 0.0);
  }

  TEST_CASE("rejections") {
    CHECK_THROWS_AS(mlp_objective(0), ConfigError);
    CHECK_THROWS_AS(mlp_objective(4, -1.0), ConfigError);
    const auto d = small_data();
    const Problem prob = make_mlp_problem(d, mlp_objective(3), 4, {false, false, 0});
    ParamVector wrong(prob.dim() + 1), g(prob.dim() + 1);
    CHECK_THROWS_AS(prob.local(0).loss(wrong.span(), Example{0}), ConfigError);
    auto data = std::make_shared<LabeledData>(d.workers[0]);
    CHECK_THROWS_AS(MlpObjective(data, MlpShape{7, 3, 10}, 0.0), ConfigError);
  }

  TEST_CASE("problem metadata") {
    const auto d = small_data(0.85);
    const Problem prob = make_mlp_problem(d, mlp_objective(4), 8);
    CHECK(prob.meta.smoothness_L > 0.0);
    CHECK(prob.meta.hetero_zeta > 0.0);
    CHECK_FALSE(prob.meta.zeta_exact);
    CHECK(prob.test != nullptr);
    CHECK(*prob.meta.n_total == 10 * prob.local(0).support_size().value());
  }
}
