#include <doctest.h>

#include <cmath>

#include "fedsim/algorithms.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/quadratic.hpp"

using namespace fedsim;

namespace {

Problem quad(std::size_t P = 4, double zeta = 0.5, std::size_t n = 40, std::uint64_t seed = 3) {
  QuadraticSpec s;
  s.P = P;
  s.d = 6;
  s.zeta = zeta;
  s.samples_per_worker = n;
  s.linear_hetero = 0.5;
  return gen_quadratic_family(s, seed);
}

ParamVector ones(std::size_t d) { return ParamVector(d, 1.0); }

}  // namespace

TEST_SUITE("algorithms") {
  TEST_CASE("practical_T") {
    CHECK(practical_T(100, 4, 5) == 6);
    CHECK(practical_T(20, 4, 5) == 2);
    CHECK(practical_T(1, 1, 1) == 2);
    CHECK_THROWS_AS(practical_T(1, 0, 1), ConfigError);
  }

  TEST_CASE("original ledger: S(T+1) rounds, S(b~ + 4TKb) evaluations per worker") {
    const Problem prob = quad();
    Federation fed(prob, {.P = 4, .budget_B = 8});
    Monitor mon(prob, {});
    AlgoParams a{.eta = 0.05, .K = 3, .b = 2, .b_tilde = 10, .T = 4, .S = 3};
    const RunRecord rec = bvr_l_sgd(fed, ones(6), a, RngTree(1), mon);
    CHECK(rec.status == RunStatus::Completed);
    CHECK(fed.ledger().comm_rounds() == 15);
    for (std::size_t p = 0; p < 4; ++p)
      CHECK(fed.ledger().cumulative()[p] == 3 * (10 + 4 * 4 * 3 * 2));
    CHECK(rec.rows.size() == 16);
    CHECK(rec.rows.back().comm_round == 15);
  }

  TEST_CASE("full snapshot charges the local support") {
    const Problem prob = quad(4, 0.5, 40);
    Federation fed(prob, {.P = 4, .budget_B = 8});
    Monitor mon(prob, {});
    AlgoParams a{.eta = 0.05, .K = 1, .b = 1, .b_tilde = 40, .T = 1, .S = 1};
    bvr_l_sgd(fed, ones(6), a, RngTree(1), mon);
    CHECK(fed.ledger().per_round()[0][0] == 40);
  }

  TEST_CASE("SARAH is BVR with one local step, bitwise") {
    const Problem prob = quad();
    AlgoParams a{.eta = 0.1, .K = 1, .b = 3, .b_tilde = 7, .T = 5, .S = 2};
    BvrTrace tb, ts;
    {
      Federation fed(prob, {.P = 4, .budget_B = 8});
      Monitor mon(prob, {});
      bvr_l_sgd(fed, ones(6), a, RngTree(9), mon, &tb);
    }
    {
      Federation fed(prob, {.P = 4, .budget_B = 8});
      Monitor mon(prob, {});
      minibatch_sarah(fed, ones(6), a, RngTree(9), mon, &ts);
    }
    REQUIRE(tb.sync.size() == 10);
    CHECK(tb.sync == ts.sync);
    CHECK(tb.snapshots == ts.snapshots);
    CHECK(tb.estimators == ts.estimators);
  }

  TEST_CASE("practical run follows the picked worker of the original run") {
    const Problem prob = quad(5);
    AlgoParams a{.eta = 0.05, .K = 4, .b = 2, .b_tilde = 20, .T = 0, .S = 3};
    a.T = practical_T(a.b_tilde, a.K, a.b);
    BvrTrace to, tp;
    {
      Federation fed(prob, {.P = 5, .budget_B = 8});
      Monitor mon(prob, {});
      bvr_l_sgd(fed, ones(6), a, RngTree(4), mon, &to);
    }
    {
      Federation fed(prob, {.P = 5, .budget_B = 8});
      Monitor mon(prob, {});
      const RunRecord r = bvr_l_sgd_practical(fed, ones(6), a, RngTree(4), mon, &tp);
      CHECK(r.output == r.last);
      // the routine runs on p-hat only
      const auto& first = fed.ledger().per_round()[1];
      std::size_t busy = 0;
      for (std::size_t p = 0; p < 5; ++p) busy += first[p] > 2 * a.K * a.b;
      CHECK(busy == 1);
    }
    CHECK(to.picked == tp.picked);
    CHECK(to.sync == tp.sync);
    for (std::size_t i = 0; i < to.sync.size(); ++i)
      CHECK(to.candidates[i][to.picked[i]] == to.sync[i]);
  }

  TEST_CASE("local routine: trace and zero-noise identity") {
    const Problem prob = quad(2, 0.0, 40);
    Federation fed(prob, {.P = 2, .budget_B = 100});
    const ParamVector x0 = ones(6);
    ParamVector v0(6);
    prob.local(0).full_grad(x0.span(), v0.span());
    Rng br(1), sr(2);
    LocalTrace tr;
    const RoutineResult r = local_routine(fed.worker(0), x0, 0.1, v0, 40, 5, br, sr, &tr);
    CHECK(r.grads_used == 2 * 5 * 40);
    CHECK(fed.ledger().pending()[0] == 400);
    REQUIRE(tr.iterates.size() == 6);
    CHECK(r.x_last == tr.iterates.back());
    CHECK(r.x_pick == tr.iterates[r.k_hat]);
    // quadratic: differences of batch gradients are exact Hessian products, so
    // v_k tracks grad f_p(x_{k-1}) to rounding
    for (std::size_t k = 0; k <= 5; ++k) {
      ParamVector g(6);
      prob.local(0).full_grad(tr.iterates[k == 0 ? 0 : k - 1].span(), g.span());
      CHECK(distance(g, tr.estimators[k]) <= 1e-12);
    }
  }

  TEST_CASE("divergence becomes a record") {
    const Problem prob = quad();
    Federation fed(prob, {.P = 4, .budget_B = 8});
    Monitor mon(prob, {});
    AlgoParams a{.eta = 50.0, .b = 2, .rounds = 200};
    const RunRecord r = minibatch_sgd(fed, ones(6), a, RngTree(1), mon);
    CHECK(r.status == RunStatus::Diverged);
    CHECK_FALSE(r.diagnostic.empty());
    CHECK(r.rows.size() >= 1);
  }

  TEST_CASE("minibatch SGD ledger and convergence") {
    const Problem prob = quad(4, 0.5, 40);
    Federation fed(prob, {.P = 4, .budget_B = 8});
    Monitor mon(prob, {});
    AlgoParams a{.eta = 0.5, .b = 8, .rounds = 300};
    const RunRecord r = minibatch_sgd(fed, ones(6), a, RngTree(1), mon);
    CHECK(fed.ledger().comm_rounds() == 300);
    CHECK(fed.ledger().cumulative()[2] == 300 * 8);
    CHECK(r.rows.back().train_loss < r.rows.front().train_loss);
  }

  TEST_CASE("SCAFFOLD: server control is the mean of worker controls") {
    const Problem prob = quad(4, 0.8);
    Federation fed(prob, {.P = 4, .budget_B = 8});
    Monitor mon(prob, {});
    AlgoParams a{.eta = 0.05, .K = 4, .b = 2, .rounds = 20};
    ScaffoldTrace tr;
    const RunRecord r = scaffold(fed, ones(6), a, RngTree(2), mon, &tr);
    CHECK(r.status == RunStatus::Completed);
    REQUIRE(tr.server_controls.size() == 20);
    for (std::size_t t = 0; t < 20; ++t)
      CHECK(tr.server_controls[t] == aggregate(tr.worker_controls[t]));
    CHECK(fed.ledger().cumulative()[0] == 20 * 4 * 2);
  }

  TEST_CASE("local GD with one worker and K=1 is gradient descent") {
    const Problem prob = quad(1, 0.0);
    Federation fed(prob, {.P = 1, .budget_B = 40});
    Monitor mon(prob, {});
    const RunRecord r = local_gd(fed, ones(6), 0.2, 1, 10, RngTree(3), mon);
    ParamVector x = ones(6), g(6);
    for (int t = 0; t < 10; ++t) {
      prob.local(0).full_grad(x.span(), g.span());
      x.axpy(-0.2, g);
    }
    CHECK(r.last == x);
    CHECK(fed.ledger().cumulative()[0] == 10 * 40);
  }

  TEST_CASE("local SGD with K=1 matches minibatch SGD") {
    const Problem prob = quad();
    AlgoParams a{.eta = 0.1, .K = 1, .b = 3, .rounds = 15};
    RunRecord l, m;
    {
      Federation fed(prob, {.P = 4, .budget_B = 8});
      Monitor mon(prob, {});
      l = local_sgd(fed, ones(6), a, RngTree(5), mon);
    }
    {
      Federation fed(prob, {.P = 4, .budget_B = 8});
      Monitor mon(prob, {});
      m = minibatch_sgd(fed, ones(6), a, RngTree(5), mon);
    }
    // same batches; averaging models vs averaging gradients differ by rounding only
    CHECK(distance(l.last, m.last) <= 1e-12);
  }

  TEST_CASE("monitor round limit and target") {
    const Problem prob = quad();
    Federation fed(prob, {.P = 4, .budget_B = 8});
    MonitorOptions lim;
    lim.max_rounds = 7;
    Monitor mon(prob, lim);
    AlgoParams a{.eta = 0.1, .b = 2};
    minibatch_sgd(fed, ones(6), a, RngTree(1), mon);
    CHECK(fed.ledger().comm_rounds() == 7);

    Federation fed2(prob, {.P = 4, .budget_B = 8});
    Monitor no_limit(prob, {});
    CHECK_THROWS_AS(minibatch_sgd(fed2, ones(6), a, RngTree(1), no_limit), ConfigError);

    Federation fed3(prob, {.P = 4, .budget_B = 40});
    Monitor tgt(prob, {.target_grad_norm2 = 1e-6});
    const RunRecord r = local_gd(fed3, ones(6), 0.5, 1, 0, RngTree(1), tgt);
    CHECK(r.status == RunStatus::TargetReached);
    CHECK(r.rows.back().grad_norm2 <= 1e-6);
  }

  TEST_CASE("strict budget violation propagates") {
    const Problem prob = quad();
    Federation fed(prob, {.P = 4, .budget_B = 4, .enforce = BudgetMode::Strict});
    Monitor mon(prob, {});
    AlgoParams a{.eta = 0.1, .K = 8, .b = 4, .rounds = 3};
    CHECK_THROWS_AS(local_sgd(fed, ones(6), a, RngTree(1), mon), BudgetViolation);
  }

  TEST_CASE("dispatch and validation") {
    const Problem prob = quad();
    for (const auto& name : algorithm_names()) {
      Federation fed(prob, {.P = 4, .budget_B = 8});
      Monitor mon(prob, {});
      AlgoParams a{.eta = 0.05, .K = 2, .b = 2, .b_tilde = 8, .T = 2, .S = 2, .rounds = 4};
      const RunRecord r = run_algorithm(name, fed, ones(6), a, RngTree(1), mon);
      CHECK(r.algorithm == name);
      CHECK(r.status == RunStatus::Completed);
    }
    Federation fed(prob, {.P = 4, .budget_B = 8});
    Monitor mon(prob, {});
    CHECK_THROWS_AS(run_algorithm("adam", fed, ones(6), {}, RngTree(1), mon), ConfigError);
    AlgoParams bad{.eta = -1.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(is_local_method("scaffold"));
    CHECK_FALSE(is_local_method("minibatch_sarah"));
  }

  TEST_CASE("same seed, same run") {
    const Problem prob = quad();
    AlgoParams a{.eta = 0.05, .K = 3, .b = 2, .b_tilde = 10, .T = 3, .S = 2};
    auto go = [&](std::uint64_t seed) {
      Federation fed(prob, {.P = 4, .budget_B = 8});
      Monitor mon(prob, {});
      return bvr_l_sgd(fed, ones(6), a, RngTree(seed), mon);
    };
    const RunRecord a1 = go(1), a2 = go(1), b1 = go(2);
    CHECK(same_rows(a1, a2));
    CHECK(a1.output == a2.output);
    CHECK_FALSE(same_rows(a1, b1));
  }

  TEST_CASE("divergence guard") {
    CHECK_NOTHROW(divergence_guard(ones(3), "t"));
    CHECK_THROWS_AS(divergence_guard(ParamVector{NAN}, "t"), DivergenceError);
    CHECK_THROWS_AS(divergence_guard(ParamVector{2e8}, "t"), DivergenceError);
  }
}
