#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/grid.hpp"
#include "fedsim/harness.hpp"

using namespace fedsim;

namespace {

RunConfig quad_config() {
  RunConfig c;
  c.problem.kind = "quadratic";
  c.problem.quadratic.P = 4;
  c.problem.quadratic.d = 6;
  c.problem.quadratic.zeta = 0.4;
  c.problem.quadratic.samples_per_worker = 30;
  c.algorithm = "bvr_l_sgd_practical";
  c.params.eta = 0.1;
  c.params.K = 2;
  c.params.b = 2;
  c.params.b_tilde = 10;
  c.total_rounds = 40;
  c.federation.budget_B = 8;
  c.seed = 17;
  return c;
}

RunConfig mlp_config() {
  RunConfig c;
  c.problem.kind = "classification";
  c.problem.classification.q = 0.6;
  c.problem.classification.samples_per_class = 10;
  c.problem.classification.feature_dim = 5;
  c.problem.mlp.hidden = 4;
  c.algorithm = "local_sgd";
  c.params.eta = 0.1;
  c.params.K = 2;
  c.params.b = 4;
  c.total_rounds = 10;
  c.federation.budget_B = 8;
  return c;
}

RunRecord fake(std::vector<double> acc, RunStatus status = RunStatus::Completed) {
  RunRecord r;
  r.status = status;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    RunRow row;
    row.comm_round = i;
    row.train_acc = acc[i];
    row.train_loss = 1.0 - acc[i];
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("runs are deterministic and repeats differ") {
    RunConfig c = quad_config();
    c.repeats = 3;
    const RunResult a = run(c), b = run(c);
    REQUIRE(a.repeats.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) CHECK(record_to_csv(a.repeats[r]) == record_to_csv(b.repeats[r]));
    CHECK_FALSE(same_rows(a.repeats[0], a.repeats[1]));
    CHECK(repeat_seed(17, 0) == 17);
    CHECK(repeat_seed(17, 1) != repeat_seed(17, 2));
  }

  TEST_CASE("record csv round trip is field exact") {
    RunConfig c = mlp_config();
    const RunRecord rec = run(c).repeats[0];
    std::istringstream in(record_to_csv(rec));
    const RunRecord back = read_record_csv(in);
    CHECK(same_rows(rec, back));
    CHECK(back.header == rec.header);
    CHECK(back.algorithm == rec.algorithm);
    CHECK(record_to_csv(back) == record_to_csv(rec));
  }

  TEST_CASE("summary matches an independent recomputation") {
    RunConfig c = quad_config();
    c.repeats = 4;
    const RunResult res = run(c);
    REQUIRE(res.summary.size() == res.repeats[0].rows.size());
    for (std::size_t i = 0; i < res.summary.size(); ++i) {
      double m = 0;
      for (const auto& r : res.repeats) m += r.rows[i].train_loss;
      m /= 4;
      double v = 0;
      for (const auto& r : res.repeats) v += std::pow(r.rows[i].train_loss - m, 2);
      const double sd = std::sqrt(v / 3);
      CHECK(std::fabs(res.summary[i].mean[0] - m) <= 1e-12 * std::max(1.0, std::fabs(m)));
      CHECK(std::fabs(res.summary[i].stddev[0] - sd) <= 1e-12 * std::max(1.0, sd));
      CHECK(res.summary[i].count == 4);
    }
    std::ostringstream out;
    write_summary_csv(out, res.summary);
    CHECK(out.str().rfind("comm_round,count,train_loss_mean,train_loss_std", 0) == 0);
  }

  TEST_CASE("sweep rule") {
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK(sweep_score(fake({0.1, 0.5, 0.9, 0.8}), SweepCriterion::MinTrainAccuracy, 2) == 0.8);
    CHECK(sweep_score(fake({0.5, 0.6}, RunStatus::Diverged), SweepCriterion::MinTrainAccuracy) == ninf);
    CHECK(sweep_score(fake({0.5, 0.6}), SweepCriterion::NegTrainLoss, 1) == doctest::Approx(-0.4));
    // ties go to the smaller eta
    CHECK(select_eta({0.1, 0.01, 0.5}, {0.7, 0.7, 0.6}) == 1u);
    CHECK(select_eta({0.1, 0.5}, {ninf, 0.2}) == 1u);
    CHECK_FALSE(select_eta({0.1, 0.5}, {ninf, ninf}).has_value());
    CHECK(sweep_score(std::vector<RunRecord>{fake({0.5}), fake({0.7})},
                      SweepCriterion::MinTrainAccuracy) == doctest::Approx(0.6));
  }

  TEST_CASE("sweep picks a stable eta and reports when none is") {
    RunConfig c = quad_config();
    c.algorithm = "minibatch_sgd";
    const SweepResult s = sweep_eta(c, {0.05, 0.5, 100.0}, SweepCriterion::NegTrainLoss);
    REQUIRE(s.chosen_eta.has_value());
    CHECK(*s.chosen_eta < 100.0);
    const std::size_t chosen = *s.chosen_eta == 0.05 ? 0 : 1;
    CHECK(s.entries[chosen].score >= s.entries[1 - chosen].score);
    CHECK(s.entries[2].score == -std::numeric_limits<double>::infinity());
    const SweepResult none = sweep_eta(c, {100.0, 200.0}, SweepCriterion::NegTrainLoss);
    CHECK_FALSE(none.chosen_eta.has_value());
    CHECK(none.message.find("no stable") != std::string::npos);
  }

  TEST_CASE("json config round trip and strictness") {
    RunConfig c = mlp_config();
    c.target_grad_norm2 = 1e-3;
    c.federation.enforce = BudgetMode::Average;
    const auto j = to_json(c);
    const RunConfig back = run_config_from_json(j);
    CHECK(to_json(back) == j);
    auto bad = j;
    bad["algorithm_typo"] = 1;
    CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
    auto nested = j;
    nested["problem"]["colour"] = "red";
    CHECK_THROWS_AS(run_config_from_json(nested), ConfigError);
    auto version = j;
    version["schema_version"] = 99;
    CHECK_THROWS_AS(run_config_from_json(version), ConfigError);
    CHECK_THROWS_AS(load_run_config("/nonexistent.json"), ConfigError);
    const auto path = std::filesystem::temp_directory_path() / "fedsim_cfg_test.json";
    std::ofstream(path) << j.dump(2);
    CHECK(to_json(load_run_config(path.string())) == j);
    std::filesystem::remove(path);
  }

  TEST_CASE("config validation") {
    RunConfig c = quad_config();
    c.algorithm = "adam";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = quad_config();
    c.eval_every = 7;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = quad_config();
    c.problem.init = "glorot";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = quad_config();
    c.problem.quadratic.samples_per_worker = 0;
    c.params.b_tilde = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("zero rounds on a zero-initialized network gives ln 10") {
    RunConfig c = mlp_config();
    c.total_rounds = 0;
    c.problem.init = "zeros";
    const RunRecord r = run(c).repeats[0];
    REQUIRE(r.rows.size() == 1);
    CHECK(std::fabs(r.rows[0].train_loss - std::log(10.0)) <= 1e-12);
    CHECK(r.rows[0].cum_grad_evals == 0);
  }

  TEST_CASE("resolved parameters") {
    RunConfig c = quad_config();
    c.params.b_tilde = 0;
    const auto prob = build_problem(c.problem, c.seed);
    const AlgoParams p = resolve_params(c, *prob);
    CHECK(p.b_tilde == 30);
    const std::size_t T = practical_T(30, 2, 2);
    CHECK(p.S == (40 + T) / (T + 1));
    const RunRecord r = run_once(c, *prob, 0);
    CHECK(std::stoul(r.header.at("comm_rounds")) <= 40);
    CHECK(r.header.count("config") == 1);
  }

  TEST_CASE("eval_every thins rows") {
    RunConfig c = quad_config();
    c.algorithm = "minibatch_sgd";
    c.eval_every = 10;
    const RunRecord r = run(c).repeats[0];
    REQUIRE(r.rows.size() == 5);
    CHECK(r.rows[4].comm_round == 40);
  }

  TEST_CASE("budget split") {
    RunConfig c;
    c.algorithm = "local_sgd";
    apply_budget_split(c, 256);
    CHECK(c.params.K == 16);
    CHECK(c.params.b == 16);
    c.algorithm = "minibatch_sarah";
    apply_budget_split(c, 256);
    CHECK(c.params.K == 1);
    CHECK(c.params.b == 256);
    c.algorithm = "scaffold";
    CHECK_THROWS_AS(apply_budget_split(c, 40), ConfigError);
  }

  TEST_CASE("schedule") {
    ProblemMeta m;
    m.P = 10;
    m.smoothness_L = 2.0;
    m.hetero_zeta = 0.0;
    m.grad_variance_sigma2 = 1.0;
    m.n_total = 1000;
    const Schedule s = corollary_schedule(m, 4, 16, 1e-6);
    CHECK(s.b_tilde == 100);
    CHECK(s.T == practical_T(100, 4, 16));
    CHECK(s.eta == doctest::Approx(0.25 * 0.5));
    m.hetero_zeta = 1.0;
    CHECK(corollary_schedule(m, 4, 16, 1e-6).eta == doctest::Approx(0.25 * 0.25));
    m.n_total.reset();
    CHECK(corollary_schedule(m, 4, 16, 1e-2).b_tilde == 10);
  }

  TEST_CASE("grid: complete, scheduling independent, and equal to single runs") {
    GridSpec g;
    g.base = quad_config();
    g.base.repeats = 2;
    g.budgets = {16, 32};
    g.algorithms = {"minibatch_sgd", "local_sgd", "bvr_l_sgd_practical"};
    g.threads = 1;
    const GridResult one = experiment_grid(g);
    g.threads = 3;
    const GridResult many = experiment_grid(g);
    REQUIRE(one.cells.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      REQUIRE(one.cells[i].ok);
      for (std::size_t r = 0; r < 2; ++r)
        CHECK(record_to_csv(one.cells[i].result.repeats[r]) ==
              record_to_csv(many.cells[i].result.repeats[r]));
    }
    RunConfig single = g.base;
    single.algorithm = "local_sgd";
    apply_budget_split(single, 32);
    const RunResult direct = run(single);
    CHECK(record_to_csv(direct.repeats[1]) == record_to_csv(one.cells[4].result.repeats[1]));

    const auto dir = std::filesystem::temp_directory_path() / "fedsim_grid_test";
    std::filesystem::remove_all(dir);
    write_grid_outputs(one, dir);
    for (const char* f : {"cells.csv", "view_q.csv", "view_budget.csv", "view_rounds.csv"})
      CHECK(std::filesystem::exists(dir / f));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("grid: tuned cells and failure markers") {
    GridSpec g;
    g.base = quad_config();
    g.base.repeats = 2;
    g.budgets = {16, 20};
    g.algorithms = {"minibatch_sgd", "local_sgd"};
    g.etas = {0.05, 0.5, 100.0};
    g.criterion = SweepCriterion::NegTrainLoss;
    const GridResult r = experiment_grid(g);
    REQUIRE(r.cells.size() == 4);
    CHECK(r.cells[0].ok);
    CHECK(r.cells[0].eta_scores.size() == 3);
    CHECK(r.cells[0].result.repeats.size() == 2);
    CHECK_FALSE(r.cells[3].ok);  // 20 is not a multiple of 16
    CHECK_FALSE(r.cells[3].error.empty());
  }
}
