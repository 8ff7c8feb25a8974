#include "fedsim/grid.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "fedsim/errors.hpp"
#include "fedsim/svg.hpp"

namespace fedsim {

namespace {

MetricStat mean_std(const std::vector<double>& v) {
  MetricStat s;
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

template <typename Get>
MetricStat best_of(const RunResult& r, Get get, bool minimize) {
  std::vector<double> per_repeat;
  for (const auto& rec : r.repeats) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const auto& row : rec.rows) {
      const double v = get(row);
      if (std::isnan(v)) continue;
      if (std::isnan(best) || (minimize ? v < best : v > best)) best = v;
    }
    per_repeat.push_back(best);
  }
  return mean_std(per_repeat);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

std::string budget_tag(std::size_t b) { return std::to_string(b); }
std::string q_tag(double q) { return fmt::format("{:.3g}", q); }

}  // namespace

MetricStat best_train_loss(const RunResult& r) {
  return best_of(r, [](const RunRow& row) { return row.train_loss; }, true);
}

MetricStat best_test_acc(const RunResult& r) {
  return best_of(r, [](const RunRow& row) { return row.test_acc; }, false);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

GridResult experiment_grid(const GridSpec& spec) {
  if (spec.budgets.empty() || spec.algorithms.empty())
    throw ConfigError("grid: budgets and algorithms must be non-empty");
  const bool classification = spec.base.problem.is_classification();
  std::vector<double> qs = spec.q_values;
  if (qs.empty() || !classification) qs = {spec.base.problem.classification.q};

  // One problem per q, shared read-only by its cells.
  std::vector<std::shared_ptr<Problem>> problems(qs.size());
  std::vector<std::string> problem_errors(qs.size());
  parallel_for(qs.size(), spec.threads, [&](std::size_t i) {
    try {
      ProblemConfig pc = spec.base.problem;
      pc.classification.q = qs[i];
      problems[i] = build_problem(pc, spec.base.seed);
    } catch (const std::exception& e) {
      problem_errors[i] = e.what();
    }
  });

  GridResult out;
  for (double q : qs)
    for (std::size_t B : spec.budgets)
      for (const auto& a : spec.algorithms) {
        GridCell c;
        c.q = q;
        c.budget = B;
        c.algorithm = a;
        out.cells.push_back(std::move(c));
      }

  const std::size_t per_q = spec.budgets.size() * spec.algorithms.size();
  parallel_for(out.cells.size(), spec.threads, [&](std::size_t i) {
    GridCell& cell = out.cells[i];
    const std::size_t qi = i / per_q;
    try {
      if (!problems[qi]) throw ConfigError(problem_errors[qi]);
      const Problem& problem = *problems[qi];
      RunConfig cfg = spec.base;
      cfg.algorithm = cell.algorithm;
      cfg.problem.classification.q = cell.q;
      apply_budget_split(cfg, cell.budget);
      cfg.validate();

      if (spec.etas.empty()) {
        cell.eta = cfg.params.eta;
        cell.result = run(cfg, problem);
      } else {
        const std::size_t tune = std::min(std::max<std::size_t>(1, spec.tune_repeats), cfg.repeats);
        RunConfig tcfg = cfg;
        tcfg.repeats = tune;
        SweepResult sw = sweep_eta(tcfg, spec.etas, spec.criterion, &problem);
        for (const auto& e : sw.entries) cell.eta_scores.emplace_back(e.eta, e.score);
        if (!sw.chosen_eta) throw DivergenceError(sw.message);
        cell.eta = *sw.chosen_eta;
        cfg.params.eta = cell.eta;
        RunResult res;
        res.config = cfg;
        for (auto& e : sw.entries)
          if (e.eta == cell.eta) res.repeats = std::move(e.result.repeats);
        for (std::size_t r = res.repeats.size(); r < cfg.repeats; ++r)
          res.repeats.push_back(run_once(cfg, problem, r));
        // Tuning records carry the tuning config; stamp the final one.
        const std::string cfg_json = to_json(cfg).dump();
        for (auto& rec : res.repeats) rec.header["config"] = cfg_json;
        res.summary = summarize(res.repeats);
        cell.result = std::move(res);
      }
      cell.best_train_loss = best_train_loss(cell.result);
      cell.best_test_acc = best_test_acc(cell.result);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  return out;
}

void write_grid_outputs(const GridResult& grid, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string cols =
      "q,budget,algorithm,status,eta,best_train_loss_mean,best_train_loss_std,"
      "best_test_acc_mean,best_test_acc_std,diverged_repeats,error\n";
  auto cell_line = [](const GridCell& c) {
    std::size_t diverged = 0;
    for (const auto& r : c.result.repeats) diverged += r.status == RunStatus::Diverged;
    std::string err = c.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", format_double(c.q), c.budget,
                       c.algorithm, c.ok ? "ok" : "failed", format_double(c.eta),
                       format_double(c.best_train_loss.mean), format_double(c.best_train_loss.stddev),
                       format_double(c.best_test_acc.mean), format_double(c.best_test_acc.stddev),
                       diverged, err);
  };

  std::vector<const GridCell*> cells;
  for (const auto& c : grid.cells) cells.push_back(&c);
  {
    auto out = open_out(dir / "cells.csv");
    out << cols;
    for (const auto* c : cells) out << cell_line(*c);
  }
  auto sorted = [&](auto key) {
    std::vector<const GridCell*> v = cells;
    std::stable_sort(v.begin(), v.end(), [&](auto* a, auto* b) { return key(*a) < key(*b); });
    return v;
  };
  {
    auto out = open_out(dir / "view_q.csv");
    out << cols;
    for (const auto* c : sorted([](const GridCell& c) { return std::make_tuple(c.budget, c.algorithm, c.q); }))
      out << cell_line(*c);
  }
  {
    auto out = open_out(dir / "view_budget.csv");
    out << cols;
    for (const auto* c : sorted([](const GridCell& c) { return std::make_tuple(c.q, c.algorithm, c.budget); }))
      out << cell_line(*c);
  }
  {
    auto out = open_out(dir / "view_rounds.csv");
    out << "q,budget,algorithm,comm_round,count";
    for (const char* m : kSummaryMetrics) out << ',' << m << "_mean," << m << "_std";
    out << '\n';
    for (const auto* c : cells)
      for (const auto& r : c->result.summary) {
        out << format_double(c->q) << ',' << c->budget << ',' << c->algorithm << ','
            << r.comm_round << ',' << r.count;
        for (std::size_t m = 0; m < 6; ++m)
          out << ',' << format_double(r.mean[m]) << ',' << format_double(r.stddev[m]);
        out << '\n';
      }
  }

  // Charts.
  std::map<std::size_t, std::map<std::string, Series>> by_budget;
  std::map<double, std::map<std::string, Series>> by_q;
  for (const auto* c : cells) {
    if (!c->ok) continue;
    const auto& m = c->best_train_loss;
    for (auto* s : {&by_budget[c->budget][c->algorithm], &by_q[c->q][c->algorithm]}) {
      s->label = c->algorithm;
      s->lo.push_back(m.mean - m.stddev);
      s->hi.push_back(m.mean + m.stddev);
      s->y.push_back(m.mean);
    }
    by_budget[c->budget][c->algorithm].x.push_back(c->q);
    by_q[c->q][c->algorithm].x.push_back(static_cast<double>(c->budget));
  }
  for (auto& [B, series] : by_budget) {
    std::vector<Series> v;
    for (auto& [name, s] : series) v.push_back(s);
    ChartSpec spec{fmt::format("best train loss vs q (B = {})", B), "q", "best train loss"};
    auto out = open_out(dir / ("view_q_B" + budget_tag(B) + ".svg"));
    out << line_chart_svg(spec, v);
  }
  for (auto& [q, series] : by_q) {
    std::vector<Series> v;
    for (auto& [name, s] : series) v.push_back(s);
    ChartSpec spec{fmt::format("best train loss vs budget (q = {})", q_tag(q)), "budget B",
                   "best train loss"};
    spec.log_x = true;
    auto out = open_out(dir / ("view_budget_q" + q_tag(q) + ".svg"));
    out << line_chart_svg(spec, v);
  }
  std::map<std::pair<double, std::size_t>, std::vector<Series>> curves;
  for (const auto* c : cells) {
    if (!c->ok) continue;
    Series s;
    s.label = c->algorithm;
    for (const auto& r : c->result.summary) {
      s.x.push_back(static_cast<double>(r.comm_round));
      s.y.push_back(r.mean[0]);
      s.lo.push_back(r.mean[0] - r.stddev[0]);
      s.hi.push_back(r.mean[0] + r.stddev[0]);
    }
    curves[{c->q, c->budget}].push_back(std::move(s));
  }
  for (auto& [key, v] : curves) {
    ChartSpec spec{fmt::format("train loss vs rounds (q = {}, B = {})", q_tag(key.first), key.second),
                   "communication round", "train loss"};
    spec.log_y = true;
    auto out = open_out(dir / ("view_rounds_q" + q_tag(key.first) + "_B" + budget_tag(key.second) + ".svg"));
    out << line_chart_svg(spec, v);
  }
}

}  // namespace fedsim
