#pragma once
// The three experiment views: best metric against q at fixed budget, against
// budget at fixed q, and metric curves against communication rounds.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fedsim/harness.hpp"

namespace fedsim {

struct GridSpec {
  // Problem, rounds, repeats and seed come from here; algorithm, q and the
  // budget split are overwritten per cell.
  RunConfig base;
  std::vector<double> q_values;  // classification only; quadratics take {base q}
  std::vector<std::size_t> budgets;
  std::vector<std::string> algorithms;
  // Empty: use base.params.eta. Otherwise tune per cell with the sweep rule.
  std::vector<double> etas;
  SweepCriterion criterion = SweepCriterion::MinTrainAccuracy;
  // Repeats used to score each eta; the chosen eta reuses them and runs the rest.
  std::size_t tune_repeats = 1;
  // Worker threads; 0 uses the hardware concurrency.
  std::size_t threads = 0;
};

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;
};

struct GridCell {
  double q = 0.0;
  std::size_t budget = 0;
  std::string algorithm;
  bool ok = false;
  std::string error;  // failure marker when !ok
  double eta = 0.0;
  std::vector<std::pair<double, double>> eta_scores;
  RunResult result;
  MetricStat best_train_loss;  // min over evaluated rounds, then mean/std over repeats
  MetricStat best_test_acc;    // max over evaluated rounds
};

struct GridResult {
  std::vector<GridCell> cells;  // ordered by (q, budget, algorithm) as given
};

// Best-achieved metrics of a run (per repeat min loss / max accuracy).
MetricStat best_train_loss(const RunResult& r);
MetricStat best_test_acc(const RunResult& r);

// Runs every cell as an independent job on a thread pool; the result does not
// depend on scheduling. Cell failures are recorded, not thrown.
GridResult experiment_grid(const GridSpec& spec);

// Writes cells.csv, view_q.csv, view_budget.csv, view_rounds.csv and SVG charts.
void write_grid_outputs(const GridResult& grid, const std::filesystem::path& dir);

// Runs fn(i) for i in [0, n) on `threads` workers (0: hardware concurrency).
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace fedsim
