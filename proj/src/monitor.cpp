#include "fedsim/monitor.hpp"

#include <limits>

#include "fedsim/errors.hpp"

namespace fedsim {

Monitor::Monitor(const Problem& problem, MonitorOptions opts) : problem_(problem), opts_(opts) {
  if (opts_.eval_every == 0) throw ConfigError("monitor: eval_every must be positive");
}

RunRow Monitor::evaluate(const ParamVector& x, const RoundLedger& ledger) const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  RunRow row;
  row.comm_round = ledger.comm_rounds();
  row.cum_grad_evals = ledger.total_grads();
  row.train_loss = row.train_acc = row.test_loss = row.test_acc = nan;
  if (!problem_.finite_support()) {
    row.grad_norm2 = nan;
  } else if (opts_.grad_norm_only) {
    row.grad_norm2 = problem_.global_grad(x).norm2();
  } else {
    ParamVector g;
    const Evaluation train = problem_.global_evaluate_with_grad(x, g);
    row.grad_norm2 = g.norm2();
    row.train_loss = train.loss;
    row.train_acc = train.accuracy;
    if (problem_.test) {
      const Evaluation test = problem_.test->evaluate(x.span());
      row.test_loss = test.loss;
      row.test_acc = test.accuracy;
    }
  }
  return row;
}

void Monitor::record(const ParamVector& x, const RoundLedger& ledger) {
  rows_.push_back(evaluate(x, ledger));
  if (opts_.target_grad_norm2 && rows_.back().grad_norm2 <= *opts_.target_grad_norm2) {
    target_hit_ = true;
    stop_ = true;
  }
}

bool Monitor::begin(const ParamVector& x0, const RoundLedger& ledger) {
  latest_ = x0;
  latest_round_ = ledger.comm_rounds();
  record(x0, ledger);
  if (opts_.max_rounds != 0 && ledger.comm_rounds() >= opts_.max_rounds) stop_ = true;
  return !stop_;
}

bool Monitor::after_round(const ParamVector& x, const RoundLedger& ledger) {
  latest_ = x;
  latest_round_ = ledger.comm_rounds();
  if (ledger.comm_rounds() % opts_.eval_every == 0) record(x, ledger);
  if (opts_.max_rounds != 0 && ledger.comm_rounds() >= opts_.max_rounds) stop_ = true;
  return !stop_;
}

RunRecord Monitor::finish(std::string algorithm, ParamVector output, ParamVector last,
                          const RoundLedger& ledger) {
  if (rows_.empty() || rows_.back().comm_round != latest_round_) record(latest_, ledger);
  RunRecord rec;
  rec.algorithm = std::move(algorithm);
  rec.status = target_hit_ ? RunStatus::TargetReached : RunStatus::Completed;
  rec.rows = rows_;
  rec.output = std::move(output);
  rec.last = std::move(last);
  return rec;
}

RunRecord Monitor::diverged(std::string algorithm, std::string diagnostic,
                            const RoundLedger& ledger) {
  (void)ledger;
  RunRecord rec;
  rec.algorithm = std::move(algorithm);
  rec.status = RunStatus::Diverged;
  rec.diagnostic = std::move(diagnostic);
  rec.rows = rows_;
  rec.last = latest_;
  rec.output = latest_;
  return rec;
}

}  // namespace fedsim
