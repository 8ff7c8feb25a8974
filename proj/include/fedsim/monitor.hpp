#pragma once
#include <optional>

#include "fedsim/cluster.hpp"
#include "fedsim/record.hpp"

namespace fedsim {

struct MonitorOptions {
  std::size_t eval_every = 1;
  // Stop after this many communication rounds; 0 means no limit.
  std::size_t max_rounds = 0;
  // Stop once ||grad f(x_t)||^2 <= target at an evaluation point.
  std::optional<double> target_grad_norm2;
  // Skip loss/accuracy (grad norm only); used by rounds-to-target studies.
  bool grad_norm_only = false;
};

// Observes the synchronized iterate after every communication round, records
// metric rows on the evaluation schedule and decides when a run stops.
class Monitor {
 public:
  Monitor(const Problem& problem, MonitorOptions opts);

  // Records the initial row (round 0). Returns false if the run should not start.
  bool begin(const ParamVector& x0, const RoundLedger& ledger);
  // Call after each barrier with the synchronized iterate. Returns false to stop.
  bool after_round(const ParamVector& x, const RoundLedger& ledger);
  bool stopped() const { return stop_; }
  const MonitorOptions& options() const { return opts_; }
  bool target_reached() const { return target_hit_; }

  RunRecord finish(std::string algorithm, ParamVector output, ParamVector last,
                   const RoundLedger& ledger);
  RunRecord diverged(std::string algorithm, std::string diagnostic, const RoundLedger& ledger);

  RunRow evaluate(const ParamVector& x, const RoundLedger& ledger) const;

 private:
  void record(const ParamVector& x, const RoundLedger& ledger);

  const Problem& problem_;
  MonitorOptions opts_;
  std::vector<RunRow> rows_;
  ParamVector latest_;
  std::size_t latest_round_ = 0;
  bool stop_ = false;
  bool target_hit_ = false;
};

}  // namespace fedsim
