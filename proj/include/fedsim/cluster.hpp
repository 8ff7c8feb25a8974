#pragma once
// Simulated federation fabric. Algorithms reach the local objectives only
// through WorkerOracle handles, so every per-example gradient evaluation is
// charged to the RoundLedger. One communication round is one barrier, however
// many aggregate/broadcast payloads it carries.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/param_vector.hpp"
#include "fedsim/problem.hpp"

namespace fedsim {

enum class BudgetMode { Off, Average, Strict };

struct FederationConfig {
  std::size_t P = 1;
  std::size_t budget_B = 1;
  BudgetMode enforce = BudgetMode::Off;
  // Multiplier on B; 2 covers evaluating one batch at two points.
  double slack = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_string(BudgetMode mode);
BudgetMode budget_mode_from_string(const std::string& s);

struct LedgerRow {
  std::size_t round = 0;
  std::size_t worker = 0;
  std::size_t grads_this_round = 0;
  std::size_t cum_grads = 0;
  std::string event;
};

struct WallEvent {
  std::size_t round = 0;  // the round in progress when the event happened
  std::string kind;
  std::optional<std::size_t> worker;
};

class RoundLedger {
 public:
  explicit RoundLedger(std::size_t workers);

  std::size_t workers() const { return cumulative_.size(); }
  std::size_t comm_rounds() const { return comm_rounds_; }
  // Evaluations charged since the last barrier.
  std::span<const std::size_t> pending() const { return pending_; }
  // Evaluations in closed rounds.
  std::span<const std::size_t> cumulative() const { return cumulative_; }
  std::size_t total_grads() const;
  // per_round()[r][p]: evaluations by worker p in round r + 1.
  const std::vector<std::vector<std::size_t>>& per_round() const { return per_round_; }
  const std::vector<std::string>& round_events() const { return round_events_; }
  const std::vector<LedgerRow>& rows() const { return rows_; }
  const std::vector<WallEvent>& events() const { return events_; }
  // Payload volume in scalars (vectors moved times their dimension).
  std::size_t bytes_equivalent() const { return bytes_equivalent_; }
  std::size_t max_round_count() const;

  void charge(std::size_t worker, std::size_t count);
  void transfer(std::size_t vectors, std::size_t dim);
  void log(std::string kind, std::optional<std::size_t> worker = std::nullopt);
  // Closes the open round: merges pending counts and increments comm_rounds.
  void close_round(const std::string& event);

 private:
  std::size_t comm_rounds_ = 0;
  std::vector<std::size_t> pending_;
  std::vector<std::size_t> cumulative_;
  std::vector<std::vector<std::size_t>> per_round_;
  std::vector<std::string> round_events_;
  std::vector<LedgerRow> rows_;
  std::vector<WallEvent> events_;
  std::size_t bytes_equivalent_ = 0;
};

// CSV columns: round,worker,grads_this_round,cum_grads,event
void write_ledger_csv(std::ostream& out, const RoundLedger& ledger);
// One JSON object per wall event.
void write_trace_jsonl(std::ostream& out, const RoundLedger& ledger);

// Throws BudgetViolation when the closed rounds of `ledger` break the budget
// of `cfg` (strict: per round; average: cumulative). No-op when enforcement is off.
void assert_budget(const RoundLedger& ledger, const FederationConfig& cfg,
                   const std::string& phase = "post-run audit");

// (1/P) sum_p vectors[p] with the fixed pairwise tree order.
ParamVector aggregate(std::span<const ParamVector> vectors);

class Federation;

class WorkerOracle {
 public:
  WorkerOracle(Federation& fed, std::size_t worker) : fed_(&fed), worker_(worker) {}

  std::size_t id() const { return worker_; }
  std::size_t dim() const;
  std::optional<std::size_t> support_size() const;
  void sample(Rng& rng, std::size_t count, std::vector<Example>& out) const;
  void batch_grad(const ParamVector& x, std::span<const Example> batch, std::span<double> out);
  void full_grad(const ParamVector& x, std::span<double> out);

 private:
  const LocalObjective& objective() const;
  Federation* fed_;
  std::size_t worker_;
};

class Federation {
 public:
  Federation(const Problem& problem, FederationConfig cfg);

  const Problem& problem() const { return problem_; }
  const FederationConfig& config() const { return cfg_; }
  const RoundLedger& ledger() const { return ledger_; }
  std::size_t workers() const { return cfg_.P; }
  std::size_t dim() const { return problem_.dim(); }

  WorkerOracle worker(std::size_t p);
  // Name of the algorithm phase, reported by budget violations.
  void set_phase(std::string phase) { phase_ = std::move(phase); }
  const std::string& phase() const { return phase_; }

  // Charges evaluations to a worker; strict mode aborts immediately on excess.
  void charge(std::size_t worker, std::size_t count);
  // Tree mean of one vector per worker, logged as the aggregation half of a round.
  ParamVector aggregate(std::span<const ParamVector> per_worker);
  // Broadcast half of a round (payload accounting only).
  void broadcast(std::size_t vectors = 1);
  // Closes the round; average mode audits the cumulative budget here.
  void barrier(const std::string& event);

 private:
  const Problem& problem_;
  FederationConfig cfg_;
  RoundLedger ledger_;
  std::string phase_ = "init";
};

}  // namespace fedsim
