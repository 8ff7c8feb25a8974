#include "fedsim/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/reduce.hpp"

namespace fedsim {

void FederationConfig::validate() const {
  if (P < 1) throw ConfigError("federation: P must be at least 1");
  if (budget_B < 1) throw ConfigError("federation: budget_B must be at least 1");
  if (!(slack > 0.0)) throw ConfigError("federation: slack must be positive");
}

std::string to_string(BudgetMode mode) {
  switch (mode) {
    case BudgetMode::Off: return "off";
    case BudgetMode::Average: return "average";
    case BudgetMode::Strict: return "strict";
  }
  return "off";
}

BudgetMode budget_mode_from_string(const std::string& s) {
  if (s == "off") return BudgetMode::Off;
  if (s == "average") return BudgetMode::Average;
  if (s == "strict") return BudgetMode::Strict;
  throw ConfigError("unknown budget mode '" + s + "'");
}

RoundLedger::RoundLedger(std::size_t workers) : pending_(workers, 0), cumulative_(workers, 0) {}

std::size_t RoundLedger::total_grads() const {
  return std::accumulate(cumulative_.begin(), cumulative_.end(), std::size_t{0});
}

std::size_t RoundLedger::max_round_count() const {
  std::size_t best = 0;
  for (const auto& r : per_round_) best = std::max(best, *std::max_element(r.begin(), r.end()));
  return best;
}

void RoundLedger::charge(std::size_t worker, std::size_t count) { pending_.at(worker) += count; }

void RoundLedger::transfer(std::size_t vectors, std::size_t dim) { bytes_equivalent_ += vectors * dim; }

void RoundLedger::log(std::string kind, std::optional<std::size_t> worker) {
  events_.push_back({comm_rounds_ + 1, std::move(kind), worker});
}

void RoundLedger::close_round(const std::string& event) {
  ++comm_rounds_;
  for (std::size_t p = 0; p < workers(); ++p) {
    cumulative_[p] += pending_[p];
    rows_.push_back({comm_rounds_, p, pending_[p], cumulative_[p], event});
  }
  per_round_.push_back(pending_);
  round_events_.push_back(event);
  std::fill(pending_.begin(), pending_.end(), 0);
  events_.push_back({comm_rounds_, "barrier:" + event, std::nullopt});
}

void write_ledger_csv(std::ostream& out, const RoundLedger& ledger) {
  out << "round,worker,grads_this_round,cum_grads,event\n";
  for (const auto& r : ledger.rows())
    out << r.round << ',' << r.worker << ',' << r.grads_this_round << ',' << r.cum_grads << ','
        << r.event << '\n';
}

void write_trace_jsonl(std::ostream& out, const RoundLedger& ledger) {
  for (const auto& e : ledger.events()) {
    nlohmann::json j{{"round", e.round}, {"kind", e.kind}};
    j["worker"] = e.worker ? nlohmann::json(*e.worker) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
  }
}

void assert_budget(const RoundLedger& ledger, const FederationConfig& cfg,
                   const std::string& phase) {
  const double cap = cfg.slack * static_cast<double>(cfg.budget_B);
  if (cfg.enforce == BudgetMode::Strict) {
    for (std::size_t r = 0; r < ledger.per_round().size(); ++r)
      for (std::size_t p = 0; p < ledger.workers(); ++p)
        if (static_cast<double>(ledger.per_round()[r][p]) > cap)
          throw BudgetViolation(fmt::format(
              "strict budget violated in {}: worker {} used {} gradients in round {} (cap {} = {} x B)",
              phase, p, ledger.per_round()[r][p], r + 1, cap, cfg.slack));
  } else if (cfg.enforce == BudgetMode::Average) {
    const double allowed = cap * static_cast<double>(ledger.comm_rounds());
    for (std::size_t p = 0; p < ledger.workers(); ++p)
      if (static_cast<double>(ledger.cumulative()[p]) > allowed)
        throw BudgetViolation(fmt::format(
            "average budget violated in {}: worker {} used {} gradients over {} rounds (cap {} = {} x B x rounds)",
            phase, p, ledger.cumulative()[p], ledger.comm_rounds(), allowed, cfg.slack));
  }
}

ParamVector aggregate(std::span<const ParamVector> vectors) {
  if (vectors.empty()) throw ConfigError("aggregate: no vectors");
  std::vector<std::span<const double>> views;
  views.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.size() != vectors.front().size()) throw ConfigError("aggregate: dimension mismatch");
    views.push_back(v.span());
  }
  std::vector<double> out(vectors.front().size());
  pairwise_mean(views, out);
  return ParamVector(std::move(out));
}

std::size_t WorkerOracle::dim() const { return objective().dim(); }
std::optional<std::size_t> WorkerOracle::support_size() const { return objective().support_size(); }
const LocalObjective& WorkerOracle::objective() const { return fed_->problem().local(worker_); }

void WorkerOracle::sample(Rng& rng, std::size_t count, std::vector<Example>& out) const {
  objective().sample(rng, count, out);
}

void WorkerOracle::batch_grad(const ParamVector& x, std::span<const Example> batch,
                              std::span<double> out) {
  fed_->charge(worker_, batch.size());
  objective().batch_grad(x.span(), batch, out);
}

void WorkerOracle::full_grad(const ParamVector& x, std::span<double> out) {
  auto n = objective().support_size();
  if (!n) throw ConfigError("full_grad requires a finite local support");
  fed_->charge(worker_, *n);
  objective().full_grad(x.span(), out);
}

Federation::Federation(const Problem& problem, FederationConfig cfg)
    : problem_(problem), cfg_(cfg), ledger_(cfg.P) {
  cfg_.validate();
  if (problem.workers() != cfg_.P)
    throw ConfigError(fmt::format("federation: config has P={} but the problem has {} workers",
                                  cfg_.P, problem.workers()));
}

WorkerOracle Federation::worker(std::size_t p) {
  if (p >= cfg_.P) throw ConfigError("federation: worker index out of range");
  return WorkerOracle(*this, p);
}

void Federation::charge(std::size_t worker, std::size_t count) {
  ledger_.charge(worker, count);
  if (cfg_.enforce == BudgetMode::Strict) {
    const double cap = cfg_.slack * static_cast<double>(cfg_.budget_B);
    if (static_cast<double>(ledger_.pending()[worker]) > cap)
      throw BudgetViolation(fmt::format(
          "strict budget violated in {}: worker {} reached {} gradients in round {} (cap {} = {} x B)",
          phase_, worker, ledger_.pending()[worker], ledger_.comm_rounds() + 1, cap, cfg_.slack));
  }
}

ParamVector Federation::aggregate(std::span<const ParamVector> per_worker) {
  if (per_worker.size() != cfg_.P) throw ConfigError("aggregate: expected one vector per worker");
  ledger_.transfer(per_worker.size(), dim());
  ledger_.log("aggregate:" + phase_);
  return fedsim::aggregate(per_worker);
}

void Federation::broadcast(std::size_t vectors) {
  ledger_.transfer(vectors, dim());
  ledger_.log("broadcast:" + phase_);
}

void Federation::barrier(const std::string& event) {
  ledger_.close_round(event);
  if (cfg_.enforce == BudgetMode::Average) assert_budget(ledger_, cfg_, phase_);
}

}  // namespace fedsim
