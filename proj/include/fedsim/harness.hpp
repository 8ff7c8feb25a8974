#pragma once
// Experiment configuration, repeated runs with summaries, and the learning
// rate sweep. Configs round-trip through versioned JSON; every record embeds
// the resolved config and root seed in its header.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/algorithms.hpp"
#include "fedsim/classification.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/quadratic.hpp"
#include "fedsim/record.hpp"

namespace fedsim {

inline constexpr int kConfigSchemaVersion = 1;

struct ProblemConfig {
  // "quadratic" or "classification" (an MLP on synthetic class clusters; "mlp" is an alias)
  std::string kind = "quadratic";
  QuadraticSpec quadratic;
  ClassPartitionConfig classification;
  MlpSpec mlp;
  // "auto" (zeros for quadratics, Glorot for the MLP), "zeros", "glorot" or "normal"
  std::string init = "auto";
  // Probe-based zeta/L estimation for the MLP (costly, metadata only).
  bool estimate_meta = false;

  bool is_classification() const { return kind == "classification" || kind == "mlp"; }
  std::size_t workers() const { return is_classification() ? classification.P : quadratic.P; }
};

struct RunConfig {
  std::string algorithm = "bvr_l_sgd_practical";
  ProblemConfig problem;
  // S = 0 derives the stage count from total_rounds; b_tilde = 0 takes the
  // mean local support size (a full snapshot).
  AlgoParams params{.eta = 0.1, .K = 1, .b = 1, .b_tilde = 0, .T = 1, .S = 0};
  // P is taken from the problem.
  FederationConfig federation;
  std::size_t total_rounds = 600;
  std::size_t eval_every = 1;
  std::optional<double> target_grad_norm2;
  bool grad_norm_only = false;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;

  // Throws ConfigError (unknown algorithm, eval_every not dividing total_rounds, ...).
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys and schema mismatches are errors.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Problem instance shared by the repeats of a config (data depend on seed only).
std::shared_ptr<Problem> build_problem(const ProblemConfig& pc, std::uint64_t seed);
ParamVector initial_point(const Problem& problem, const ProblemConfig& pc, std::uint64_t seed);

// Seed of repeat r; repeat 0 uses the root seed itself.
std::uint64_t repeat_seed(std::uint64_t root, std::size_t r);

// Resolved algorithm parameters for a config on a problem (S, rounds, P).
AlgoParams resolve_params(const RunConfig& cfg, const Problem& problem);

struct SummaryRow {
  std::size_t comm_round = 0;
  std::size_t count = 0;  // repeats contributing to this round
  // train_loss, train_acc, test_loss, test_acc, grad_norm2, cum_grad_evals
  std::array<double, 6> mean{};
  std::array<double, 6> stddev{};
};

inline const std::array<const char*, 6> kSummaryMetrics{
    "train_loss", "train_acc", "test_loss", "test_acc", "grad_norm2", "cum_grad_evals"};

// Per-round mean and sample standard deviation across repeats, matched by comm_round.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& repeats);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

struct RunResult {
  RunConfig config;
  std::vector<RunRecord> repeats;
  std::vector<SummaryRow> summary;
  bool any_diverged() const;
};

// Runs one repeat on a prebuilt problem.
RunRecord run_once(const RunConfig& cfg, const Problem& problem, std::size_t repeat);
RunResult run(const RunConfig& cfg);
RunResult run(const RunConfig& cfg, const Problem& problem);

enum class SweepCriterion { MinTrainAccuracy, NegTrainLoss };

inline const std::vector<double> kDefaultEtaGrid{0.005, 0.01, 0.05, 0.1, 0.5, 1.0};
inline constexpr std::size_t kSweepWindow = 100;

// min over the last `window` rows of train accuracy (or of -train loss);
// -inf for diverged records or records without rows.
double sweep_score(const RunRecord& rec, SweepCriterion criterion,
                   std::size_t window = kSweepWindow);
// Mean of sweep_score over repeats; -inf when any repeat is -inf.
double sweep_score(const std::vector<RunRecord>& repeats, SweepCriterion criterion,
                   std::size_t window = kSweepWindow);

struct SweepEntry {
  double eta = 0.0;
  double score = -std::numeric_limits<double>::infinity();
  RunResult result;
};

struct SweepResult {
  std::optional<double> chosen_eta;  // nullopt: no stable eta
  std::vector<SweepEntry> entries;   // in grid order
  std::string message;
};

// Highest score wins; ties go to the smaller eta; all -inf gives "no stable eta".
SweepResult sweep_eta(const RunConfig& cfg, const std::vector<double>& etas,
                      SweepCriterion criterion = SweepCriterion::MinTrainAccuracy,
                      const Problem* problem = nullptr);
// Selection rule alone, for re-evaluating stored scores.
std::optional<std::size_t> select_eta(const std::vector<double>& etas,
                                      const std::vector<double>& scores);

// Budget split for a method: local methods K = B/16, b = 16; others b = B.
void apply_budget_split(RunConfig& cfg, std::size_t budget);

// Step size and batch schedule for BVR-L-SGD on a problem with known
// L, zeta, sigma^2:
//   b_tilde = min(n/P, sigma^2/(P eps)), T = ceil(1 + b_tilde/(K b)),
//   eta = c * min(1/L, 1/(K zeta), sqrt(b/K)/L, sqrt(P b/(K T))/L).
struct Schedule {
  double eta = 0.0;
  std::size_t K = 1, b = 1, b_tilde = 1, T = 1;
};
Schedule corollary_schedule(const ProblemMeta& meta, std::size_t K, std::size_t b, double eps,
                            double c = 0.25);

// First comm_round whose grad_norm2 <= eps, or nullopt.
std::optional<std::size_t> rounds_to_target(const RunRecord& rec, double eps);

}  // namespace fedsim
