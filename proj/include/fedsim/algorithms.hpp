#pragma once
// Federated optimizers. Each run reads randomness only from keyed streams of
// an RngTree (see rng.hpp), combines worker results in worker-index order and
// reports every communication round to a Monitor.
//
// Stream keys (purpose, stage, round, worker), stages and rounds 1-based:
//   snapshot batch          (Snapshot, s, 0, p)
//   Kb estimator batches    (InnerBatch, s, t, p)
//   local routine batches   (Routine, s, t, p), k-hat (RoutineSelect, s, t, p)
//   p-hat                   (SelectWorker, s, t), t-hat (SelectRound, s), s-hat (SelectStage)
// Non-staged methods use stage 0 and the round index.

#include <optional>
#include <string>
#include <vector>

#include "fedsim/cluster.hpp"
#include "fedsim/monitor.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct AlgoParams {
  double eta = 0.1;
  std::size_t K = 1;        // local steps
  std::size_t b = 1;        // local (or global) minibatch
  std::size_t b_tilde = 1;  // snapshot batch
  std::size_t T = 1;        // inner iterations per stage
  std::size_t S = 1;        // stages
  std::size_t rounds = 0;   // round count for non-staged methods; 0 = until the monitor stops
  bool auto_T = false;      // T = ceil(1 + b_tilde / (K b))

  void validate() const;
};

// ceil(1 + b_tilde / (K b))
std::size_t practical_T(std::size_t b_tilde, std::size_t K, std::size_t b);

// Iterates whose norm exceeds this radius count as diverged.
inline constexpr double kDivergenceRadius = 1e8;
// Throws DivergenceError for non-finite entries or ||x|| > kDivergenceRadius.
void divergence_guard(const ParamVector& x, const char* where);

struct RoutineResult {
  ParamVector x_last;  // x_K
  ParamVector x_pick;  // x_{k-hat}, k-hat ~ Unif[K]
  std::size_t k_hat = 1;
  std::size_t grads_used = 0;
};

struct LocalTrace {
  std::vector<ParamVector> iterates;    // x_0 .. x_K
  std::vector<ParamVector> estimators;  // v_0 .. v_K
};

// SARAH-style local recursion v_k = g_k(x_{k-1}) - g_k(x_{k-2}) + v_{k-1},
// x_k = x_{k-1} - eta v_k, with x_{-1} = x_0 and a fresh batch of size b per
// step evaluated at both points (2 K b evaluations).
RoutineResult local_routine(WorkerOracle worker, const ParamVector& x0, double eta,
                            const ParamVector& v0, std::size_t b, std::size_t K, Rng& batch_rng,
                            Rng& select_rng, LocalTrace* trace = nullptr);

struct BvrTrace {
  std::vector<ParamVector> snapshots;                // v~_0 per stage
  std::vector<ParamVector> estimators;               // v~_t per inner round
  std::vector<ParamVector> sync;                     // x_t per inner round
  std::vector<std::vector<ParamVector>> candidates;  // {x_t^(p)} per inner round (original only)
  std::vector<std::size_t> picked;                   // p-hat per inner round
};

RunRecord bvr_l_sgd(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                    const RngTree& rng, Monitor& monitor, BvrTrace* trace = nullptr);
// Picks p-hat first and runs the local routine on that worker only; T is
// derived from practical_T(); returns x~_S.
RunRecord bvr_l_sgd_practical(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                              const RngTree& rng, Monitor& monitor, BvrTrace* trace = nullptr);

// Averaging local full-gradient descent: K steps per round on every worker,
// x~_t = mean_p x_{k-hat}^(p) with a shared k-hat; returns x~_{t-hat}.
RunRecord local_gd(Federation& fed, const ParamVector& x0, double eta, std::size_t K,
                   std::size_t T, const RngTree& rng, Monitor& monitor);

// x <- x - eta * mean_p g^(p)(x), batch b per worker.
RunRecord minibatch_sgd(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                        const RngTree& rng, Monitor& monitor);
// Stage snapshot of size b_tilde, then T rounds of the aggregated SARAH
// recursion with batch b per worker; shares its estimator update with bvr_l_sgd.
RunRecord minibatch_sarah(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                          const RngTree& rng, Monitor& monitor, BvrTrace* trace = nullptr);
// K local SGD steps of batch b, then model averaging.
RunRecord local_sgd(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                    const RngTree& rng, Monitor& monitor);

struct ScaffoldTrace {
  std::vector<std::vector<ParamVector>> worker_controls;  // c_p after each round
  std::vector<ParamVector> server_controls;               // c after each round
};

// K local steps on g - c_p + c; option-II control update
// c_p <- c_p - c + (x - y_p) / (K eta); averaging sync of models and controls.
RunRecord scaffold(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                   const RngTree& rng, Monitor& monitor, ScaffoldTrace* trace = nullptr);

// Names accepted by run_algorithm and the CLI.
const std::vector<std::string>& algorithm_names();
bool is_local_method(const std::string& name);

// Dispatch by name. local_gd reads K and rounds (as T) from params.
RunRecord run_algorithm(const std::string& name, Federation& fed, const ParamVector& x0,
                        const AlgoParams& params, const RngTree& rng, Monitor& monitor);

}  // namespace fedsim
