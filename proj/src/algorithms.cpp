#include "fedsim/algorithms.hpp"

#include <cmath>
#include <fmt/format.h>

#include "algo_common.hpp"
#include "fedsim/kernels.hpp"

namespace fedsim {

void AlgoParams::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("params: eta must be positive");
  if (K == 0 || b == 0) throw ConfigError("params: K and b must be at least 1");
  if (b_tilde == 0) throw ConfigError("params: b_tilde must be at least 1");
  if (T == 0 || S == 0) throw ConfigError("params: T and S must be at least 1");
}

std::size_t practical_T(std::size_t b_tilde, std::size_t K, std::size_t b) {
  if (K == 0 || b == 0) throw ConfigError("practical_T: K and b must be at least 1");
  const std::size_t kb = K * b;
  return 1 + (b_tilde + kb - 1) / kb;
}

void divergence_guard(const ParamVector& x, const char* where) {
  if (!x.all_finite()) throw DivergenceError(fmt::format("non-finite iterate in {}", where));
  const double n = x.norm();
  if (n > kDivergenceRadius)
    throw DivergenceError(fmt::format("iterate norm {:.3e} exceeds {:.0e} in {}", n,
                                      kDivergenceRadius, where));
}

RoutineResult local_routine(WorkerOracle worker, const ParamVector& x0, double eta,
                            const ParamVector& v0, std::size_t b, std::size_t K, Rng& batch_rng,
                            Rng& select_rng, LocalTrace* trace) {
  if (b == 0 || K == 0) throw ConfigError("local_routine: b and K must be at least 1");
  v0.require_finite("local_routine v0");
  const std::size_t d = x0.size();
  const std::size_t k_hat = pick_uniform(K, select_rng) + 1;

  ParamVector x_prev2 = x0, x_prev = x0, v = v0;
  ParamVector g_now(d), g_old(d), picked = x0;
  std::vector<Example> batch;
  if (trace) {
    trace->iterates = {x0};
    trace->estimators = {v0};
  }
  for (std::size_t k = 1; k <= K; ++k) {
    worker.sample(batch_rng, b, batch);
    worker.batch_grad(x_prev, batch, g_now.span());
    worker.batch_grad(x_prev2, batch, g_old.span());
    kernels::sub(g_now.span(), g_old.span(), g_now.span());
    v += g_now;
    ParamVector x_next = x_prev;
    x_next.axpy(-eta, v);
    divergence_guard(x_next, "local routine");
    x_prev2 = std::move(x_prev);
    x_prev = std::move(x_next);
    if (k == k_hat) picked = x_prev;
    if (trace) {
      trace->iterates.push_back(x_prev);
      trace->estimators.push_back(v);
    }
  }
  return {std::move(x_prev), std::move(picked), k_hat, 2 * K * b};
}

namespace detail {

std::vector<ParamVector> snapshot_gradients(Federation& fed, const ParamVector& x,
                                            std::size_t b_tilde, std::size_t stage,
                                            const RngTree& rng) {
  const std::size_t P = fed.workers();
  const auto mean_support = fed.problem().mean_support();
  const bool full = mean_support && static_cast<double>(b_tilde) >= *mean_support;
  std::vector<ParamVector> out(P, ParamVector(fed.dim()));
  std::vector<Example> batch;
  for (std::size_t p = 0; p < P; ++p) {
    WorkerOracle w = fed.worker(p);
    if (full) {
      w.full_grad(x, out[p].span());
    } else {
      Rng r = rng.stream(Purpose::Snapshot, stage, 0, p);
      w.sample(r, b_tilde, batch);
      w.batch_grad(x, batch, out[p].span());
    }
    out[p].require_finite("snapshot gradient");
  }
  return out;
}

void advance_estimators(Federation& fed, const ParamVector& x_prev, const ParamVector& x_prev2,
                        std::size_t batch_size, std::size_t stage, std::size_t round,
                        const RngTree& rng, std::vector<ParamVector>& v) {
  const std::size_t d = fed.dim();
  ParamVector g_now(d), g_old(d);
  std::vector<Example> batch;
  for (std::size_t p = 0; p < fed.workers(); ++p) {
    WorkerOracle w = fed.worker(p);
    Rng r = rng.stream(Purpose::InnerBatch, stage, round, p);
    w.sample(r, batch_size, batch);
    w.batch_grad(x_prev, batch, g_now.span());
    w.batch_grad(x_prev2, batch, g_old.span());
    kernels::sub(g_now.span(), g_old.span(), g_now.span());
    v[p] += g_now;
  }
}

}  // namespace detail

namespace {

enum class BvrVariant { Original, Practical };

RunRecord bvr_impl(BvrVariant variant, Federation& fed, const ParamVector& x0,
                   const AlgoParams& params, const RngTree& rng, Monitor& monitor,
                   BvrTrace* trace) {
  params.validate();
  const std::string name = variant == BvrVariant::Original ? "bvr_l_sgd" : "bvr_l_sgd_practical";
  const std::size_t P = fed.workers();
  const std::size_t T = (variant == BvrVariant::Practical || params.auto_T)
                            ? practical_T(params.b_tilde, params.K, params.b)
                            : params.T;
  const std::size_t inner_batch = params.K * params.b;

  return detail::guarded(name, fed, monitor, [&]() -> RunRecord {
    x0.require_finite("x0");
    ParamVector x_stage = x0;
    std::vector<ParamVector> stage_outputs;
    if (!monitor.begin(x0, fed.ledger())) return monitor.finish(name, x0, x0, fed.ledger());

    bool stop = false;
    for (std::size_t s = 1; s <= params.S && !stop; ++s) {
      fed.set_phase(name + "/snapshot");
      std::vector<ParamVector> v = detail::snapshot_gradients(fed, x_stage, params.b_tilde, s, rng);
      ParamVector v_global = fed.aggregate(v);
      fed.broadcast(P);
      fed.barrier("snapshot");
      if (trace) trace->snapshots.push_back(v_global);
      if (!monitor.after_round(x_stage, fed.ledger())) break;

      ParamVector x_prev = x_stage, x_prev2 = x_stage;
      std::vector<ParamVector> round_outputs;
      for (std::size_t t = 1; t <= T; ++t) {
        fed.set_phase(name + "/estimator");
        detail::advance_estimators(fed, x_prev, x_prev2, inner_batch, s, t, rng, v);
        v_global = fed.aggregate(v);

        fed.set_phase(name + "/local-routine");
        ParamVector x_next, x_out;
        if (variant == BvrVariant::Original) {
          std::vector<ParamVector> candidates, candidate_outs;
          for (std::size_t p = 0; p < P; ++p) {
            Rng batch_rng = rng.stream(Purpose::Routine, s, t, p);
            Rng select_rng = rng.stream(Purpose::RoutineSelect, s, t, p);
            RoutineResult r = local_routine(fed.worker(p), x_prev, params.eta, v_global,
                                            params.b, params.K, batch_rng, select_rng);
            candidates.push_back(std::move(r.x_last));
            candidate_outs.push_back(std::move(r.x_pick));
          }
          fed.broadcast(P);
          Rng selector = rng.stream(Purpose::SelectWorker, s, t);
          const std::size_t p_hat = pick_uniform(P, selector);
          x_next = candidates[p_hat];
          x_out = candidate_outs[p_hat];
          if (trace) {
            trace->candidates.push_back(candidates);
            trace->picked.push_back(p_hat);
          }
        } else {
          Rng selector = rng.stream(Purpose::SelectWorker, s, t);
          const std::size_t p_hat = pick_uniform(P, selector);
          Rng batch_rng = rng.stream(Purpose::Routine, s, t, p_hat);
          Rng select_rng = rng.stream(Purpose::RoutineSelect, s, t, p_hat);
          RoutineResult r = local_routine(fed.worker(p_hat), x_prev, params.eta, v_global,
                                          params.b, params.K, batch_rng, select_rng);
          x_next = std::move(r.x_last);
          x_out = std::move(r.x_pick);
          fed.broadcast(1);
          if (trace) trace->picked.push_back(p_hat);
        }
        fed.barrier("sync");
        if (trace) {
          trace->estimators.push_back(v_global);
          trace->sync.push_back(x_next);
        }
        x_prev2 = std::move(x_prev);
        x_prev = std::move(x_next);
        round_outputs.push_back(std::move(x_out));
        if (!monitor.after_round(x_prev, fed.ledger())) {
          stop = true;
          break;
        }
      }
      x_stage = x_prev;
      if (round_outputs.size() == T) {
        Rng selector = rng.stream(Purpose::SelectRound, s);
        stage_outputs.push_back(round_outputs[pick_uniform(T, selector)]);
      }
    }

    ParamVector output = x_stage;
    if (variant == BvrVariant::Original && !stage_outputs.empty()) {
      Rng selector = rng.stream(Purpose::SelectStage);
      output = stage_outputs[pick_uniform(stage_outputs.size(), selector)];
    }
    return monitor.finish(name, std::move(output), x_stage, fed.ledger());
  });
}

}  // namespace

RunRecord bvr_l_sgd(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                    const RngTree& rng, Monitor& monitor, BvrTrace* trace) {
  return bvr_impl(BvrVariant::Original, fed, x0, params, rng, monitor, trace);
}

RunRecord bvr_l_sgd_practical(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                              const RngTree& rng, Monitor& monitor, BvrTrace* trace) {
  return bvr_impl(BvrVariant::Practical, fed, x0, params, rng, monitor, trace);
}

}  // namespace fedsim
