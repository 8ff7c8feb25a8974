#include <algorithm>
#include <cmath>
#include <limits>

#include "algo_common.hpp"
#include "fedsim/algorithms.hpp"
#include "fedsim/kernels.hpp"

namespace fedsim {

namespace {

// Round budget for non-staged methods; rounds = 0 defers to the monitor.
std::size_t round_limit(std::size_t rounds, const Monitor& monitor, const char* name) {
  if (rounds != 0) return rounds;
  const auto& o = monitor.options();
  if (o.max_rounds == 0 && !o.target_grad_norm2)
    throw ConfigError(std::string(name) + ": rounds = 0 needs a monitor round limit or target");
  return std::numeric_limits<std::size_t>::max();
}

void check_step(double eta, std::size_t K) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
  if (K == 0) throw ConfigError("K must be at least 1");
}

}  // namespace

RunRecord local_gd(Federation& fed, const ParamVector& x0, double eta, std::size_t K,
                   std::size_t T, const RngTree& rng, Monitor& monitor) {
  check_step(eta, K);
  const std::string name = "local_gd";
  const std::size_t rounds = round_limit(T, monitor, "local_gd");
  return detail::guarded(name, fed, monitor, [&]() -> RunRecord {
    x0.require_finite("x0");
    if (!fed.problem().finite_support()) throw ConfigError("local_gd requires finite local supports");
    const std::size_t P = fed.workers();
    ParamVector x = x0;
    std::vector<ParamVector> averages;
    if (monitor.begin(x0, fed.ledger())) {
      fed.set_phase(name);
      ParamVector g(fed.dim());
      for (std::size_t t = 1; t <= rounds; ++t) {
        Rng step_rng = rng.stream(Purpose::SelectStep, 0, t);
        const std::size_t k_hat = pick_uniform(K, step_rng) + 1;
        std::vector<ParamVector> picks;
        picks.reserve(P);
        for (std::size_t p = 0; p < P; ++p) {
          WorkerOracle w = fed.worker(p);
          ParamVector y = x, pick = x;
          for (std::size_t k = 1; k <= K; ++k) {
            w.full_grad(y, g.span());
            y.axpy(-eta, g);
            divergence_guard(y, "local_gd");
            if (k == k_hat) pick = y;
          }
          picks.push_back(std::move(pick));
        }
        x = fed.aggregate(picks);
        fed.broadcast();
        fed.barrier("average");
        averages.push_back(x);
        if (!monitor.after_round(x, fed.ledger())) break;
      }
    }
    ParamVector output = x;
    if (!averages.empty()) {
      Rng selector = rng.stream(Purpose::SelectRound, 0);
      output = averages[pick_uniform(averages.size(), selector)];
    }
    return monitor.finish(name, std::move(output), x, fed.ledger());
  });
}

RunRecord minibatch_sgd(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                        const RngTree& rng, Monitor& monitor) {
  check_step(params.eta, 1);
  if (params.b == 0) throw ConfigError("minibatch_sgd: b must be at least 1");
  const std::string name = "minibatch_sgd";
  const std::size_t rounds = round_limit(params.rounds, monitor, "minibatch_sgd");
  return detail::guarded(name, fed, monitor, [&]() -> RunRecord {
    x0.require_finite("x0");
    const std::size_t P = fed.workers();
    ParamVector x = x0;
    if (monitor.begin(x0, fed.ledger())) {
      fed.set_phase(name);
      std::vector<ParamVector> grads(P, ParamVector(fed.dim()));
      std::vector<Example> batch;
      for (std::size_t t = 1; t <= rounds; ++t) {
        for (std::size_t p = 0; p < P; ++p) {
          WorkerOracle w = fed.worker(p);
          Rng r = rng.stream(Purpose::LocalSteps, 0, t, p);
          w.sample(r, params.b, batch);
          w.batch_grad(x, batch, grads[p].span());
        }
        x.axpy(-params.eta, fed.aggregate(grads));
        divergence_guard(x, "minibatch_sgd");
        fed.broadcast();
        fed.barrier("step");
        if (!monitor.after_round(x, fed.ledger())) break;
      }
    }
    return monitor.finish(name, x, x, fed.ledger());
  });
}

RunRecord minibatch_sarah(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                          const RngTree& rng, Monitor& monitor, BvrTrace* trace) {
  params.validate();
  const std::string name = "minibatch_sarah";
  return detail::guarded(name, fed, monitor, [&]() -> RunRecord {
    x0.require_finite("x0");
    const std::size_t P = fed.workers();
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

      fed.set_phase(name + "/estimator");
      ParamVector x_prev = x_stage, x_prev2 = x_stage;
      std::vector<ParamVector> round_outputs;
      for (std::size_t t = 1; t <= params.T; ++t) {
        detail::advance_estimators(fed, x_prev, x_prev2, params.b, s, t, rng, v);
        v_global = fed.aggregate(v);
        ParamVector x_next = x_prev;
        x_next.axpy(-params.eta, v_global);
        divergence_guard(x_next, "minibatch_sarah");
        fed.broadcast();
        fed.barrier("sync");
        if (trace) {
          trace->estimators.push_back(v_global);
          trace->sync.push_back(x_next);
        }
        x_prev2 = std::move(x_prev);
        x_prev = std::move(x_next);
        round_outputs.push_back(x_prev);
        if (!monitor.after_round(x_prev, fed.ledger())) {
          stop = true;
          break;
        }
      }
      x_stage = x_prev;
      if (round_outputs.size() == params.T) {
        Rng selector = rng.stream(Purpose::SelectRound, s);
        stage_outputs.push_back(round_outputs[pick_uniform(params.T, selector)]);
      }
    }
    ParamVector output = x_stage;
    if (!stage_outputs.empty()) {
      Rng selector = rng.stream(Purpose::SelectStage);
      output = stage_outputs[pick_uniform(stage_outputs.size(), selector)];
    }
    return monitor.finish(name, std::move(output), x_stage, fed.ledger());
  });
}

RunRecord local_sgd(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                    const RngTree& rng, Monitor& monitor) {
  check_step(params.eta, params.K);
  if (params.b == 0) throw ConfigError("local_sgd: b must be at least 1");
  const std::string name = "local_sgd";
  const std::size_t rounds = round_limit(params.rounds, monitor, "local_sgd");
  return detail::guarded(name, fed, monitor, [&]() -> RunRecord {
    x0.require_finite("x0");
    const std::size_t P = fed.workers();
    ParamVector x = x0;
    if (monitor.begin(x0, fed.ledger())) {
      fed.set_phase(name);
      ParamVector g(fed.dim());
      std::vector<Example> batch;
      for (std::size_t t = 1; t <= rounds; ++t) {
        std::vector<ParamVector> models;
        models.reserve(P);
        for (std::size_t p = 0; p < P; ++p) {
          WorkerOracle w = fed.worker(p);
          Rng r = rng.stream(Purpose::LocalSteps, 0, t, p);
          ParamVector y = x;
          for (std::size_t k = 0; k < params.K; ++k) {
            w.sample(r, params.b, batch);
            w.batch_grad(y, batch, g.span());
            y.axpy(-params.eta, g);
            divergence_guard(y, "local_sgd");
          }
          models.push_back(std::move(y));
        }
        x = fed.aggregate(models);
        fed.broadcast();
        fed.barrier("average");
        if (!monitor.after_round(x, fed.ledger())) break;
      }
    }
    return monitor.finish(name, x, x, fed.ledger());
  });
}

RunRecord scaffold(Federation& fed, const ParamVector& x0, const AlgoParams& params,
                   const RngTree& rng, Monitor& monitor, ScaffoldTrace* trace) {
  check_step(params.eta, params.K);
  if (params.b == 0) throw ConfigError("scaffold: b must be at least 1");
  const std::string name = "scaffold";
  const std::size_t rounds = round_limit(params.rounds, monitor, "scaffold");
  return detail::guarded(name, fed, monitor, [&]() -> RunRecord {
    x0.require_finite("x0");
    const std::size_t P = fed.workers();
    const std::size_t d = fed.dim();
    ParamVector x = x0;
    ParamVector c(d);
    std::vector<ParamVector> c_local(P, ParamVector(d));
    const double inv_k_eta = 1.0 / (static_cast<double>(params.K) * params.eta);
    if (monitor.begin(x0, fed.ledger())) {
      fed.set_phase(name);
      ParamVector g(d);
      std::vector<Example> batch;
      for (std::size_t t = 1; t <= rounds; ++t) {
        std::vector<ParamVector> models;
        models.reserve(P);
        for (std::size_t p = 0; p < P; ++p) {
          WorkerOracle w = fed.worker(p);
          Rng r = rng.stream(Purpose::LocalSteps, 0, t, p);
          // correction = c - c_p, fixed for the round
          const ParamVector correction = c - c_local[p];
          ParamVector y = x;
          for (std::size_t k = 0; k < params.K; ++k) {
            w.sample(r, params.b, batch);
            w.batch_grad(y, batch, g.span());
            g += correction;
            y.axpy(-params.eta, g);
            divergence_guard(y, "scaffold");
          }
          // option II: c_p <- c_p - c + (x - y) / (K eta)
          ParamVector drift = x - y;
          c_local[p] -= c;
          c_local[p].axpy(inv_k_eta, drift);
          models.push_back(std::move(y));
        }
        x = fed.aggregate(models);
        c = fed.aggregate(c_local);
        fed.broadcast(2);
        fed.barrier("average");
        if (trace) {
          trace->worker_controls.push_back(c_local);
          trace->server_controls.push_back(c);
        }
        if (!monitor.after_round(x, fed.ledger())) break;
      }
    }
    return monitor.finish(name, x, x, fed.ledger());
  });
}

const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names{"bvr_l_sgd",      "bvr_l_sgd_practical",
                                              "local_gd",       "minibatch_sgd",
                                              "minibatch_sarah", "local_sgd",
                                              "scaffold"};
  return names;
}

bool is_local_method(const std::string& name) {
  return name == "bvr_l_sgd" || name == "bvr_l_sgd_practical" || name == "local_gd" ||
         name == "local_sgd" || name == "scaffold";
}

RunRecord run_algorithm(const std::string& name, Federation& fed, const ParamVector& x0,
                        const AlgoParams& params, const RngTree& rng, Monitor& monitor) {
  if (name == "bvr_l_sgd") return bvr_l_sgd(fed, x0, params, rng, monitor);
  if (name == "bvr_l_sgd_practical") return bvr_l_sgd_practical(fed, x0, params, rng, monitor);
  if (name == "local_gd") return local_gd(fed, x0, params.eta, params.K, params.rounds, rng, monitor);
  if (name == "minibatch_sgd") return minibatch_sgd(fed, x0, params, rng, monitor);
  if (name == "minibatch_sarah") return minibatch_sarah(fed, x0, params, rng, monitor);
  if (name == "local_sgd") return local_sgd(fed, x0, params, rng, monitor);
  if (name == "scaffold") return scaffold(fed, x0, params, rng, monitor);
  throw ConfigError("unknown algorithm '" + name + "'");
}

}  // namespace fedsim
