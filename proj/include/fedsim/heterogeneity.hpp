#pragma once
#include <functional>

#include "fedsim/problem.hpp"

namespace fedsim {

struct HeterogeneityOptions {
  double step = 1e-4;
  std::size_t power_iterations = 8;
  // Use the finite-difference path even when exact Hessians are available.
  bool force_probe = false;
  // Probe-point generator; defaults to standard normal coordinates.
  std::function<ParamVector(Rng&)> probe_point;
};

// Second-order heterogeneity max_{p,p'} ||H_p - H_p'||_2.
//
// Exact for objectives exposing their Hessian. Otherwise a lower bound: for
// each probe point x and worker pair, power iteration over unit directions u
// on the finite-difference operator
//   u -> (grad f_p(x + eps u) - grad f_p(x) - grad f_p'(x + eps u) + grad f_p'(x)) / eps.
// Returns 0 for a single worker.
double estimate_heterogeneity(const Problem& problem, std::size_t probes, std::uint64_t seed,
                              const HeterogeneityOptions& opts = {});

}  // namespace fedsim
