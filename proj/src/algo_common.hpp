#pragma once
#include <string>
#include <vector>

#include "fedsim/algorithms.hpp"
#include "fedsim/errors.hpp"

namespace fedsim::detail {

template <typename Body>
RunRecord guarded(const std::string& name, Federation& fed, Monitor& monitor, Body&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    return monitor.diverged(name, e.what(), fed.ledger());
  }
}

// Per-worker snapshot gradients at x: the full local gradient when b_tilde
// reaches the mean local support size, otherwise a b_tilde-sample average.
std::vector<ParamVector> snapshot_gradients(Federation& fed, const ParamVector& x,
                                            std::size_t b_tilde, std::size_t stage,
                                            const RngTree& rng);

// v[p] <- g^(p)(x_prev) - g^(p)(x_prev2) + v[p], one shared batch of size
// `batch` per worker drawn from (InnerBatch, stage, round, p).
void advance_estimators(Federation& fed, const ParamVector& x_prev, const ParamVector& x_prev2,
                        std::size_t batch, std::size_t stage, std::size_t round,
                        const RngTree& rng, std::vector<ParamVector>& v);

}  // namespace fedsim::detail
