#pragma once
// Deterministic random streams. A root seed plus a (purpose, stage, round,
// worker) key names an independent stream, so every random draw in a run can
// be reproduced in isolation and two algorithms can be coupled by reading the
// same keys.

#include <cstddef>
#include <cstdint>
#include <random>

namespace fedsim {

enum class Purpose : std::uint32_t {
  Init = 1,
  Data,
  Probe,
  Snapshot,       // per-worker snapshot batch
  InnerBatch,     // per-worker Kb batches feeding the aggregated estimator
  Routine,        // batches inside the local routine
  RoutineSelect,  // k-hat inside the local routine
  SelectWorker,   // coordinator: p-hat
  SelectRound,    // coordinator: t-hat
  SelectStage,    // coordinator: s-hat
  SelectStep,     // coordinator: shared k-hat for averaging methods
  LocalSteps,     // batches of the averaging baselines
  Repeat,
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t mix_key(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0, std::uint64_t d = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), Lemire's multiply-and-reject method.
  std::size_t below(std::size_t n);
  // Standard normal via Box-Muller; platform independent.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

class RngTree {
 public:
  explicit RngTree(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }
  Rng stream(Purpose purpose, std::uint64_t stage = 0, std::uint64_t round = 0,
             std::uint64_t worker = 0) const {
    return Rng(mix_key(root_, static_cast<std::uint64_t>(purpose), stage, round, worker));
  }
  RngTree child(std::uint64_t tag) const { return RngTree(mix_key(root_, 0xC41D, tag)); }

 private:
  std::uint64_t root_;
};

// Uniform pick in [0, universe). Consumes only the given selector stream.
std::size_t pick_uniform(std::size_t universe, Rng& selector);

}  // namespace fedsim
