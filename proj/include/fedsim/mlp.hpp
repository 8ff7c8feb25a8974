#pragma once
// One-hidden-layer softplus network with softmax cross-entropy and an
// l2/2 ||x||^2 penalty folded into every per-example loss.
//
// Flat parameter layout: W1^T (inputs x hidden), b1 (hidden),
// W2^T (hidden x classes), b2 (classes).

#include <memory>

#include "fedsim/classification.hpp"
#include "fedsim/problem.hpp"

namespace fedsim {

struct MlpShape {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return inputs * hidden; }
  std::size_t w2_offset() const { return b1_offset() + hidden; }
  std::size_t b2_offset() const { return w2_offset() + hidden * classes; }
  std::size_t num_params() const { return b2_offset() + classes; }
};

struct MlpSpec {
  std::size_t hidden = 32;
  double l2 = 5e-3;
};

// Validated model description; throws ConfigError for hidden == 0 or l2 < 0.
MlpSpec mlp_objective(std::size_t hidden, double l2 = 5e-3);

class MlpObjective final : public LocalObjective {
 public:
  MlpObjective(std::shared_ptr<const LabeledData> data, MlpShape shape, double l2);

  std::size_t dim() const override { return shape_.num_params(); }
  std::optional<std::size_t> support_size() const override { return data_->size(); }
  double loss(std::span<const double> x, Example z) const override;
  void grad(std::span<const double> x, Example z, std::span<double> out) const override;
  // Duplicate draws are collapsed into multiplicity weights.
  void batch_grad(std::span<const double> x, std::span<const Example> batch,
                  std::span<double> out) const override;
  double full_loss(std::span<const double> x) const override;
  double full_accuracy(std::span<const double> x) const override;
  Evaluation evaluate(std::span<const double> x) const override;
  Evaluation evaluate_with_grad(std::span<const double> x, std::span<double> grad) const override;

  const MlpShape& shape() const { return shape_; }
  double l2() const { return l2_; }

 private:
  struct Scratch;
  // Cross-entropy of one example (no penalty); fills activations in scratch.
  double forward(std::span<const double> x, std::size_t i, Scratch& s) const;
  // Adds weight * d(cross-entropy)/dx to out, using activations from forward().
  void backward(std::span<const double> x, std::size_t i, double weight, Scratch& s,
                std::span<double> out) const;
  void check_dim(std::span<const double> x) const;

  std::shared_ptr<const LabeledData> data_;
  MlpShape shape_;
  double l2_;
};

// Glorot-uniform weights per layer, zero biases.
ParamVector glorot_init(const MlpShape& shape, Rng& rng);

struct MlpProblemOptions {
  bool calibrate_smoothness = true;
  bool estimate_zeta = true;
  std::size_t calibration_probes = 64;
};

// Builds the federated problem (one MlpObjective per worker) plus the test set.
// meta.smoothness_L is an empirical calibration and meta.hetero_zeta a probe
// lower bound; neither is exact for softplus networks.
Problem make_mlp_problem(const ClassificationData& data, const MlpSpec& spec, std::uint64_t seed,
                         const MlpProblemOptions& opts = {});

// Largest observed ||grad(x, z) - grad(y, z)|| / ||x - y|| over random Glorot
// points, nearby perturbations and random examples, times a safety factor.
double calibrate_smoothness(const Problem& problem, const MlpShape& shape, std::size_t probes,
                            std::uint64_t seed, double safety = 2.0);

}  // namespace fedsim
