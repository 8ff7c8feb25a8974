#pragma once
// Local objectives f_p(x) = E_{z ~ D_p} l(x, z) and the federated problem
// f = (1/P) sum_p f_p built from them.

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// One example drawn from D_p. For finite supports `id` indexes the local
// dataset; for online supports it is a key the oracle expands into a sample.
struct Example {
  std::uint64_t id = 0;
  friend bool operator==(Example, Example) = default;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

class LocalObjective {
 public:
  virtual ~LocalObjective() = default;

  virtual std::size_t dim() const = 0;
  // nullopt when the support is infinite (online sampling).
  virtual std::optional<std::size_t> support_size() const = 0;

  // IID draws with replacement.
  virtual void sample(Rng& rng, std::size_t count, std::vector<Example>& out) const;

  virtual double loss(std::span<const double> x, Example z) const = 0;
  virtual void grad(std::span<const double> x, Example z, std::span<double> out) const = 0;
  // out = (1/|batch|) sum_z grad(x, z)
  virtual void batch_grad(std::span<const double> x, std::span<const Example> batch,
                          std::span<double> out) const;
  // Gradient of f_p; finite support only.
  virtual void full_grad(std::span<const double> x, std::span<double> out) const;
  virtual double full_loss(std::span<const double> x) const;
  // Classification accuracy over the local dataset, NaN when not applicable.
  virtual double full_accuracy(std::span<const double> x) const;
  // Loss and accuracy over the local dataset in one pass.
  virtual Evaluation evaluate(std::span<const double> x) const;
  // evaluate() plus full_grad() into `grad`; overrides may share the forward pass
  // but must return the same values as the separate calls.
  virtual Evaluation evaluate_with_grad(std::span<const double> x, std::span<double> grad) const;
  // Exact Hessian for quadratic objectives, nullptr otherwise.
  virtual const Eigen::MatrixXd* hessian() const { return nullptr; }

 protected:
  std::size_t require_finite_support(const char* what) const;
};

struct ProblemMeta {
  std::string kind;
  std::size_t P = 0;
  std::size_t d = 0;
  double smoothness_L = 0.0;
  double hetero_zeta = 0.0;
  bool zeta_exact = false;
  std::optional<double> grad_variance_sigma2;
  // nullopt = online (infinite) supports
  std::optional<std::size_t> n_total;
  std::optional<ParamVector> optimum;
  std::optional<double> optimum_value;
  std::size_t discarded = 0;
};

struct Problem {
  ProblemMeta meta;
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  // Held-out evaluation set, null for problems without one.
  std::shared_ptr<const LocalObjective> test;

  std::size_t workers() const { return locals.size(); }
  std::size_t dim() const { return meta.d; }
  const LocalObjective& local(std::size_t p) const { return *locals.at(p); }
  bool finite_support() const { return meta.n_total.has_value(); }
  // (1/P) sum_p #supp(D_p), or nullopt for online problems.
  std::optional<double> mean_support() const;

  // Tree-averaged full local gradients.
  ParamVector global_grad(const ParamVector& x) const;
  double global_loss(const ParamVector& x) const;
  double global_accuracy(const ParamVector& x) const;
  Evaluation global_evaluate(const ParamVector& x) const;
  // global_evaluate() and global_grad() together.
  Evaluation global_evaluate_with_grad(const ParamVector& x, ParamVector& grad) const;
};

}  // namespace fedsim
