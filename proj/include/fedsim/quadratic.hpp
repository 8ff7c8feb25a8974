#pragma once
// Quadratic local objectives f_p(x) = 1/2 x^T A_p x - b_p^T x with an exactly
// controlled second-order heterogeneity max_{p,p'} ||A_p - A_p'||_2 = zeta.
//
// Each local dataset holds examples l(x, z_i) = 1/2 x^T A_p x - (b_p + xi_i)^T x
// where the shifts xi_i are centred and scaled so that the per-example gradient
// variance equals sigma2 exactly. All examples share the Hessian A_p, so the
// per-example smoothness constant is ||A_p||_2.

#include <cstdint>

#include "fedsim/problem.hpp"

namespace fedsim {

struct QuadraticSpec {
  std::size_t P = 10;
  std::size_t d = 20;
  double zeta = 0.0;
  double L = 1.0;
  double mu = 0.1;
  double sigma2 = 1.0;
  // 0 selects online sampling (infinite support).
  std::size_t samples_per_worker = 100;
  // Spread of the per-worker linear terms b_p around their mean.
  double linear_hetero = 0.0;
};

class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(Eigen::MatrixXd hessian, Eigen::VectorXd linear, Eigen::MatrixXd shifts,
                     double online_sigma2, std::uint64_t online_salt);

  std::size_t dim() const override { return static_cast<std::size_t>(linear_.size()); }
  std::optional<std::size_t> support_size() const override;
  double loss(std::span<const double> x, Example z) const override;
  void grad(std::span<const double> x, Example z, std::span<double> out) const override;
  void batch_grad(std::span<const double> x, std::span<const Example> batch,
                  std::span<double> out) const override;
  void full_grad(std::span<const double> x, std::span<double> out) const override;
  double full_loss(std::span<const double> x) const override;
  const Eigen::MatrixXd* hessian() const override { return &hessian_; }

  const Eigen::VectorXd& linear() const { return linear_; }

 private:
  // out = A x - b
  void exact_grad(std::span<const double> x, std::span<double> out) const;
  void shift_of(Example z, std::span<double> out) const;

  Eigen::MatrixXd hessian_;
  std::vector<double> hessian_rows_;  // row-major copy for the kernels
  Eigen::VectorXd linear_;
  Eigen::MatrixXd shifts_;  // samples x d; empty for online objectives
  double online_sigma2_;
  std::uint64_t online_salt_;
};

// Throws ConfigError when zeta is outside [0, 2L], mu outside (0, L], or the
// base spectrum [mu, L - zeta/2] is empty (the mean Hessian would not be
// positive definite within the L-smooth envelope).
Problem gen_quadratic_family(const QuadraticSpec& spec, std::uint64_t seed);

// Largest absolute eigenvalue of a symmetric matrix.
double spectral_norm_sym(const Eigen::MatrixXd& m);

}  // namespace fedsim
