#include "fedsim/quadratic.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/kernels.hpp"

namespace fedsim {
namespace {

Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Eigen::MatrixXd random_orthogonal(Rng& rng, Eigen::Index d) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(rng, d, d));
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

Eigen::MatrixXd unit_norm_symmetric(Rng& rng, Eigen::Index d) {
  Eigen::MatrixXd g = gaussian_matrix(rng, d, d);
  Eigen::MatrixXd r = 0.5 * (g + g.transpose());
  return r / spectral_norm_sym(r);
}

}  // namespace

double spectral_norm_sym(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

QuadraticObjective::QuadraticObjective(Eigen::MatrixXd hessian, Eigen::VectorXd linear,
                                       Eigen::MatrixXd shifts, double online_sigma2,
                                       std::uint64_t online_salt)
    : hessian_(std::move(hessian)),
      linear_(std::move(linear)),
      shifts_(std::move(shifts)),
      online_sigma2_(online_sigma2),
      online_salt_(online_salt) {
  const auto d = linear_.size();
  hessian_rows_.resize(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) hessian_rows_[i * d + j] = hessian_(i, j);
}

std::optional<std::size_t> QuadraticObjective::support_size() const {
  if (shifts_.rows() == 0) return std::nullopt;
  return static_cast<std::size_t>(shifts_.rows());
}

void QuadraticObjective::exact_grad(std::span<const double> x, std::span<double> out) const {
  const std::size_t d = dim();
  kernels::active().gemv_dot(hessian_rows_.data(), d, d, x.data(), out.data());
  for (std::size_t i = 0; i < d; ++i) out[i] -= linear_[i];
}

void QuadraticObjective::shift_of(Example z, std::span<double> out) const {
  const std::size_t d = dim();
  if (shifts_.rows() > 0) {
    for (std::size_t i = 0; i < d; ++i) out[i] = shifts_(static_cast<Eigen::Index>(z.id), i);
    return;
  }
  Rng rng(mix_key(online_salt_, z.id));
  const double s = std::sqrt(online_sigma2_ / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) out[i] = s * rng.normal();
}

double QuadraticObjective::loss(std::span<const double> x, Example z) const {
  std::vector<double> shift(dim());
  shift_of(z, shift);
  const std::size_t d = dim();
  std::vector<double> ax(d);
  kernels::active().gemv_dot(hessian_rows_.data(), d, d, x.data(), ax.data());
  double v = 0.5 * kernels::dot(x, ax);
  for (std::size_t i = 0; i < d; ++i) v -= (linear_[i] + shift[i]) * x[i];
  return v;
}

void QuadraticObjective::grad(std::span<const double> x, Example z, std::span<double> out) const {
  exact_grad(x, out);
  std::vector<double> shift(dim());
  shift_of(z, shift);
  kernels::sub(out, shift, out);
}

void QuadraticObjective::batch_grad(std::span<const double> x, std::span<const Example> batch,
                                    std::span<double> out) const {
  if (batch.empty()) throw ConfigError("batch_grad: empty batch");
  const std::size_t d = dim();
  std::vector<double> mean_shift(d, 0.0), shift(d);
  for (Example z : batch) {
    shift_of(z, shift);
    kernels::add(mean_shift, shift, mean_shift);
  }
  kernels::scale(1.0 / static_cast<double>(batch.size()), mean_shift, mean_shift);
  exact_grad(x, out);
  kernels::sub(out, mean_shift, out);
}

void QuadraticObjective::full_grad(std::span<const double> x, std::span<double> out) const {
  require_finite_support("full_grad");
  exact_grad(x, out);
}

double QuadraticObjective::full_loss(std::span<const double> x) const {
  require_finite_support("full_loss");
  const std::size_t d = dim();
  std::vector<double> ax(d);
  kernels::active().gemv_dot(hessian_rows_.data(), d, d, x.data(), ax.data());
  double v = 0.5 * kernels::dot(x, ax);
  for (std::size_t i = 0; i < d; ++i) v -= linear_[i] * x[i];
  return v;
}

Problem gen_quadratic_family(const QuadraticSpec& spec, std::uint64_t seed) {
  if (spec.P == 0 || spec.d == 0) throw ConfigError("quadratic: P and d must be positive");
  if (!(spec.L > 0.0)) throw ConfigError("quadratic: L must be positive");
  if (spec.zeta < 0.0 || spec.zeta > 2.0 * spec.L)
    throw ConfigError("quadratic: zeta must lie in [0, 2L]");
  if (!(spec.mu > 0.0) || spec.mu > spec.L)
    throw ConfigError("quadratic: mu must lie in (0, L]; the mean Hessian must be positive definite");
  const double top = spec.L - 0.5 * spec.zeta;
  if (spec.mu > top)
    throw ConfigError("quadratic: mu exceeds L - zeta/2; no positive definite mean Hessian fits");
  if (spec.sigma2 < 0.0) throw ConfigError("quadratic: sigma2 must be non-negative");
  if (spec.samples_per_worker == 1 && spec.sigma2 > 0.0)
    throw ConfigError("quadratic: a single sample per worker cannot carry positive variance");

  const auto d = static_cast<Eigen::Index>(spec.d);
  const RngTree tree(seed);
  Rng rng = tree.stream(Purpose::Data);

  Eigen::VectorXd spectrum(d);
  for (Eigen::Index i = 0; i < d; ++i) spectrum[i] = rng.uniform(spec.mu, top);
  spectrum[0] = spec.mu;
  if (d > 1) spectrum[d - 1] = top;
  const Eigen::MatrixXd q = random_orthogonal(rng, d);
  Eigen::MatrixXd base = q * spectrum.asDiagonal() * q.transpose();
  base = (0.5 * (base + base.transpose())).eval();

  Eigen::VectorXd b_mean(d);
  for (Eigen::Index i = 0; i < d; ++i) b_mean[i] = rng.normal();

  std::vector<Eigen::MatrixXd> hessians(spec.P, base);
  for (std::size_t p = 0; p + 1 < spec.P; p += 2) {
    const Eigen::MatrixXd r = unit_norm_symmetric(rng, d);
    hessians[p] = base + (0.5 * spec.zeta) * r;
    hessians[p + 1] = base - (0.5 * spec.zeta) * r;
  }

  std::vector<Eigen::VectorXd> linears(spec.P, b_mean);
  if (spec.linear_hetero > 0.0) {
    // Centred offsets keep the mean linear term equal to b_mean.
    std::vector<Eigen::VectorXd> offsets(spec.P, Eigen::VectorXd(d));
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(d);
    for (auto& o : offsets) {
      for (Eigen::Index i = 0; i < d; ++i) o[i] = spec.linear_hetero * rng.normal();
      avg += o;
    }
    avg /= static_cast<double>(spec.P);
    for (std::size_t p = 0; p < spec.P; ++p) linears[p] = b_mean + offsets[p] - avg;
  }

  Problem prob;
  prob.meta.kind = "quadratic";
  prob.meta.P = spec.P;
  prob.meta.d = spec.d;
  prob.meta.grad_variance_sigma2 = spec.sigma2;

  const auto m = static_cast<Eigen::Index>(spec.samples_per_worker);
  for (std::size_t p = 0; p < spec.P; ++p) {
    Eigen::MatrixXd shifts;
    if (m > 0) {
      shifts = gaussian_matrix(rng, m, d);
      const Eigen::RowVectorXd mean = shifts.colwise().mean();
      shifts.rowwise() -= mean;
      const double var = shifts.squaredNorm() / static_cast<double>(m);
      shifts *= (spec.sigma2 > 0.0 && var > 0.0) ? std::sqrt(spec.sigma2 / var) : 0.0;
    }
    prob.locals.push_back(std::make_shared<QuadraticObjective>(
        hessians[p], linears[p], std::move(shifts), spec.sigma2, mix_key(seed, 0x51, p)));
  }

  double L_meas = 0.0;
  for (const auto& h : hessians) L_meas = std::max(L_meas, spectral_norm_sym(h));
  double zeta_meas = 0.0;
  for (std::size_t p = 0; p < spec.P; ++p)
    for (std::size_t r = p + 1; r < spec.P; ++r)
      zeta_meas = std::max(zeta_meas, spectral_norm_sym(hessians[p] - hessians[r]));
  prob.meta.smoothness_L = L_meas;
  prob.meta.hetero_zeta = zeta_meas;
  prob.meta.zeta_exact = true;
  if (m > 0) prob.meta.n_total = spec.P * spec.samples_per_worker;

  Eigen::MatrixXd h_mean = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b_avg = Eigen::VectorXd::Zero(d);
  for (std::size_t p = 0; p < spec.P; ++p) {
    h_mean += hessians[p];
    b_avg += linears[p];
  }
  h_mean /= static_cast<double>(spec.P);
  b_avg /= static_cast<double>(spec.P);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h_mean, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw ConfigError("quadratic: mean Hessian is not positive definite");
  const Eigen::VectorXd x_star = h_mean.ldlt().solve(b_avg);
  prob.meta.optimum = ParamVector(std::vector<double>(x_star.data(), x_star.data() + d));
  prob.meta.optimum_value = 0.5 * x_star.dot(h_mean * x_star) - b_avg.dot(x_star);
  return prob;
}

}  // namespace fedsim
