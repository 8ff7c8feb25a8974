#include "fedsim/problem.hpp"

#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/kernels.hpp"
#include "fedsim/reduce.hpp"

namespace fedsim {

void pairwise_mean(std::span<const std::span<const double>> inputs, std::span<double> out) {
  const std::size_t n = inputs.size();
  if (n == 0) throw ConfigError("pairwise_mean: no inputs");
  for (const auto& v : inputs)
    if (v.size() != out.size()) throw ConfigError("pairwise_mean: dimension mismatch");

  // Recursive tree sum; leaves copy, internal nodes add left + right.
  std::vector<double> scratch;
  auto sum_range = [&](auto&& self, std::size_t lo, std::size_t hi, std::span<double> dst) -> void {
    if (hi - lo == 1) {
      std::copy(inputs[lo].begin(), inputs[lo].end(), dst.begin());
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    std::vector<double> right(dst.size());
    self(self, lo, mid, dst);
    self(self, mid, hi, right);
    kernels::add(dst, right, dst);
  };
  sum_range(sum_range, 0, n, out);
  const double denom = static_cast<double>(n);
  for (double& v : out) v = v / denom;
}

std::vector<double> pairwise_mean(const std::vector<std::vector<double>>& inputs) {
  if (inputs.empty()) throw ConfigError("pairwise_mean: no inputs");
  std::vector<std::span<const double>> views(inputs.begin(), inputs.end());
  std::vector<double> out(inputs.front().size());
  pairwise_mean(views, out);
  return out;
}

void LocalObjective::sample(Rng& rng, std::size_t count, std::vector<Example>& out) const {
  out.resize(count);
  if (auto n = support_size()) {
    for (auto& z : out) z.id = rng.below(*n);
  } else {
    for (auto& z : out) z.id = rng.next();
  }
}

void LocalObjective::batch_grad(std::span<const double> x, std::span<const Example> batch,
                                std::span<double> out) const {
  if (batch.empty()) throw ConfigError("batch_grad: empty batch");
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> g(dim());
  for (Example z : batch) {
    grad(x, z, g);
    kernels::add(out, g, out);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  kernels::scale(inv, out, out);
}

std::size_t LocalObjective::require_finite_support(const char* what) const {
  auto n = support_size();
  if (!n) throw ConfigError(std::string(what) + " requires a finite support");
  return *n;
}

void LocalObjective::full_grad(std::span<const double> x, std::span<double> out) const {
  const std::size_t n = require_finite_support("full_grad");
  std::vector<Example> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i].id = i;
  batch_grad(x, all, out);
}

double LocalObjective::full_loss(std::span<const double> x) const {
  const std::size_t n = require_finite_support("full_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += loss(x, Example{i});
  return s / static_cast<double>(n);
}

double LocalObjective::full_accuracy(std::span<const double>) const {
  return std::numeric_limits<double>::quiet_NaN();
}

Evaluation LocalObjective::evaluate(std::span<const double> x) const {
  return {full_loss(x), full_accuracy(x)};
}

Evaluation LocalObjective::evaluate_with_grad(std::span<const double> x,
                                              std::span<double> grad) const {
  full_grad(x, grad);
  return evaluate(x);
}

std::optional<double> Problem::mean_support() const {
  if (!finite_support()) return std::nullopt;
  double s = 0.0;
  for (const auto& l : locals) s += static_cast<double>(*l->support_size());
  return s / static_cast<double>(locals.size());
}

ParamVector Problem::global_grad(const ParamVector& x) const {
  std::vector<std::vector<double>> grads(workers(), std::vector<double>(dim()));
  for (std::size_t p = 0; p < workers(); ++p) local(p).full_grad(x.span(), grads[p]);
  return ParamVector(pairwise_mean(grads));
}

double Problem::global_loss(const ParamVector& x) const {
  double s = 0.0;
  for (const auto& l : locals) s += l->full_loss(x.span());
  return s / static_cast<double>(workers());
}

double Problem::global_accuracy(const ParamVector& x) const {
  double s = 0.0;
  for (const auto& l : locals) s += l->full_accuracy(x.span());
  return s / static_cast<double>(workers());
}

Evaluation Problem::global_evaluate_with_grad(const ParamVector& x, ParamVector& grad) const {
  std::vector<std::vector<double>> grads(workers(), std::vector<double>(dim()));
  Evaluation out{0.0, 0.0};
  for (std::size_t p = 0; p < workers(); ++p) {
    const Evaluation e = local(p).evaluate_with_grad(x.span(), grads[p]);
    out.loss += e.loss;
    out.accuracy += e.accuracy;
  }
  out.loss /= static_cast<double>(workers());
  out.accuracy /= static_cast<double>(workers());
  grad = ParamVector(pairwise_mean(grads));
  return out;
}

Evaluation Problem::global_evaluate(const ParamVector& x) const {
  Evaluation out{0.0, 0.0};
  for (const auto& l : locals) {
    const Evaluation e = l->evaluate(x.span());
    out.loss += e.loss;
    out.accuracy += e.accuracy;
  }
  out.loss /= static_cast<double>(workers());
  out.accuracy /= static_cast<double>(workers());
  return out;
}

}  // namespace fedsim
