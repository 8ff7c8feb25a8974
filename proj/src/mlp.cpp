#include "fedsim/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/heterogeneity.hpp"
#include "fedsim/kernels.hpp"

namespace fedsim {

struct MlpObjective::Scratch {
  std::vector<double> hidden_pre, hidden, sig, logits, probs, dlogits, dhidden;
  explicit Scratch(const MlpShape& s)
      : hidden_pre(s.hidden), hidden(s.hidden), sig(s.hidden), logits(s.classes),
        probs(s.classes), dlogits(s.classes), dhidden(s.hidden) {}
};

MlpSpec mlp_objective(std::size_t hidden, double l2) {
  if (hidden == 0) throw ConfigError("mlp: hidden must be at least 1");
  if (!(l2 >= 0.0)) throw ConfigError("mlp: l2 must be non-negative");
  return MlpSpec{hidden, l2};
}

MlpObjective::MlpObjective(std::shared_ptr<const LabeledData> data, MlpShape shape, double l2)
    : data_(std::move(data)), shape_(shape), l2_(l2) {
  if (data_->dim != shape_.inputs)
    throw ConfigError("mlp: data has " + std::to_string(data_->dim) +
                      " features but the network expects " + std::to_string(shape_.inputs));
  for (auto label : data_->labels)
    if (label < 0 || static_cast<std::size_t>(label) >= shape_.classes)
      throw ConfigError("mlp: label out of range");
}

void MlpObjective::check_dim(std::span<const double> x) const {
  if (x.size() != dim()) throw ConfigError("mlp: parameter vector has wrong dimension");
}

double MlpObjective::forward(std::span<const double> x, std::size_t i, Scratch& s) const {
  const auto& k = kernels::active();
  const double* w = x.data();
  const std::size_t H = shape_.hidden, C = shape_.classes;

  std::copy_n(w + shape_.b1_offset(), H, s.hidden_pre.begin());
  k.gemv_acc(w + shape_.w1_offset(), shape_.inputs, H, data_->row(i), s.hidden_pre.data());
  k.softplus_sigmoid(s.hidden_pre.data(), s.hidden.data(), s.sig.data(), H);
  std::copy_n(w + shape_.b2_offset(), C, s.logits.begin());
  k.gemv_acc(w + shape_.w2_offset(), H, C, s.hidden.data(), s.logits.data());

  const double zmax = *std::max_element(s.logits.begin(), s.logits.end());
  double z = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    s.probs[c] = std::exp(s.logits[c] - zmax);
    z += s.probs[c];
  }
  for (double& p : s.probs) p /= z;
  const auto label = static_cast<std::size_t>(data_->labels[i]);
  return zmax + std::log(z) - s.logits[label];
}

void MlpObjective::backward(std::span<const double> x, std::size_t i, double weight, Scratch& s,
                            std::span<double> out) const {
  const auto& k = kernels::active();
  const std::size_t H = shape_.hidden, C = shape_.classes;
  const auto label = static_cast<std::size_t>(data_->labels[i]);
  for (std::size_t c = 0; c < C; ++c) s.dlogits[c] = weight * s.probs[c];
  s.dlogits[label] -= weight;

  double* g = out.data();
  k.add(g + shape_.b2_offset(), s.dlogits.data(), g + shape_.b2_offset(), C);
  k.ger_acc(s.hidden.data(), H, s.dlogits.data(), C, g + shape_.w2_offset());
  k.gemv_dot(x.data() + shape_.w2_offset(), H, C, s.dlogits.data(), s.dhidden.data());
  for (std::size_t j = 0; j < H; ++j) s.dhidden[j] *= s.sig[j];
  k.add(g + shape_.b1_offset(), s.dhidden.data(), g + shape_.b1_offset(), H);
  k.ger_acc(data_->row(i), shape_.inputs, s.dhidden.data(), H, g + shape_.w1_offset());
}

double MlpObjective::loss(std::span<const double> x, Example z) const {
  check_dim(x);
  Scratch s(shape_);
  return forward(x, static_cast<std::size_t>(z.id), s) + 0.5 * l2_ * kernels::sum_sq(x);
}

void MlpObjective::grad(std::span<const double> x, Example z, std::span<double> out) const {
  const Example one[1] = {z};
  batch_grad(x, one, out);
}

void MlpObjective::batch_grad(std::span<const double> x, std::span<const Example> batch,
                              std::span<double> out) const {
  check_dim(x);
  if (batch.empty()) throw ConfigError("batch_grad: empty batch");
  std::vector<std::uint64_t> ids(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ids[i] = batch[i].id;
  std::sort(ids.begin(), ids.end());

  std::fill(out.begin(), out.end(), 0.0);
  Scratch s(shape_);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < ids.size();) {
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    const auto idx = static_cast<std::size_t>(ids[i]);
    forward(x, idx, s);
    backward(x, idx, static_cast<double>(j - i) * inv, s, out);
    i = j;
  }
  if (l2_ != 0.0) kernels::axpy(l2_, x, out);
}

Evaluation MlpObjective::evaluate(std::span<const double> x) const {
  check_dim(x);
  Scratch s(shape_);
  double ce = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data_->size(); ++i) {
    ce += forward(x, i, s);
    const auto pred = static_cast<std::size_t>(
        std::max_element(s.logits.begin(), s.logits.end()) - s.logits.begin());
    if (pred == static_cast<std::size_t>(data_->labels[i])) ++correct;
  }
  const auto n = static_cast<double>(data_->size());
  return {ce / n + 0.5 * l2_ * kernels::sum_sq(x), static_cast<double>(correct) / n};
}

// Same visiting order and weights as batch_grad over the whole support.
Evaluation MlpObjective::evaluate_with_grad(std::span<const double> x,
                                           std::span<double> grad) const {
  check_dim(x);
  if (data_->size() == 0) throw ConfigError("mlp: empty dataset");
  Scratch s(shape_);
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto n = static_cast<double>(data_->size());
  const double inv = 1.0 / n;
  double ce = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data_->size(); ++i) {
    ce += forward(x, i, s);
    const auto pred = static_cast<std::size_t>(
        std::max_element(s.logits.begin(), s.logits.end()) - s.logits.begin());
    if (pred == static_cast<std::size_t>(data_->labels[i])) ++correct;
    backward(x, i, inv, s, grad);
  }
  if (l2_ != 0.0) kernels::axpy(l2_, x, grad);
  return {ce / n + 0.5 * l2_ * kernels::sum_sq(x), static_cast<double>(correct) / n};
}

double MlpObjective::full_loss(std::span<const double> x) const { return evaluate(x).loss; }
double MlpObjective::full_accuracy(std::span<const double> x) const { return evaluate(x).accuracy; }

ParamVector glorot_init(const MlpShape& shape, Rng& rng) {
  ParamVector x(shape.num_params());
  const double a1 = std::sqrt(6.0 / static_cast<double>(shape.inputs + shape.hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(shape.hidden + shape.classes));
  for (std::size_t i = 0; i < shape.inputs * shape.hidden; ++i)
    x[shape.w1_offset() + i] = rng.uniform(-a1, a1);
  for (std::size_t i = 0; i < shape.hidden * shape.classes; ++i)
    x[shape.w2_offset() + i] = rng.uniform(-a2, a2);
  return x;
}

double calibrate_smoothness(const Problem& problem, const MlpShape& shape, std::size_t probes,
                            std::uint64_t seed, double safety) {
  Rng rng = RngTree(seed).stream(Purpose::Probe, 0xCA1);
  const std::size_t d = shape.num_params();
  std::vector<double> gx(d), gy(d);
  double best = 0.0;
  for (std::size_t t = 0; t < probes; ++t) {
    const ParamVector x = glorot_init(shape, rng);
    ParamVector y = x;
    const double radius = 0.5 * rng.uniform();
    std::vector<double> dir(d);
    double n2 = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      n2 += v * v;
    }
    for (std::size_t i = 0; i < d; ++i) y[i] += radius * dir[i] / std::sqrt(n2);
    const std::size_t p = rng.below(problem.workers());
    const auto& local = problem.local(p);
    const Example z{rng.below(*local.support_size())};
    local.grad(x.span(), z, gx);
    local.grad(y.span(), z, gy);
    double diff = 0.0;
    for (std::size_t i = 0; i < d; ++i) diff += (gx[i] - gy[i]) * (gx[i] - gy[i]);
    best = std::max(best, std::sqrt(diff) / distance(x, y));
  }
  return safety * best;
}

Problem make_mlp_problem(const ClassificationData& data, const MlpSpec& spec, std::uint64_t seed,
                         const MlpProblemOptions& opts) {
  mlp_objective(spec.hidden, spec.l2);
  const MlpShape shape{data.config.feature_dim, spec.hidden, data.config.num_classes};
  Problem prob;
  prob.meta.kind = "mlp";
  prob.meta.P = data.workers.size();
  prob.meta.d = shape.num_params();
  prob.meta.n_total = data.counts.per_worker * data.workers.size();
  prob.meta.discarded = data.discarded;
  for (const auto& w : data.workers)
    prob.locals.push_back(
        std::make_shared<MlpObjective>(std::make_shared<const LabeledData>(w), shape, spec.l2));
  prob.test =
      std::make_shared<MlpObjective>(std::make_shared<const LabeledData>(data.test), shape, spec.l2);

  if (opts.calibrate_smoothness)
    prob.meta.smoothness_L = calibrate_smoothness(prob, shape, opts.calibration_probes, seed);
  if (opts.estimate_zeta) {
    HeterogeneityOptions h;
    h.probe_point = [shape](Rng& rng) { return glorot_init(shape, rng); };
    prob.meta.hetero_zeta = estimate_heterogeneity(prob, 1, seed, h);
  }
  prob.meta.zeta_exact = false;
  return prob;
}

}  // namespace fedsim
