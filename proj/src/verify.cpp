#include "fedsim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "algo_common.hpp"
#include "fedsim/classification.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/quadratic.hpp"

namespace fedsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParamVector normal_point(Rng& rng, std::size_t d, double scale = 1.0) {
  ParamVector x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = scale * rng.normal();
  return x;
}

ParamVector local_full_grad(const Problem& problem, std::size_t p, const ParamVector& x) {
  ParamVector g(problem.dim());
  problem.local(p).full_grad(x.span(), g.span());
  return g;
}

bool exact_hessians(const Problem& problem) {
  for (const auto& l : problem.locals)
    if (!l->hessian()) return false;
  return true;
}

FederationConfig plain_federation(const Problem& problem, std::uint64_t seed) {
  FederationConfig cfg;
  cfg.P = problem.workers();
  cfg.budget_B = 1;
  cfg.enforce = BudgetMode::Off;
  cfg.seed = seed;
  return cfg;
}

CheckStatus status_of(bool ok) { return ok ? CheckStatus::Pass : CheckStatus::Fail; }

// ||(grad f_p - grad f_p')(x) - (grad f_p - grad f_p')(y)||^2
double pairwise_lhs(const Problem& problem, std::size_t p, std::size_t q, const ParamVector& x,
                    const ParamVector& y) {
  ParamVector v = local_full_grad(problem, p, x) - local_full_grad(problem, p, y);
  v += local_full_grad(problem, q, y);
  v -= local_full_grad(problem, q, x);
  return v.norm2();
}

double averaged_lhs(const Problem& problem, std::size_t p, const ParamVector& x,
                    const ParamVector& y) {
  ParamVector v = local_full_grad(problem, p, x) - local_full_grad(problem, p, y);
  v += problem.global_grad(y);
  v -= problem.global_grad(x);
  return v.norm2();
}

// Worker 0 deviates from the rest by zeta u u^T; ||A_0 - mean A|| = zeta (P-1)/P.
Problem outlier_family(std::size_t P, std::size_t d, double zeta, Rng& rng, Eigen::VectorXd& u) {
  u = Eigen::VectorXd(d);
  for (std::size_t i = 0; i < d; ++i) u[i] = rng.normal();
  u.normalize();
  const Eigen::MatrixXd base = Eigen::MatrixXd::Identity(d, d) * 0.5;
  Problem prob;
  prob.meta.kind = "quadratic";
  prob.meta.P = P;
  prob.meta.d = d;
  prob.meta.n_total = P;
  for (std::size_t p = 0; p < P; ++p) {
    Eigen::MatrixXd h = base;
    if (p == 0) h += zeta * u * u.transpose();
    prob.locals.push_back(std::make_shared<QuadraticObjective>(
        h, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(1, d), 0.0, p));
  }
  prob.meta.hetero_zeta = zeta;
  prob.meta.zeta_exact = true;
  return prob;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe snapshot_error(const Problem& problem, const ParamVector& x, const ParamVector& g,
                      std::size_t b_tilde, std::size_t reps, std::uint64_t stream_seed) {
  Federation fed(problem, plain_federation(problem, stream_seed));
  const RngTree tree(stream_seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto grads = detail::snapshot_gradients(fed, x, b_tilde, r + 1, tree);
    const double e = distance(aggregate(grads), g);
    const double e2 = e * e;
    sum += e2;
    sum_sq += e2 * e2;
  }
  const double n = static_cast<double>(reps);
  MeanSe out;
  out.mean = sum / n;
  const double var = reps > 1 ? std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1)) : 0.0;
  out.se = std::sqrt(var / n);
  return out;
}

const MlpObjective* as_mlp(const Problem& problem) {
  return dynamic_cast<const MlpObjective*>(&problem.local(0));
}

ParamVector probe_point(const Problem& problem, Rng& rng) {
  if (const auto* mlp = as_mlp(problem)) {
    ParamVector x = glorot_init(mlp->shape(), rng);
    // Non-zero biases so every parameter block is exercised.
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.05 * rng.normal();
    return x;
  }
  return normal_point(rng, problem.dim());
}

}  // namespace

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Skipped: return "skipped";
  }
  return "skipped";
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["status"] = to_string(status);
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v));
  };
  j["measured"] = nlohmann::json::object();
  for (const auto& [k, v] : measured) j["measured"][k] = num(v);
  j["bound"] = nlohmann::json::object();
  for (const auto& [k, v] : bound) j["bound"][k] = num(v);
  j["samples"] = samples;
  j["seed"] = seed;
  j["notes"] = notes;
  j["constant_calibrated"] = constant_calibrated;
  return j;
}

CheckReport check_bias_bound(const Problem& problem, std::size_t trials, std::uint64_t seed,
                             std::optional<double> zeta_claim) {
  CheckReport rep;
  rep.name = "bias_bound";
  rep.seed = seed;
  rep.samples = trials;
  if (!exact_hessians(problem) || !problem.meta.zeta_exact || !problem.finite_support()) {
    rep.status = CheckStatus::Skipped;
    rep.notes.push_back("needs a quadratic family with exact zeta and finite supports");
    return rep;
  }
  const double zeta_exact = problem.meta.hetero_zeta;
  const double zeta = zeta_claim.value_or(zeta_exact);
  const double tol = 1e-9;
  const std::size_t P = problem.workers(), d = problem.dim();
  Rng rng = RngTree(seed).stream(Purpose::Probe);

  std::size_t violations = 0;
  double max_ratio = 0.0, max_lhs = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t p = rng.below(P);
    const ParamVector x = normal_point(rng, d), y = normal_point(rng, d);
    const double lhs = averaged_lhs(problem, p, x, y);
    const double rhs = zeta * zeta * distance(x, y) * distance(x, y);
    if (lhs > rhs + tol) ++violations;
    max_lhs = std::max(max_lhs, lhs);
    if (rhs > 0.0) max_ratio = std::max(max_ratio, lhs / rhs);
  }
  rep.measured["violations"] = static_cast<double>(violations);
  rep.measured["max_lhs"] = max_lhs;
  rep.measured["max_ratio"] = zeta > 0.0 ? max_ratio : 0.0;
  rep.bound["tolerance"] = tol;
  rep.bound["zeta"] = zeta;
  bool ok = violations == 0;

  if (zeta_exact == 0.0) {
    rep.bound["max_lhs"] = 1e-18;
    ok = ok && max_lhs <= 1e-18;
  } else {
    // Pairwise witness on the worst Hessian pair.
    std::size_t bp = 0, bq = 1;
    double best = -1.0;
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t q = p + 1; q < P; ++q) {
        const double n = spectral_norm_sym(*problem.local(p).hessian() - *problem.local(q).hessian());
        if (n > best) best = n, bp = p, bq = q;
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*problem.local(bp).hessian() -
                                                      *problem.local(bq).hessian());
    Eigen::Index top = 0;
    es.eigenvalues().cwiseAbs().maxCoeff(&top);
    const Eigen::VectorXd u = es.eigenvectors().col(top);
    const ParamVector x = normal_point(rng, d);
    ParamVector y = x;
    for (std::size_t i = 0; i < d; ++i) y[i] -= u[static_cast<Eigen::Index>(i)];
    const double rhs = zeta * zeta * distance(x, y) * distance(x, y);
    const double pair_ratio = pairwise_lhs(problem, bp, bq, x, y) / rhs;

    // Averaged witness on a one-outlier family with the same zeta.
    Eigen::VectorXd w;
    const std::size_t P_out = 400, d_out = std::min<std::size_t>(d, 8);
    const Problem outlier = outlier_family(P_out, d_out, zeta_exact, rng, w);
    const ParamVector xo = normal_point(rng, d_out);
    ParamVector yo = xo;
    for (std::size_t i = 0; i < d_out; ++i) yo[i] -= w[static_cast<Eigen::Index>(i)];
    const double avg_ratio = averaged_lhs(outlier, 0, xo, yo) /
                             (zeta * zeta * distance(xo, yo) * distance(xo, yo));

    rep.measured["tightness_pairwise"] = pair_ratio;
    rep.measured["tightness_averaged"] = avg_ratio;
    rep.bound["tightness_min"] = 0.99;
    rep.notes.push_back(fmt::format(
        "averaged form is capped at ((P-1)/P)^2; witness family has P = {}", P_out));
    // the witnesses are also the sharpest test points for the bound itself
    const double ceiling = 1.0 + tol;
    if (pair_ratio > ceiling) ++violations;
    if (avg_ratio > ceiling) ++violations;
    rep.measured["violations"] = static_cast<double>(violations);
    ok = violations == 0 && pair_ratio >= 0.99 && avg_ratio >= 0.99;
  }
  rep.status = status_of(ok);
  return rep;
}

CheckReport check_sarah_equivalence(const Problem& problem, const AlgoParams& params,
                                    std::uint64_t seed) {
  CheckReport rep;
  rep.name = "sarah_equivalence";
  rep.seed = seed;
  const RngTree tree(seed);
  Rng init = tree.stream(Purpose::Init);
  const ParamVector x0 = normal_point(init, problem.dim());

  MonitorOptions mo;
  mo.grad_norm_only = true;
  BvrTrace tb, ts;
  Federation fb(problem, plain_federation(problem, seed));
  Monitor mb(problem, mo);
  const RunRecord rb = bvr_l_sgd(fb, x0, params, tree, mb, &tb);

  AlgoParams sp = params;
  sp.b = params.K * params.b;
  sp.K = 1;
  Federation fs(problem, plain_federation(problem, seed));
  Monitor ms(problem, mo);
  const RunRecord rs = minibatch_sarah(fs, x0, sp, tree, ms, &ts);

  rep.samples = tb.sync.size();
  rep.measured["K"] = static_cast<double>(params.K);
  rep.measured["comm_rounds"] = static_cast<double>(fb.ledger().comm_rounds());
  if (rb.status == RunStatus::Diverged || rs.status == RunStatus::Diverged) {
    rep.status = CheckStatus::Fail;
    rep.notes.push_back("a run diverged: " + rb.diagnostic + rs.diagnostic);
    rep.measured["max_distance"] = kInf;
    rep.bound["max_distance"] = 0.0;
    return rep;
  }
  double max_dist = tb.sync.size() == ts.sync.size() ? 0.0 : kInf;
  for (std::size_t t = 0; t < std::min(tb.sync.size(), ts.sync.size()); ++t)
    max_dist = std::max(max_dist, distance(tb.sync[t], ts.sync[t]));
  for (std::size_t s = 0; s < std::min(tb.snapshots.size(), ts.snapshots.size()); ++s)
    max_dist = std::max(max_dist, distance(tb.snapshots[s], ts.snapshots[s]));
  rep.measured["max_distance"] = max_dist;
  rep.bound["max_distance"] = 0.0;
  rep.status = status_of(max_dist == 0.0);
  return rep;
}

CheckReport check_snapshot_variance(const Problem& problem, std::size_t b_tilde, std::size_t reps,
                                    std::uint64_t seed, std::optional<double> sigma2_claim) {
  CheckReport rep;
  rep.name = fmt::format("snapshot_variance/b{}", b_tilde);
  rep.seed = seed;
  rep.samples = reps;
  if (b_tilde == 0 || reps < 2) throw ConfigError("snapshot check: b_tilde >= 1 and reps >= 2");
  if (!problem.meta.grad_variance_sigma2 || !problem.finite_support()) {
    rep.status = CheckStatus::Skipped;
    rep.notes.push_back("needs a known sigma^2 and finite supports");
    return rep;
  }
  const double sigma2 = sigma2_claim.value_or(*problem.meta.grad_variance_sigma2);
  const double P = static_cast<double>(problem.workers());
  const bool exact = static_cast<double>(b_tilde) >= *problem.mean_support();
  Rng rng = RngTree(seed).stream(Purpose::Probe);
  bool ok = true;
  double worst_margin = -kInf;
  for (std::size_t i = 0; i < 5; ++i) {
    const ParamVector x = normal_point(rng, problem.dim());
    const ParamVector g = problem.global_grad(x);
    if (exact) {
      Federation fed(problem, plain_federation(problem, seed));
      const double e = distance(aggregate(detail::snapshot_gradients(fed, x, b_tilde, 1, RngTree(seed))), g);
      rep.measured[fmt::format("error_{}", i)] = e * e;
      ok = ok && e * e <= 1e-12;
      continue;
    }
    const MeanSe m = snapshot_error(problem, x, g, b_tilde, reps, mix_key(seed, i, b_tilde));
    const double bound = sigma2 / (P * static_cast<double>(b_tilde));
    rep.measured[fmt::format("estimate_{}", i)] = m.mean;
    rep.measured[fmt::format("se_{}", i)] = m.se;
    rep.bound[fmt::format("limit_{}", i)] = bound + 3.0 * m.se;
    worst_margin = std::max(worst_margin, m.mean - (bound + 3.0 * m.se));
    ok = ok && m.mean <= bound + 3.0 * m.se;
  }
  if (exact) {
    rep.bound["error"] = 1e-12;
    rep.notes.push_back("full-gradient branch");
  } else {
    rep.bound["sigma2_over_Pb"] = sigma2 / (P * static_cast<double>(b_tilde));
    rep.measured["worst_margin"] = worst_margin;
    rep.notes.push_back("5 sub-tests at 3 SE; Bonferroni family-wise false-failure <= 5 x 0.135%");
  }
  rep.status = status_of(ok);
  return rep;
}

CheckReport check_snapshot_halving(const Problem& problem, std::size_t b_tilde, std::size_t reps,
                                   std::uint64_t seed) {
  CheckReport rep;
  rep.name = fmt::format("snapshot_halving/b{}", b_tilde);
  rep.seed = seed;
  rep.samples = reps;
  if (b_tilde == 0 || reps < 2) throw ConfigError("snapshot check: b_tilde >= 1 and reps >= 2");
  if (!problem.finite_support() || static_cast<double>(2 * b_tilde) >= *problem.mean_support()) {
    rep.status = CheckStatus::Skipped;
    rep.notes.push_back("doubled batch reaches the full-gradient branch");
    return rep;
  }
  Rng rng = RngTree(seed).stream(Purpose::Probe);
  bool ok = true;
  for (std::size_t i = 0; i < 5; ++i) {
    const ParamVector x = normal_point(rng, problem.dim());
    const ParamVector g = problem.global_grad(x);
    const MeanSe a = snapshot_error(problem, x, g, b_tilde, reps, mix_key(seed, i, b_tilde));
    const MeanSe b = snapshot_error(problem, x, g, 2 * b_tilde, reps, mix_key(seed, i, 2 * b_tilde));
    const double diff = a.mean - 2.0 * b.mean;
    const double se = std::sqrt(a.se * a.se + 4.0 * b.se * b.se);
    rep.measured[fmt::format("ratio_{}", i)] = a.mean / b.mean;
    rep.measured[fmt::format("diff_{}", i)] = diff;
    rep.bound[fmt::format("limit_{}", i)] = 3.0 * se;
    ok = ok && std::fabs(diff) <= 3.0 * se;
  }
  rep.notes.push_back("5 two-sided sub-tests at 3 SE; Bonferroni family-wise false-failure <= 5 x 0.27%");
  rep.status = status_of(ok);
  return rep;
}

CheckReport check_unbiasedness(const Problem& problem, std::size_t batch, std::size_t reps,
                               std::uint64_t seed, GradCorruption corrupt,
                               std::size_t max_coordinates) {
  CheckReport rep;
  rep.name = "unbiasedness";
  rep.seed = seed;
  rep.samples = reps;
  if (batch == 0) throw ConfigError("unbiasedness: batch must be at least 1");
  if (!problem.finite_support()) {
    rep.status = CheckStatus::Skipped;
    rep.notes.push_back("needs finite supports for the reference gradient");
    return rep;
  }
  const RngTree tree(seed);
  Rng rng = tree.stream(Purpose::Probe);
  const std::size_t p = rng.below(problem.workers());
  const LocalObjective& f = problem.local(p);
  const std::size_t d = problem.dim();
  const ParamVector x = probe_point(problem, rng);
  const ParamVector truth = local_full_grad(problem, p, x);
  rep.measured["worker"] = static_cast<double>(p);
  const std::size_t n = *f.support_size();

  std::vector<double> g(d);
  if (batch >= n) {
    std::vector<Example> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i].id = i;
    f.batch_grad(x.span(), all, g);
    if (corrupt) corrupt(g);
    const double err = distance(ParamVector(g), truth) / std::max(truth.norm(), 1e-300);
    rep.measured["relative_error"] = err;
    rep.bound["relative_error"] = 1e-12;
    rep.samples = 1;
    rep.notes.push_back("batch covers the support: enumerated exactly");
    rep.status = status_of(err <= 1e-12);
    return rep;
  }
  if (reps < 2) throw ConfigError("unbiasedness: reps must be at least 2");
  std::vector<double> mean(d, 0.0), m2(d, 0.0);
  std::vector<Example> draw;
  for (std::size_t r = 0; r < reps; ++r) {
    Rng br = tree.stream(Purpose::InnerBatch, 0, r, p);
    f.sample(br, batch, draw);
    f.batch_grad(x.span(), draw, g);
    if (corrupt) corrupt(g);
    const double k = static_cast<double>(r + 1);
    for (std::size_t i = 0; i < d; ++i) {
      const double delta = g[i] - mean[i];
      mean[i] += delta / k;
      m2[i] += delta * (g[i] - mean[i]);
    }
  }
  std::vector<std::size_t> coords(d);
  for (std::size_t i = 0; i < d; ++i) coords[i] = i;
  if (max_coordinates > 0 && max_coordinates < d) {
    // partial Fisher-Yates on the probe stream
    for (std::size_t i = 0; i < max_coordinates; ++i)
      std::swap(coords[i], coords[i + rng.below(d - i)]);
    coords.resize(max_coordinates);
  }
  std::size_t failures = 0;
  double worst = 0.0;
  const double scale = std::max(1.0, truth.norm());
  for (std::size_t i : coords) {
    const double se = std::sqrt(m2[i] / static_cast<double>(reps - 1) / static_cast<double>(reps));
    const double dev = std::fabs(mean[i] - truth[i]);
    const double limit = std::max(3.0 * se, 1e-12 * scale);
    if (dev > limit) ++failures;
    worst = std::max(worst, dev / limit);
  }
  rep.measured["failed_coordinates"] = static_cast<double>(failures);
  rep.measured["worst_deviation_in_limits"] = worst;
  rep.bound["failed_coordinates"] = 0.0;
  rep.bound["sub_test_limit_se"] = 3.0;
  rep.notes.push_back(fmt::format(
      "{} per-coordinate sub-tests at 3 SE; Bonferroni family-wise false-failure <= {:.1f}%",
      coords.size(), 100.0 * static_cast<double>(coords.size()) * 0.0027));
  rep.status = status_of(failures == 0);
  return rep;
}

CheckReport check_gradient(const Problem& problem, std::size_t trials, std::uint64_t seed,
                           GradCorruption corrupt) {
  CheckReport rep;
  rep.name = "gradient";
  rep.seed = seed;
  rep.samples = trials;
  const double h = 1e-5, tol = 1e-5;
  const std::size_t d = problem.dim();
  Rng rng = RngTree(seed).stream(Purpose::Probe);
  double max_rel = 0.0, max_affine = 0.0;
  std::vector<double> g(d), gy(d), xp(d), xm(d);
  std::vector<Example> draw;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t p = rng.below(problem.workers());
    const LocalObjective& f = problem.local(p);
    f.sample(rng, 1, draw);
    const Example z = draw[0];
    const ParamVector x = probe_point(problem, rng);
    f.grad(x.span(), z, g);
    if (corrupt) corrupt(g);
    double diff2 = 0.0, g2 = 0.0, fd2 = 0.0;
    xp = x.values();
    xm = x.values();
    for (std::size_t i = 0; i < d; ++i) {
      xp[i] = x[i] + h;
      xm[i] = x[i] - h;
      const double fd = (f.loss(xp, z) - f.loss(xm, z)) / (2.0 * h);
      xp[i] = xm[i] = x[i];
      diff2 += (g[i] - fd) * (g[i] - fd);
      g2 += g[i] * g[i];
      fd2 += fd * fd;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(g2), std::sqrt(fd2), 1e-12});
    max_rel = std::max(max_rel, rel);
    if (const Eigen::MatrixXd* H = f.hessian()) {
      const ParamVector y = normal_point(rng, d);
      f.grad(y.span(), z, gy);
      if (corrupt) corrupt(gy);
      Eigen::VectorXd dx(d);
      for (std::size_t i = 0; i < d; ++i) dx[i] = x[i] - y[i];
      const Eigen::VectorXd expect = *H * dx;
      double err2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double e = (g[i] - gy[i]) - expect[static_cast<Eigen::Index>(i)];
        err2 += e * e;
      }
      max_affine = std::max(max_affine, std::sqrt(err2) / (1.0 + expect.norm()));
    }
  }
  rep.measured["max_relative_error"] = max_rel;
  rep.bound["max_relative_error"] = tol;
  bool ok = max_rel <= tol;
  if (exact_hessians(problem)) {
    rep.measured["max_affine_error"] = max_affine;
    rep.bound["max_affine_error"] = 1e-10;
    ok = ok && max_affine <= 1e-10;
  }
  rep.status = status_of(ok);
  return rep;
}

namespace {

struct RoutineMoments {
  std::vector<double> f;   // E f(x_k), k = 0..K
  std::vector<double> g2;  // E ||grad f(x_k)||^2, k = 0..K
  std::vector<double> v2;  // E ||v_k - grad f(x_{k-1})||^2, k = 1..K (index k)
  bool diverged = false;
};

RoutineMoments routine_moments(const Problem& problem, double eta, std::size_t K, std::size_t b,
                               std::size_t reps, std::uint64_t seed) {
  if (!problem.finite_support()) throw ConfigError("trend checks need finite supports");
  const RngTree tree(seed);
  Rng init = tree.stream(Purpose::Init);
  const ParamVector x0 = normal_point(init, problem.dim());
  const ParamVector v0 = problem.global_grad(x0);
  Federation fed(problem, plain_federation(problem, seed));
  RoutineMoments m;
  m.f.assign(K + 1, 0.0);
  m.g2.assign(K + 1, 0.0);
  m.v2.assign(K + 1, 0.0);
  const double n = static_cast<double>(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng br = tree.stream(Purpose::Routine, 0, r, 0);
    Rng sr = tree.stream(Purpose::RoutineSelect, 0, r, 0);
    LocalTrace trace;
    try {
      local_routine(fed.worker(0), x0, eta, v0, b, K, br, sr, &trace);
    } catch (const DivergenceError&) {
      m.diverged = true;
      return m;
    }
    for (std::size_t k = 0; k <= K; ++k) {
      const ParamVector gk = problem.global_grad(trace.iterates[k]);
      m.f[k] += problem.global_loss(trace.iterates[k]) / n;
      m.g2[k] += gk.norm2() / n;
      if (k >= 1) {
        const ParamVector gprev = problem.global_grad(trace.iterates[k - 1]);
        m.v2[k] += (trace.estimators[k] - gprev).norm2() / n;
      }
    }
  }
  return m;
}

}  // namespace

CheckReport check_descent_trend(const Problem& problem, double eta, std::size_t K, std::size_t b,
                                std::size_t reps, std::uint64_t seed) {
  CheckReport rep;
  rep.name = "descent_trend";
  rep.seed = seed;
  rep.samples = reps;
  rep.constant_calibrated = true;
  const RoutineMoments m = routine_moments(problem, eta, K, b, reps, seed);
  double c_needed = 0.0;
  if (m.diverged) {
    c_needed = kInf;
  } else {
    for (std::size_t k = 1; k <= K; ++k) {
      const double rest = m.g2[k - 1] - 2.5 * m.v2[k];
      if (rest <= 0.0) continue;
      const double dec = (m.f[k - 1] - m.f[k]) / eta;
      c_needed = std::max(c_needed, dec > 0.0 ? rest / dec : kInf);
    }
  }
  rep.measured["constant_needed"] = c_needed;
  rep.measured["eta_L"] = eta * problem.meta.smoothness_L;
  rep.bound["constant_cap"] = kTrendConstantCap;
  rep.notes.push_back("constant-calibrated trend test; the hidden constant is not asserted exactly");
  rep.status = status_of(c_needed <= kTrendConstantCap);
  return rep;
}

CheckReport check_inner_variance_trend(const Problem& problem, double eta, std::size_t K,
                                       std::size_t b, std::size_t reps, std::uint64_t seed) {
  CheckReport rep;
  rep.name = "inner_variance_trend";
  rep.seed = seed;
  rep.samples = reps;
  rep.constant_calibrated = true;
  const RoutineMoments m = routine_moments(problem, eta, K, b, reps, seed);
  double c_needed = kInf;
  if (!m.diverged) {
    const double L = problem.meta.smoothness_L, zeta = problem.meta.hetero_zeta;
    const double Kd = static_cast<double>(K);
    const double c_eta = eta * eta * L * L / static_cast<double>(b) + eta * eta * zeta * zeta * Kd;
    double lhs = 0.0, grads = 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
      lhs += m.v2[k] / Kd;
      grads += m.g2[k - 1];
    }
    const double unit = c_eta * grads;
    c_needed = lhs == 0.0 ? 0.0 : (unit > 0.0 ? lhs / unit : kInf);
    rep.measured["mean_inner_variance"] = lhs;
    rep.measured["C_eta"] = c_eta;
  }
  rep.measured["constant_needed"] = c_needed;
  rep.bound["constant_cap"] = kTrendConstantCap;
  rep.notes.push_back("constant-calibrated trend test; the hidden constant is not asserted exactly");
  rep.status = status_of(c_needed <= kTrendConstantCap);
  return rep;
}

CheckReport negative_control(CheckReport inner) {
  inner.name += "/negative-control";
  if (inner.status != CheckStatus::Skipped) {
    inner.notes.push_back(fmt::format("inner check returned {}; expected fail", to_string(inner.status)));
    inner.status = inner.status == CheckStatus::Fail ? CheckStatus::Pass : CheckStatus::Fail;
  }
  return inner;
}

std::vector<CheckReport> run_verify_suite(std::uint64_t seed) {
  std::vector<CheckReport> out;
  std::uint64_t index = 0;
  auto next_seed = [&] { return mix_key(seed, 0x7E51F, ++index); };

  // Bias bound over the zeta ladder.
  for (double zeta : {0.0, 0.25, 0.5, 1.0}) {
    QuadraticSpec qs;
    qs.zeta = zeta;
    const Problem prob = gen_quadratic_family(qs, next_seed());
    CheckReport r = check_bias_bound(prob, 1000, next_seed());
    r.name += fmt::format("/zeta{}", zeta);
    out.push_back(std::move(r));
    if (zeta == 0.5) {
      CheckReport neg = negative_control(check_bias_bound(prob, 1000, next_seed(), 0.5 * zeta));
      out.push_back(std::move(neg));
    }
  }

  // SARAH equivalence.
  {
    QuadraticSpec qs;
    qs.P = 4;
    qs.d = 10;
    qs.zeta = 0.5;
    const Problem prob = gen_quadratic_family(qs, next_seed());
    AlgoParams ap;
    ap.eta = 0.2;
    ap.K = 1;
    ap.b = 8;
    ap.b_tilde = 20;
    ap.T = 4;
    ap.S = 10;
    out.push_back(check_sarah_equivalence(prob, ap, next_seed()));
    ap.K = 2;
    out.push_back(negative_control(check_sarah_equivalence(prob, ap, next_seed())));
  }

  // Snapshot variance and halving.
  {
    QuadraticSpec qs;
    const Problem prob = gen_quadratic_family(qs, next_seed());
    for (std::size_t bt : {1u, 4u, 16u}) {
      out.push_back(check_snapshot_variance(prob, bt, 10000, next_seed()));
      out.push_back(check_snapshot_halving(prob, bt, 10000, next_seed()));
    }
    out.push_back(check_snapshot_variance(prob, 100, 10, next_seed()));
    out.push_back(negative_control(check_snapshot_variance(prob, 4, 10000, next_seed(), 0.25)));
  }

  // Unbiasedness and gradients.
  {
    QuadraticSpec qs;
    qs.zeta = 0.5;
    const Problem quad = gen_quadratic_family(qs, next_seed());
    CheckReport u = check_unbiasedness(quad, 4, 4000, next_seed());
    u.name += "/quadratic";
    out.push_back(std::move(u));
    CheckReport ue = check_unbiasedness(quad, 100, 2, next_seed());
    ue.name += "/quadratic-full";
    out.push_back(std::move(ue));
    CheckReport ub = negative_control(check_unbiasedness(
        quad, 4, 4000, next_seed(), [](std::span<double> g) { g[0] += 1.0; }));
    ub.name = "unbiasedness/quadratic/negative-control";
    out.push_back(std::move(ub));
    CheckReport gq = check_gradient(quad, 100, next_seed());
    gq.name += "/quadratic";
    out.push_back(std::move(gq));

    ClassPartitionConfig cc;
    cc.q = 0.35;
    const ClassificationData data = gen_classification(cc, next_seed());
    MlpProblemOptions mo;
    mo.calibrate_smoothness = false;
    mo.estimate_zeta = false;
    const Problem mlp = make_mlp_problem(data, MlpSpec{}, next_seed(), mo);
    CheckReport gm = check_gradient(mlp, 100, next_seed());
    gm.name += "/mlp";
    out.push_back(std::move(gm));
    CheckReport gneg = negative_control(
        check_gradient(mlp, 20, next_seed(), [](std::span<double> g) { g[0] += 1e-3; }));
    gneg.name = "gradient/mlp/negative-control";
    out.push_back(std::move(gneg));
    CheckReport um = check_unbiasedness(mlp, 8, 2000, next_seed(), {}, 20);
    um.name += "/mlp";
    out.push_back(std::move(um));
  }

  // Trend tests.
  {
    QuadraticSpec qs;
    qs.zeta = 0.25;
    const Problem prob = gen_quadratic_family(qs, next_seed());
    const double L = prob.meta.smoothness_L;
    out.push_back(check_descent_trend(prob, 0.25 / L, 8, 4, 2000, next_seed()));
    out.push_back(check_inner_variance_trend(prob, 0.25 / L, 8, 4, 2000, next_seed()));
    out.push_back(negative_control(check_descent_trend(prob, 4.0 / L, 8, 4, 200, next_seed())));
  }
  return out;
}

}  // namespace fedsim
