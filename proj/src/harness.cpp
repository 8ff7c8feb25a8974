#include "fedsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "fedsim/errors.hpp"
#include "fedsim/kernels.hpp"

namespace fedsim {

using nlohmann::json;

namespace {

// Reads known keys from a JSON object and rejects everything else.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError("config: '" + section_ + "' must be an object");
  }
  template <typename T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      field = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("config: bad value for '{}.{}': {}", section_, key, e.what()));
    }
  }
  void get_opt(const char* key, std::optional<double>& field) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    if (!it->is_number()) throw ConfigError(fmt::format("config: '{}.{}' must be a number", section_, key));
    field = it->get<double>();
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError(fmt::format("config: unknown key '{}' in '{}'", it.key(), section_));
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

const std::set<std::string>& problem_kinds() {
  static const std::set<std::string> kinds{"quadratic", "classification", "mlp"};
  return kinds;
}

bool is_staged(const std::string& algorithm) {
  return algorithm == "bvr_l_sgd" || algorithm == "bvr_l_sgd_practical" ||
         algorithm == "minibatch_sarah";
}

}  // namespace

void RunConfig::validate() const {
  const auto& names = algorithm_names();
  if (std::find(names.begin(), names.end(), algorithm) == names.end())
    throw ConfigError("unknown algorithm '" + algorithm + "'");
  if (!problem_kinds().count(problem.kind))
    throw ConfigError("unknown problem kind '" + problem.kind + "'");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (total_rounds % eval_every != 0) throw ConfigError("eval_every must divide total_rounds");
  if (repeats == 0) throw ConfigError("repeats must be at least 1");
  if (!(params.eta > 0.0) || !std::isfinite(params.eta)) throw ConfigError("eta must be positive");
  if (params.K == 0 || params.b == 0 || params.T == 0)
    throw ConfigError("K, b and T must be at least 1");
  if (target_grad_norm2 && !(*target_grad_norm2 >= 0.0))
    throw ConfigError("target_grad_norm2 must be non-negative");
  const std::set<std::string> inits{"auto", "zeros", "glorot", "normal"};
  if (!inits.count(problem.init)) throw ConfigError("unknown init '" + problem.init + "'");
  if (problem.init == "glorot" && !problem.is_classification())
    throw ConfigError("glorot init needs an MLP problem");
  const bool online = !problem.is_classification() && problem.quadratic.samples_per_worker == 0;
  if (algorithm == "local_gd" && online)
    throw ConfigError("local_gd needs finite local supports (samples_per_worker > 0)");
  if (is_staged(algorithm) && online && params.b_tilde == 0)
    throw ConfigError("b_tilde must be set explicitly for online problems");
  FederationConfig f = federation;
  f.P = problem.workers();
  f.validate();
}

json to_json(const RunConfig& c) {
  const auto& q = c.problem.quadratic;
  const auto& k = c.problem.classification;
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["algorithm"] = c.algorithm;
  j["problem"] = {
      {"kind", c.problem.kind},
      {"init", c.problem.init},
      {"estimate_meta", c.problem.estimate_meta},
      {"quadratic",
       {{"P", q.P}, {"d", q.d}, {"zeta", q.zeta}, {"L", q.L}, {"mu", q.mu}, {"sigma2", q.sigma2},
        {"samples_per_worker", q.samples_per_worker}, {"linear_hetero", q.linear_hetero}}},
      {"classification",
       {{"P", k.P}, {"q", k.q}, {"num_classes", k.num_classes},
        {"samples_per_class", k.samples_per_class}, {"feature_dim", k.feature_dim},
        {"label_noise", k.label_noise}, {"cluster_std", k.cluster_std},
        {"feature_std", k.feature_std}}},
      {"mlp", {{"hidden", c.problem.mlp.hidden}, {"l2", c.problem.mlp.l2}}}};
  j["params"] = {{"eta", c.params.eta}, {"K", c.params.K},   {"b", c.params.b},
                 {"b_tilde", c.params.b_tilde}, {"T", c.params.T}, {"S", c.params.S},
                 {"auto_T", c.params.auto_T}};
  j["federation"] = {{"budget_B", c.federation.budget_B},
                     {"enforce", to_string(c.federation.enforce)},
                     {"slack", c.federation.slack}};
  j["total_rounds"] = c.total_rounds;
  j["eval_every"] = c.eval_every;
  j["target_grad_norm2"] = c.target_grad_norm2 ? json(*c.target_grad_norm2) : json(nullptr);
  j["grad_norm_only"] = c.grad_norm_only;
  j["repeats"] = c.repeats;
  j["seed"] = c.seed;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Reader top(j, "config");
  int version = kConfigSchemaVersion;
  top.get("schema_version", version);
  if (version != kConfigSchemaVersion)
    throw ConfigError(fmt::format("config: schema_version {} is not supported (expected {})",
                                  version, kConfigSchemaVersion));
  top.get("algorithm", c.algorithm);
  if (const json* pj = top.sub("problem")) {
    Reader r(*pj, "problem");
    r.get("kind", c.problem.kind);
    r.get("init", c.problem.init);
    r.get("estimate_meta", c.problem.estimate_meta);
    if (const json* qj = r.sub("quadratic")) {
      Reader s(*qj, "problem.quadratic");
      auto& q = c.problem.quadratic;
      s.get("P", q.P); s.get("d", q.d); s.get("zeta", q.zeta); s.get("L", q.L);
      s.get("mu", q.mu); s.get("sigma2", q.sigma2);
      s.get("samples_per_worker", q.samples_per_worker);
      s.get("linear_hetero", q.linear_hetero);
      s.finish();
    }
    if (const json* kj = r.sub("classification")) {
      Reader s(*kj, "problem.classification");
      auto& k = c.problem.classification;
      s.get("P", k.P); s.get("q", k.q); s.get("num_classes", k.num_classes);
      s.get("samples_per_class", k.samples_per_class); s.get("feature_dim", k.feature_dim);
      s.get("label_noise", k.label_noise); s.get("cluster_std", k.cluster_std);
      s.get("feature_std", k.feature_std);
      s.finish();
    }
    if (const json* mj = r.sub("mlp")) {
      Reader s(*mj, "problem.mlp");
      s.get("hidden", c.problem.mlp.hidden);
      s.get("l2", c.problem.mlp.l2);
      s.finish();
    }
    r.finish();
  }
  if (const json* aj = top.sub("params")) {
    Reader r(*aj, "params");
    r.get("eta", c.params.eta); r.get("K", c.params.K); r.get("b", c.params.b);
    r.get("b_tilde", c.params.b_tilde); r.get("T", c.params.T); r.get("S", c.params.S);
    r.get("auto_T", c.params.auto_T);
    r.finish();
  }
  if (const json* fj = top.sub("federation")) {
    Reader r(*fj, "federation");
    std::string mode = to_string(c.federation.enforce);
    r.get("budget_B", c.federation.budget_B);
    r.get("enforce", mode);
    r.get("slack", c.federation.slack);
    c.federation.enforce = budget_mode_from_string(mode);
    r.finish();
  }
  top.get("total_rounds", c.total_rounds);
  top.get("eval_every", c.eval_every);
  top.get_opt("target_grad_norm2", c.target_grad_norm2);
  top.get("grad_norm_only", c.grad_norm_only);
  top.get("repeats", c.repeats);
  top.get("seed", c.seed);
  top.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

std::shared_ptr<Problem> build_problem(const ProblemConfig& pc, std::uint64_t seed) {
  if (pc.is_classification()) {
    const ClassificationData data = gen_classification(pc.classification, seed);
    MlpProblemOptions opts;
    opts.calibrate_smoothness = pc.estimate_meta;
    opts.estimate_zeta = pc.estimate_meta;
    return std::make_shared<Problem>(make_mlp_problem(data, pc.mlp, seed, opts));
  }
  if (pc.kind != "quadratic") throw ConfigError("unknown problem kind '" + pc.kind + "'");
  return std::make_shared<Problem>(gen_quadratic_family(pc.quadratic, seed));
}

ParamVector initial_point(const Problem& problem, const ProblemConfig& pc, std::uint64_t seed) {
  Rng rng = RngTree(seed).stream(Purpose::Init);
  std::string init = pc.init;
  const auto* mlp = dynamic_cast<const MlpObjective*>(&problem.local(0));
  if (init == "auto") init = mlp ? "glorot" : "zeros";
  if (init == "zeros") return ParamVector(problem.dim());
  if (init == "glorot") {
    if (!mlp) throw ConfigError("glorot init needs an MLP problem");
    return glorot_init(mlp->shape(), rng);
  }
  if (init == "normal") {
    ParamVector x(problem.dim());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    return x;
  }
  throw ConfigError("unknown init '" + init + "'");
}

std::uint64_t repeat_seed(std::uint64_t root, std::size_t r) {
  return r == 0 ? root : mix_key(root, static_cast<std::uint64_t>(Purpose::Repeat), r);
}

AlgoParams resolve_params(const RunConfig& cfg, const Problem& problem) {
  AlgoParams p = cfg.params;
  if (p.b_tilde == 0) {
    const auto support = problem.mean_support();
    if (!support) throw ConfigError("b_tilde must be set explicitly for online problems");
    p.b_tilde = static_cast<std::size_t>(std::ceil(*support));
  }
  if (is_staged(cfg.algorithm) && p.S == 0) {
    const bool derived_T = cfg.algorithm == "bvr_l_sgd_practical" ||
                           (cfg.algorithm == "bvr_l_sgd" && p.auto_T);
    const std::size_t T = derived_T ? practical_T(p.b_tilde, p.K, p.b) : p.T;
    p.S = std::max<std::size_t>(1, (cfg.total_rounds + T) / (T + 1));
  }
  if (p.S == 0) p.S = 1;  // unused by non-staged methods
  if (p.rounds == 0) p.rounds = cfg.total_rounds;
  p.validate();
  return p;
}

RunRecord run_once(const RunConfig& cfg, const Problem& problem, std::size_t repeat) {
  cfg.validate();
  FederationConfig fcfg = cfg.federation;
  fcfg.P = problem.workers();
  const std::uint64_t seed = repeat_seed(cfg.seed, repeat);
  fcfg.seed = seed;
  Federation fed(problem, fcfg);

  MonitorOptions mo;
  mo.eval_every = cfg.eval_every;
  mo.max_rounds = cfg.total_rounds;
  mo.target_grad_norm2 = cfg.target_grad_norm2;
  mo.grad_norm_only = cfg.grad_norm_only;
  Monitor monitor(problem, mo);

  const RngTree tree(seed);
  const ParamVector x0 = initial_point(problem, cfg.problem, seed);
  const AlgoParams params = resolve_params(cfg, problem);

  RunRecord rec;
  if (cfg.total_rounds == 0) {
    monitor.begin(x0, fed.ledger());
    rec = monitor.finish(cfg.algorithm, x0, x0, fed.ledger());
  } else {
    rec = run_algorithm(cfg.algorithm, fed, x0, params, tree, monitor);
  }
  assert_budget(fed.ledger(), fcfg);

  rec.header["config"] = to_json(cfg).dump();
  rec.header["seed"] = std::to_string(cfg.seed);
  rec.header["repeat"] = std::to_string(repeat);
  rec.header["repeat_seed"] = std::to_string(seed);
  rec.header["kernels"] = kernels::active_name();
  rec.header["comm_rounds"] = std::to_string(fed.ledger().comm_rounds());
  rec.header["resolved"] = json{{"S", params.S}, {"b_tilde", params.b_tilde}}.dump();
  rec.header["meta_L"] = format_double(problem.meta.smoothness_L);
  rec.header["meta_zeta"] = format_double(problem.meta.hetero_zeta);
  return rec;
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& repeats) {
  std::map<std::size_t, std::vector<const RunRow*>> by_round;
  for (const auto& rec : repeats)
    for (const auto& row : rec.rows) by_round[row.comm_round].push_back(&row);
  std::vector<SummaryRow> out;
  for (const auto& [round, rows] : by_round) {
    SummaryRow s;
    s.comm_round = round;
    s.count = rows.size();
    for (std::size_t m = 0; m < 6; ++m) {
      auto value = [m](const RunRow* r) {
        switch (m) {
          case 0: return r->train_loss;
          case 1: return r->train_acc;
          case 2: return r->test_loss;
          case 3: return r->test_acc;
          case 4: return r->grad_norm2;
          default: return static_cast<double>(r->cum_grad_evals);
        }
      };
      double sum = 0.0;
      for (const RunRow* r : rows) sum += value(r);
      const double mean = sum / static_cast<double>(rows.size());
      double ss = 0.0;
      for (const RunRow* r : rows) ss += (value(r) - mean) * (value(r) - mean);
      s.mean[m] = mean;
      s.stddev[m] = rows.size() > 1 ? std::sqrt(ss / static_cast<double>(rows.size() - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "comm_round,count";
  for (const char* m : kSummaryMetrics) out << ',' << m << "_mean," << m << "_std";
  out << '\n';
  for (const auto& r : rows) {
    out << r.comm_round << ',' << r.count;
    for (std::size_t m = 0; m < 6; ++m)
      out << ',' << format_double(r.mean[m]) << ',' << format_double(r.stddev[m]);
    out << '\n';
  }
}

bool RunResult::any_diverged() const {
  return std::any_of(repeats.begin(), repeats.end(),
                     [](const RunRecord& r) { return r.status == RunStatus::Diverged; });
}

RunResult run(const RunConfig& cfg, const Problem& problem) {
  cfg.validate();
  RunResult res;
  res.config = cfg;
  for (std::size_t r = 0; r < cfg.repeats; ++r) res.repeats.push_back(run_once(cfg, problem, r));
  res.summary = summarize(res.repeats);
  return res;
}

RunResult run(const RunConfig& cfg) {
  cfg.validate();
  const auto problem = build_problem(cfg.problem, cfg.seed);
  return run(cfg, *problem);
}

double sweep_score(const RunRecord& rec, SweepCriterion criterion, std::size_t window) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (rec.status == RunStatus::Diverged || rec.rows.empty()) return ninf;
  const std::size_t n = std::min(window, rec.rows.size());
  double score = std::numeric_limits<double>::infinity();
  for (std::size_t i = rec.rows.size() - n; i < rec.rows.size(); ++i) {
    const RunRow& r = rec.rows[i];
    const double v = criterion == SweepCriterion::MinTrainAccuracy ? r.train_acc : -r.train_loss;
    if (std::isnan(v)) return ninf;
    score = std::min(score, v);
  }
  return score;
}

double sweep_score(const std::vector<RunRecord>& repeats, SweepCriterion criterion,
                   std::size_t window) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (repeats.empty()) return ninf;
  double sum = 0.0;
  for (const auto& r : repeats) {
    const double s = sweep_score(r, criterion, window);
    if (s == ninf) return ninf;
    sum += s;
  }
  return sum / static_cast<double>(repeats.size());
}

std::optional<std::size_t> select_eta(const std::vector<double>& etas,
                                      const std::vector<double>& scores) {
  if (etas.size() != scores.size()) throw ConfigError("select_eta: size mismatch");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (scores[i] == -std::numeric_limits<double>::infinity() || std::isnan(scores[i])) continue;
    if (!best || scores[i] > scores[*best] ||
        (scores[i] == scores[*best] && etas[i] < etas[*best]))
      best = i;
  }
  return best;
}

SweepResult sweep_eta(const RunConfig& cfg, const std::vector<double>& etas,
                      SweepCriterion criterion, const Problem* problem) {
  if (etas.empty()) throw ConfigError("sweep: empty eta grid");
  std::shared_ptr<Problem> owned;
  if (!problem) {
    owned = build_problem(cfg.problem, cfg.seed);
    problem = owned.get();
  }
  SweepResult out;
  std::vector<double> scores;
  for (double eta : etas) {
    RunConfig c = cfg;
    c.params.eta = eta;
    SweepEntry e;
    e.eta = eta;
    e.result = run(c, *problem);
    e.score = sweep_score(e.result.repeats, criterion);
    scores.push_back(e.score);
    out.entries.push_back(std::move(e));
  }
  if (auto idx = select_eta(etas, scores)) {
    out.chosen_eta = etas[*idx];
    out.message = fmt::format("chose eta = {} (score {})", etas[*idx], format_double(scores[*idx]));
  } else {
    out.message = "no stable eta: every run diverged";
  }
  return out;
}

void apply_budget_split(RunConfig& cfg, std::size_t budget) {
  if (budget == 0) throw ConfigError("budget must be positive");
  cfg.federation.budget_B = budget;
  if (is_local_method(cfg.algorithm)) {
    if (budget < 16 || budget % 16 != 0)
      throw ConfigError(fmt::format("budget {} is not a positive multiple of 16", budget));
    cfg.params.K = budget / 16;
    cfg.params.b = 16;
  } else {
    cfg.params.K = 1;
    cfg.params.b = budget;
  }
}

Schedule corollary_schedule(const ProblemMeta& meta, std::size_t K, std::size_t b, double eps,
                            double c) {
  if (!(eps > 0.0)) throw ConfigError("schedule: eps must be positive");
  if (!(meta.smoothness_L > 0.0)) throw ConfigError("schedule: smoothness L unknown");
  if (K == 0 || b == 0) throw ConfigError("schedule: K and b must be at least 1");
  Schedule s;
  s.K = K;
  s.b = b;
  const double P = static_cast<double>(meta.P);
  std::optional<double> by_variance;
  if (meta.grad_variance_sigma2) by_variance = std::ceil(*meta.grad_variance_sigma2 / (P * eps));
  double bt;
  if (meta.n_total) {
    const double local_n = static_cast<double>(*meta.n_total) / P;
    bt = by_variance ? std::min(local_n, *by_variance) : local_n;
  } else {
    if (!by_variance) throw ConfigError("schedule: online problem without sigma^2");
    bt = *by_variance;
  }
  s.b_tilde = std::max<std::size_t>(1, static_cast<std::size_t>(bt));
  s.T = practical_T(s.b_tilde, K, b);
  const double L = meta.smoothness_L;
  const double Kd = static_cast<double>(K), bd = static_cast<double>(b);
  double eta = 1.0 / L;
  if (meta.hetero_zeta > 0.0) eta = std::min(eta, 1.0 / (Kd * meta.hetero_zeta));
  eta = std::min(eta, std::sqrt(bd / Kd) / L);
  eta = std::min(eta, std::sqrt(P * bd / (Kd * static_cast<double>(s.T))) / L);
  s.eta = c * eta;
  return s;
}

std::optional<std::size_t> rounds_to_target(const RunRecord& rec, double eps) {
  for (const auto& r : rec.rows)
    if (r.grad_norm2 <= eps) return r.comm_round;
  return std::nullopt;
}

}  // namespace fedsim
