// fedsim command line: gen-data, run, sweep, grid, verify, plot.
// Exit codes: 0 ok, 2 divergence, 3 budget violation, 4 config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fedsim/classification.hpp"
#include "fedsim/dataset_io.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/grid.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/kernels.hpp"
#include "fedsim/svg.hpp"
#include "fedsim/verify.hpp"

namespace fs = std::filesystem;
using namespace fedsim;

namespace {

constexpr int kExitDivergence = 2;
constexpr int kExitBudget = 3;
constexpr int kExitConfig = 4;

// Flags mirroring RunConfig; unset flags keep the config-file (or default) value.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> algorithm, problem, init, enforce;
  std::optional<double> eta, q, zeta, L, mu, sigma2, target, slack, l2, label_noise;
  std::optional<std::size_t> K, b, b_tilde, T, S, budget, rounds, eval_every, repeats, P, d,
      samples, samples_per_class, feature_dim, hidden;
  std::optional<bool> auto_T;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    app->add_option("--algorithm", algorithm, "algorithm name");
    app->add_option("--problem", problem, "quadratic | classification");
    app->add_option("--init", init, "auto | zeros | glorot | normal");
    app->add_option("--eta", eta, "step size");
    app->add_option("--K", K, "local steps");
    app->add_option("--b", b, "minibatch size");
    app->add_option("--b-tilde", b_tilde, "snapshot batch (0: mean local support)");
    app->add_option("--T", T, "inner rounds per stage");
    app->add_option("--S", S, "stages (0: derived from --rounds)");
    app->add_option("--auto-T", auto_T, "derive T = ceil(1 + b_tilde/(K b))");
    app->add_option("--budget", budget, "local computation budget B");
    app->add_option("--enforce", enforce, "budget mode: off | average | strict");
    app->add_option("--slack", slack, "budget slack multiplier");
    app->add_option("--rounds", rounds, "total communication rounds");
    app->add_option("--eval-every", eval_every, "evaluation period in rounds");
    app->add_option("--target", target, "stop once ||grad f||^2 <= target");
    app->add_option("--repeats", repeats, "independent repeats");
    app->add_option("--P", P, "workers");
    app->add_option("--d", d, "quadratic dimension");
    app->add_option("--zeta", zeta, "quadratic heterogeneity");
    app->add_option("--L", L, "quadratic smoothness");
    app->add_option("--mu", mu, "quadratic strong convexity of the mean");
    app->add_option("--sigma2", sigma2, "quadratic gradient variance");
    app->add_option("--samples", samples, "quadratic samples per worker (0: online)");
    app->add_option("--q", q, "dominant-class fraction");
    app->add_option("--samples-per-class", samples_per_class, "classification samples per class");
    app->add_option("--feature-dim", feature_dim, "classification feature dimension");
    app->add_option("--label-noise", label_noise, "label noise rate");
    app->add_option("--hidden", hidden, "MLP hidden units");
    app->add_option("--l2", l2, "MLP l2 regularization");
  }

  RunConfig resolve(std::uint64_t seed, bool seed_given) const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(c.algorithm, algorithm);
    set(c.problem.kind, problem);
    set(c.problem.init, init);
    set(c.params.eta, eta);
    set(c.params.K, K);
    set(c.params.b, b);
    set(c.params.b_tilde, b_tilde);
    set(c.params.T, T);
    set(c.params.S, S);
    set(c.params.auto_T, auto_T);
    set(c.federation.budget_B, budget);
    if (enforce) c.federation.enforce = budget_mode_from_string(*enforce);
    set(c.federation.slack, slack);
    set(c.total_rounds, rounds);
    set(c.eval_every, eval_every);
    if (target) c.target_grad_norm2 = *target;
    set(c.repeats, repeats);
    if (P) c.problem.quadratic.P = c.problem.classification.P = c.problem.classification.num_classes = *P;
    set(c.problem.quadratic.d, d);
    set(c.problem.quadratic.zeta, zeta);
    set(c.problem.quadratic.L, L);
    set(c.problem.quadratic.mu, mu);
    set(c.problem.quadratic.sigma2, sigma2);
    set(c.problem.quadratic.samples_per_worker, samples);
    set(c.problem.classification.q, q);
    set(c.problem.classification.samples_per_class, samples_per_class);
    set(c.problem.classification.feature_dim, feature_dim);
    set(c.problem.classification.label_noise, label_noise);
    set(c.problem.mlp.hidden, hidden);
    set(c.problem.mlp.l2, l2);
    if (seed_given) c.seed = seed;
    c.validate();
    return c;
  }
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

void write_record(const fs::path& base, const RunRecord& rec, const std::string& format) {
  if (format == "jsonl") {
    auto out = open_out(base.string() + ".jsonl");
    write_record_jsonl(out, rec);
  } else {
    auto out = open_out(base.string() + ".csv");
    write_record_csv(out, rec);
  }
}

int write_run_outputs(const fs::path& dir, const RunResult& res, const std::string& format) {
  fs::create_directories(dir);
  for (std::size_t r = 0; r < res.repeats.size(); ++r)
    write_record(dir / fmt::format("run_r{}", r), res.repeats[r], format);
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, res.summary);
  }
  {
    auto out = open_out(dir / "config.json");
    out << to_json(res.config).dump(2) << '\n';
  }
  for (std::size_t r = 0; r < res.repeats.size(); ++r) {
    const auto& rec = res.repeats[r];
    const RunRow& last = rec.rows.back();
    std::cout << fmt::format("repeat {}: {} after {} rounds, train_loss {}, grad_norm2 {}{}\n", r,
                             to_string(rec.status), last.comm_round, format_double(last.train_loss),
                             format_double(last.grad_norm2),
                             rec.diagnostic.empty() ? "" : " (" + rec.diagnostic + ")");
  }
  return res.any_diverged() ? kExitDivergence : 0;
}

std::vector<double> parse_reals(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_double(item));
  return out;
}

std::vector<std::string> parse_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

SweepCriterion parse_criterion(const std::string& s) {
  if (s == "accuracy") return SweepCriterion::MinTrainAccuracy;
  if (s == "loss") return SweepCriterion::NegTrainLoss;
  throw ConfigError("criterion must be 'accuracy' or 'loss'");
}

// Reads one column of a summary or record CSV (lines starting with '#' skipped).
std::pair<std::vector<double>, std::vector<double>> read_column(const fs::path& p,
                                                               const std::string& metric) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<double> x, y;
  std::size_t xi = 0, yi = std::string::npos;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (header.empty()) {
      header = cells;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "comm_round") xi = i;
        if (header[i] == metric || header[i] == metric + "_mean") yi = i;
      }
      if (yi == std::string::npos)
        throw ConfigError("column '" + metric + "' not found in '" + p.string() + "'");
      continue;
    }
    if (cells.size() <= std::max(xi, yi)) continue;
    x.push_back(parse_double(cells[xi]));
    y.push_back(parse_double(cells[yi]));
  }
  return {x, y};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated optimization simulator"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string format = "csv";
  app.add_option("--seed", seed, "root seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--format", format, "record format")->check(CLI::IsMember({"csv", "jsonl"}));

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic classification dataset");
  ClassPartitionConfig gcfg;
  gen->add_option("--P", gcfg.P, "workers (= classes)");
  gen->add_option("--q", gcfg.q, "dominant-class fraction");
  gen->add_option("--samples-per-class", gcfg.samples_per_class);
  gen->add_option("--feature-dim", gcfg.feature_dim);
  gen->add_option("--label-noise", gcfg.label_noise);

  // run
  auto* runc = app.add_subcommand("run", "run one config");
  ConfigFlags run_flags;
  run_flags.add(runc);

  // sweep
  auto* sweepc = app.add_subcommand("sweep", "tune eta over a grid");
  ConfigFlags sweep_flags;
  sweep_flags.add(sweepc);
  std::string etas_s, criterion_s = "accuracy";
  sweepc->add_option("--etas", etas_s, "comma-separated eta grid (default 0.005,...,1.0)");
  sweepc->add_option("--criterion", criterion_s, "accuracy | loss");

  // grid
  auto* gridc = app.add_subcommand("grid", "q x budget x algorithm experiment");
  ConfigFlags grid_flags;
  grid_flags.add(gridc);
  std::string q_values_s = "0.1,0.35,0.6,0.85", budgets_s = "256,512,1024",
              algorithms_s = "minibatch_sgd,minibatch_sarah,local_sgd,scaffold,bvr_l_sgd_practical",
              grid_etas_s, grid_criterion_s = "accuracy";
  std::size_t tune_repeats = 1, threads = 0;
  gridc->add_option("--q-values", q_values_s);
  gridc->add_option("--budgets", budgets_s);
  gridc->add_option("--algorithms", algorithms_s);
  gridc->add_option("--etas", grid_etas_s, "eta grid to tune per cell (empty: use --eta)");
  gridc->add_option("--criterion", grid_criterion_s, "accuracy | loss");
  gridc->add_option("--tune-repeats", tune_repeats);
  gridc->add_option("--threads", threads);

  // verify
  auto* verifyc = app.add_subcommand("verify", "run the verification suite");

  // plot
  auto* plotc = app.add_subcommand("plot", "CSV to SVG line chart");
  std::vector<std::string> plot_inputs;
  std::string plot_metric = "train_loss", plot_output = "plot.svg", plot_title;
  bool plot_log_y = false;
  plotc->add_option("inputs", plot_inputs, "summary or record CSV files")->required();
  plotc->add_option("--metric", plot_metric);
  plotc->add_option("--output", plot_output);
  plotc->add_option("--title", plot_title);
  plotc->add_flag("--log-y", plot_log_y);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  const bool seed_given = app.count("--seed") > 0;
  const fs::path out(out_dir);

  try {
    if (*gen) {
      const ClassificationData data = gen_classification(gcfg, seed);
      fs::create_directories(out);
      save_dataset(out / "train.fsim", data.workers);
      save_dataset(out / "test.fsim", {data.test});
      std::cout << fmt::format("wrote {} workers x {} examples ({} discarded) to {}\n",
                               data.workers.size(), data.counts.per_worker, data.discarded,
                               out.string());
      return 0;
    }
    if (*runc) {
      const RunConfig cfg = run_flags.resolve(seed, seed_given);
      return write_run_outputs(out, run(cfg), format);
    }
    if (*sweepc) {
      const RunConfig cfg = sweep_flags.resolve(seed, seed_given);
      const auto etas = etas_s.empty() ? kDefaultEtaGrid : parse_reals(etas_s);
      const SweepResult sw = sweep_eta(cfg, etas, parse_criterion(criterion_s));
      fs::create_directories(out);
      auto table = open_out(out / "sweep.csv");
      table << "eta,score,diverged_repeats\n";
      for (const auto& e : sw.entries) {
        std::size_t div = 0;
        for (const auto& r : e.result.repeats) div += r.status == RunStatus::Diverged;
        table << format_double(e.eta) << ',' << format_double(e.score) << ',' << div << '\n';
        auto s = open_out(out / fmt::format("summary_eta{}.csv", format_double(e.eta)));
        write_summary_csv(s, e.result.summary);
      }
      std::cout << sw.message << '\n';
      return sw.chosen_eta ? 0 : kExitDivergence;
    }
    if (*gridc) {
      GridSpec spec;
      spec.base = grid_flags.resolve(seed, seed_given);
      spec.q_values = parse_reals(q_values_s);
      for (double b : parse_reals(budgets_s)) spec.budgets.push_back(static_cast<std::size_t>(b));
      spec.algorithms = parse_names(algorithms_s);
      spec.etas = parse_reals(grid_etas_s);
      spec.criterion = parse_criterion(grid_criterion_s);
      spec.tune_repeats = tune_repeats;
      spec.threads = threads;
      const GridResult grid = experiment_grid(spec);
      write_grid_outputs(grid, out);
      std::size_t failed = 0;
      for (const auto& c : grid.cells) {
        failed += !c.ok;
        std::cout << fmt::format("q={} B={} {}: {} eta={} best_train_loss={}{}\n", c.q, c.budget,
                                 c.algorithm, c.ok ? "ok" : "failed", c.eta,
                                 format_double(c.best_train_loss.mean),
                                 c.ok ? "" : " (" + c.error + ")");
      }
      return failed ? kExitDivergence : 0;
    }
    if (*verifyc) {
      const auto reports = run_verify_suite(seed);
      fs::create_directories(out);
      auto jsonl = open_out(out / "verify.jsonl");
      bool ok = true;
      std::cout << fmt::format("{:<48} {:<8} {}\n", "check", "status", "key measurement");
      for (const auto& r : reports) {
        jsonl << r.to_json().dump() << '\n';
        ok = ok && r.status != CheckStatus::Fail;
        std::string key;
        if (!r.measured.empty()) {
          const auto& [k, v] = *r.measured.begin();
          key = k + "=" + format_double(v);
        }
        std::cout << fmt::format("{:<48} {:<8} {}\n", r.name, to_string(r.status), key);
      }
      return ok ? 0 : 1;
    }
    if (*plotc) {
      std::vector<Series> series;
      for (const auto& in : plot_inputs) {
        auto [x, y] = read_column(in, plot_metric);
        series.push_back(Series{fs::path(in).stem().string(), x, y, {}, {}});
      }
      ChartSpec spec{plot_title.empty() ? plot_metric : plot_title, "communication round",
                     plot_metric};
      spec.log_y = plot_log_y;
      auto o = open_out(plot_output);
      o << line_chart_svg(spec, series);
      return 0;
    }
  } catch (const BudgetViolation& e) {
    std::cerr << "budget violation: " << e.what() << '\n';
    return kExitBudget;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
