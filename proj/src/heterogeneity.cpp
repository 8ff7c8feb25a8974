#include "fedsim/heterogeneity.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/quadratic.hpp"

namespace fedsim {
namespace {

bool all_exact(const Problem& problem) {
  return std::all_of(problem.locals.begin(), problem.locals.end(),
                     [](const auto& l) { return l->hessian() != nullptr; });
}

}  // namespace

double estimate_heterogeneity(const Problem& problem, std::size_t probes, std::uint64_t seed,
                              const HeterogeneityOptions& opts) {
  if (probes == 0) throw ConfigError("estimate_heterogeneity: probes must be at least 1");
  const std::size_t P = problem.workers();
  if (P < 2) return 0.0;

  if (all_exact(problem) && !opts.force_probe) {
    double best = 0.0;
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t r = p + 1; r < P; ++r)
        best = std::max(best, spectral_norm_sym(*problem.local(p).hessian() -
                                                *problem.local(r).hessian()));
    return best;
  }

  const std::size_t d = problem.dim();
  Rng rng = RngTree(seed).stream(Purpose::Probe);
  auto point = [&]() {
    if (opts.probe_point) return opts.probe_point(rng);
    ParamVector x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = rng.normal();
    return x;
  };

  std::vector<std::vector<double>> g0(P, std::vector<double>(d));
  std::vector<double> ga(d), gb(d), xs(d), u(d), w(d);
  double best = 0.0;
  for (std::size_t t = 0; t < probes; ++t) {
    const ParamVector x = point();
    for (std::size_t p = 0; p < P; ++p) problem.local(p).full_grad(x.span(), g0[p]);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t r = p + 1; r < P; ++r) {
        double n2 = 0.0;
        for (double& v : u) {
          v = rng.normal();
          n2 += v * v;
        }
        for (double& v : u) v /= std::sqrt(n2);
        double estimate = 0.0;
        for (std::size_t it = 0; it < opts.power_iterations; ++it) {
          for (std::size_t i = 0; i < d; ++i) xs[i] = x[i] + opts.step * u[i];
          problem.local(p).full_grad(xs, ga);
          problem.local(r).full_grad(xs, gb);
          double wn2 = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            w[i] = ((ga[i] - g0[p][i]) - (gb[i] - g0[r][i])) / opts.step;
            wn2 += w[i] * w[i];
          }
          estimate = std::sqrt(wn2);
          if (estimate == 0.0) break;
          for (std::size_t i = 0; i < d; ++i) u[i] = w[i] / estimate;
        }
        best = std::max(best, estimate);
      }
  }
  return best;
}

}  // namespace fedsim
