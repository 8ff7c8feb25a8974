#include "fedsim/classification.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

PartitionCounts partition_counts(const ClassPartitionConfig& cfg) {
  if (cfg.P == 0) throw ConfigError("classification: P must be positive");
  if (cfg.num_classes != cfg.P) throw ConfigError("classification: num_classes must equal P");
  const double uniform = 1.0 / static_cast<double>(cfg.P);
  if (cfg.q < uniform - 1e-12)
    throw ConfigError("classification: q below 1/P under-assigns the dominant class");
  if (cfg.q > 1.0) throw ConfigError("classification: q must not exceed 1");
  if (cfg.samples_per_class == 0 || cfg.feature_dim == 0)
    throw ConfigError("classification: samples_per_class and feature_dim must be positive");
  if (cfg.label_noise < 0.0 || cfg.label_noise >= 1.0)
    throw ConfigError("classification: label_noise must lie in [0, 1)");

  PartitionCounts c;
  const auto spc = static_cast<double>(cfg.samples_per_class);
  // The epsilon absorbs representation error in products such as 0.35 * 100.
  c.dominant = std::min(cfg.samples_per_class,
                        static_cast<std::size_t>(std::floor(cfg.q * spc + 1e-9)));
  const std::size_t rest = cfg.samples_per_class - c.dominant;
  c.share = cfg.P > 1 ? rest / (cfg.P - 1) : 0;
  c.discarded_per_class = rest - c.share * (cfg.P - 1);
  c.per_worker = c.dominant + c.share * (cfg.P - 1);
  return c;
}

ClassificationData gen_classification(const ClassPartitionConfig& cfg, std::uint64_t seed) {
  const PartitionCounts counts = partition_counts(cfg);
  const std::size_t C = cfg.num_classes;
  const std::size_t dim = cfg.feature_dim;
  const std::size_t spc = cfg.samples_per_class;
  const std::size_t test_per_class = counts.per_worker;  // test size equals train size
  const RngTree tree(seed);
  Rng rng = tree.stream(Purpose::Data);

  std::vector<std::vector<double>> centres(C, std::vector<double>(dim));
  for (auto& c : centres) {
    double n2 = 0.0;
    for (double& v : c) {
      v = rng.normal();
      n2 += v * v;
    }
    for (double& v : c) v /= std::sqrt(n2);
  }
  auto draw = [&](std::size_t cls, double* out) {
    for (std::size_t j = 0; j < dim; ++j) out[j] = centres[cls][j] + cfg.cluster_std * rng.normal();
  };

  // Class pools: the same draws for every q, so only the partition changes.
  std::vector<std::vector<double>> pools(C, std::vector<double>(spc * dim));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < spc; ++i) draw(c, pools[c].data() + i * dim);
  LabeledData test;
  test.dim = dim;
  test.features.resize(C * test_per_class * dim);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < test_per_class; ++i) {
      draw(c, test.features.data() + (c * test_per_class + i) * dim);
      test.labels.push_back(static_cast<std::int32_t>(c));
    }

  ClassificationData out;
  out.config = cfg;
  out.counts = counts;
  out.discarded = counts.discarded_per_class * C;
  out.workers.resize(cfg.P);
  for (auto& w : out.workers) w.dim = dim;

  Rng part_rng = tree.stream(Purpose::Data, 1);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<std::size_t> order(spc);
    for (std::size_t i = 0; i < spc; ++i) order[i] = i;
    shuffle(order, part_rng);
    std::size_t next = 0;
    auto give = [&](std::size_t worker, std::size_t n) {
      LabeledData& w = out.workers[worker];
      for (std::size_t k = 0; k < n; ++k, ++next) {
        const double* src = pools[c].data() + order[next] * dim;
        w.features.insert(w.features.end(), src, src + dim);
        w.labels.push_back(static_cast<std::int32_t>(c));
      }
    };
    give(c, counts.dominant);
    for (std::size_t p = 0; p < cfg.P; ++p)
      if (p != c) give(p, counts.share);
  }

  // Standardize each coordinate over the kept train pool; reuse for test.
  std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
  std::size_t n = 0;
  for (const auto& w : out.workers)
    for (std::size_t i = 0; i < w.size(); ++i, ++n)
      for (std::size_t j = 0; j < dim; ++j) mean[j] += w.row(i)[j];
  for (double& m : mean) m /= static_cast<double>(n);
  for (const auto& w : out.workers)
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t j = 0; j < dim; ++j) sq[j] += std::pow(w.row(i)[j] - mean[j], 2);
  std::vector<double> factor(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(sq[j] / static_cast<double>(n));
    factor[j] = sd > 0.0 ? cfg.feature_std / sd : 0.0;
  }
  auto normalize = [&](LabeledData& data) {
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        double& v = data.features[i * dim + j];
        v = (v - mean[j]) * factor[j];
      }
  };
  for (auto& w : out.workers) normalize(w);
  normalize(test);
  out.test = std::move(test);

  if (cfg.label_noise > 0.0 && C > 1) {
    Rng noise_rng = tree.stream(Purpose::Data, 2);
    for (auto& w : out.workers)
      for (auto& label : w.labels)
        if (noise_rng.uniform() < cfg.label_noise) {
          const auto other = static_cast<std::int32_t>(noise_rng.below(C - 1));
          label = other >= label ? other + 1 : other;
        }
  }
  return out;
}

std::vector<std::vector<std::size_t>> class_histograms(const ClassificationData& data) {
  std::vector<std::vector<std::size_t>> h(data.workers.size(),
                                          std::vector<std::size_t>(data.config.num_classes, 0));
  for (std::size_t p = 0; p < data.workers.size(); ++p)
    for (auto label : data.workers[p].labels) ++h[p][static_cast<std::size_t>(label)];
  return h;
}

}  // namespace fedsim
