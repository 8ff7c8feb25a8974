#pragma once
// Synthetic class-imbalanced local datasets. Worker p receives a q fraction
// of class p and an equal share of every other class; q = 1/P gives uniform
// class histograms on every worker.

#include <cstdint>
#include <vector>

namespace fedsim {

struct ClassPartitionConfig {
  std::size_t P = 10;
  double q = 0.1;
  std::size_t num_classes = 10;  // must equal P
  std::size_t samples_per_class = 100;
  std::size_t feature_dim = 50;
  double label_noise = 0.0;
  // Isotropic noise around the unit-norm class centres, before normalization.
  double cluster_std = 0.5;
  // Every feature coordinate is standardized to mean 0 and this deviation.
  double feature_std = 0.5;
};

struct LabeledData {
  std::size_t dim = 0;
  std::vector<double> features;  // row-major, size() x dim
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  const double* row(std::size_t i) const { return features.data() + i * dim; }
};

struct PartitionCounts {
  std::size_t dominant = 0;        // class-p examples kept on worker p
  std::size_t share = 0;           // class-p examples sent to each other worker
  std::size_t discarded_per_class = 0;
  std::size_t per_worker = 0;
};

struct ClassificationData {
  ClassPartitionConfig config;
  std::vector<LabeledData> workers;
  LabeledData test;
  PartitionCounts counts;
  std::size_t discarded = 0;
};

// Throws ConfigError for q < 1/P, q > 1 or num_classes != P.
PartitionCounts partition_counts(const ClassPartitionConfig& cfg);
ClassificationData gen_classification(const ClassPartitionConfig& cfg, std::uint64_t seed);

// Per-worker class histogram.
std::vector<std::vector<std::size_t>> class_histograms(const ClassificationData& data);

}  // namespace fedsim
