#pragma once
#include <cstddef>
#include <span>
#include <vector>

namespace fedsim {

// out = (1/n) * sum of inputs, summed by a fixed pairwise tree over the input
// index order: [lo, mid) + [mid, hi) with mid = lo + (hi - lo) / 2.
void pairwise_mean(std::span<const std::span<const double>> inputs, std::span<double> out);
std::vector<double> pairwise_mean(const std::vector<std::vector<double>>& inputs);

}  // namespace fedsim
