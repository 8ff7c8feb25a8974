#pragma once
// Flat binary dataset format, little-endian:
//   magic   "FSIM1"             5 bytes
//   P       uint32              worker count
//   d       uint32              feature dimension
//   counts  uint64[P]           examples per worker
//   then for each worker: counts[p] * d float64 features (row-major),
//                         counts[p] int32 labels

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "fedsim/classification.hpp"

namespace fedsim {

void write_dataset(std::ostream& out, const std::vector<LabeledData>& workers);
std::vector<LabeledData> read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledData>& workers);
std::vector<LabeledData> load_dataset(const std::filesystem::path& path);

}  // namespace fedsim
