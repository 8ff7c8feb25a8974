#include "fedsim/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fedsim/errors.hpp"

namespace fedsim {
namespace {

static_assert(std::endian::native == std::endian::little,
              "dataset I/O assumes a little-endian host");

constexpr char kMagic[5] = {'F', 'S', 'I', 'M', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ConfigError("dataset: truncated input");
  return v;
}

}  // namespace

void write_dataset(std::ostream& out, const std::vector<LabeledData>& workers) {
  if (workers.empty()) throw ConfigError("dataset: no workers to write");
  const std::size_t d = workers.front().dim;
  out.write(kMagic, sizeof(kMagic));
  put(out, static_cast<std::uint32_t>(workers.size()));
  put(out, static_cast<std::uint32_t>(d));
  for (const auto& w : workers) {
    if (w.dim != d) throw ConfigError("dataset: workers disagree on feature dimension");
    put(out, static_cast<std::uint64_t>(w.size()));
  }
  for (const auto& w : workers) {
    out.write(reinterpret_cast<const char*>(w.features.data()),
              static_cast<std::streamsize>(w.features.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(w.labels.data()),
              static_cast<std::streamsize>(w.labels.size() * sizeof(std::int32_t)));
  }
  if (!out) throw ConfigError("dataset: write failed");
}

std::vector<LabeledData> read_dataset(std::istream& in) {
  char magic[5];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ConfigError("dataset: bad magic, expected FSIM1");
  const auto P = get<std::uint32_t>(in);
  const auto d = get<std::uint32_t>(in);
  std::vector<std::uint64_t> counts(P);
  for (auto& c : counts) c = get<std::uint64_t>(in);
  std::vector<LabeledData> workers(P);
  for (std::uint32_t p = 0; p < P; ++p) {
    LabeledData& w = workers[p];
    w.dim = d;
    w.features.resize(counts[p] * d);
    w.labels.resize(counts[p]);
    if (!in.read(reinterpret_cast<char*>(w.features.data()),
                 static_cast<std::streamsize>(w.features.size() * sizeof(double))) ||
        !in.read(reinterpret_cast<char*>(w.labels.data()),
                 static_cast<std::streamsize>(w.labels.size() * sizeof(std::int32_t))))
      throw ConfigError("dataset: truncated payload");
  }
  return workers;
}

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledData>& workers) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("dataset: cannot open " + path.string());
  write_dataset(out, workers);
}

std::vector<LabeledData> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("dataset: cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace fedsim
