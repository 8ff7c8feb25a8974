#include "fedsim/rng.hpp"

#include <cmath>
#include <numbers>

#include "fedsim/errors.hpp"

namespace fedsim {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_key(std::uint64_t root, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                      std::uint64_t d) {
  std::uint64_t state = root;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t part : {a, b, c, d}) {
    state = h ^ (part + 0x632BE59BD9B4E019ULL);
    h = splitmix64(state);
  }
  return h;
}

std::size_t Rng::below(std::size_t n) {
  const std::uint64_t range = n;
  std::uint64_t x = next();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      x = next();
      m = static_cast<unsigned __int128>(x) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t pick_uniform(std::size_t universe, Rng& selector) {
  if (universe == 0) throw ConfigError("pick_uniform: empty universe");
  return selector.below(universe);
}

}  // namespace fedsim
