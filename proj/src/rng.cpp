#include "dpi/rng.hpp"

#include <cmath>

namespace dpi::rng {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_double_open() {
  return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double Rng::laplace(double scale) {
  if (scale == 0.0) return 0.0;
  // u is uniform on (-1/2, 1/2), strictly inside, so log1p never sees -1.
  const double u = next_double_open() - 0.5;
  const double mag = -scale * std::log1p(-2.0 * std::fabs(u));
  return u < 0.0 ? -mag : mag;
}

double Rng::exponential(double rate) {
  return -std::log(next_double_open()) / rate;
}

double Rng::normal() {
  const double u1 = next_double_open();
  const double u2 = next_double_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

bool Rng::bernoulli(double p) { return next_double() < p; }

int Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  // Count exponential inter-arrivals within one unit of time.
  double acc = 0.0;
  int k = 0;
  for (;;) {
    acc += exponential(mean);
    if (acc >= 1.0) return k;
    ++k;
  }
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  // Modulo bias is negligible for the bounds used here (\< 2^32).
  return next_u64() % bound;
}

Rng Rng::substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix(seed + kGolden);
  for (std::uint64_t c : path) {
    h = mix(h ^ mix(c + kGolden));
  }
  return Rng(h);
}

}  // namespace dpi::rng
