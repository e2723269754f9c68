#pragma once

#include <cstdint>
#include <initializer_list>

namespace dpi::rng {

// Counter-based generator: splitmix64 applied to an incrementing counter.
//
// Substreams are derived by hashing a key path into the base seed, so any
// tuple such as (replication, agent, round, state, time) owns an independent
// stream. Results therefore do not depend on the order in which streams are
// consumed, which is what makes replicated experiments reproducible
// independently of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double next_double();
  // Uniform on (0, 1): never returns an exact endpoint, safe under log().
  double next_double_open();

  // Laplace(0, scale) by inverse CDF. scale == 0 returns exactly 0.
  double laplace(double scale);
  // Exponential with the given rate (mean 1/rate), strictly positive.
  double exponential(double rate);
  // Standard normal (Box-Muller).
  double normal();
  bool bernoulli(double p);
  // Poisson(mean) by exponential inter-arrival counting (small means).
  int poisson(double mean);
  // Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound);

  // Derive an independent generator keyed by (seed, path...).
  static Rng substream(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> path);

 private:
  std::uint64_t state_;
};

}  // namespace dpi::rng
