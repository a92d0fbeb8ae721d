#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace qlink {

/// Deterministic random stream derived from a 64-bit master seed plus a
/// stream name. Every consumer of randomness owns its own named stream, so
/// adding draws in one module never perturbs another module's sequence.
///
/// The generator is xoshiro256** seeded through splitmix64; distributions
/// are implemented here rather than with <random> so that identical seeds
/// give identical sequences on every platform and standard library.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view stream_name);

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  bool bernoulli(double p);

  /// Standard normal via Box-Muller (cached second variate).
  double gauss();
  double gauss(double mean, double sigma);

  /// Poisson count; exact inversion for small means, rounded normal
  /// approximation above 64 (relative error < 1e-3 there, far below the
  /// statistical noise of anything we sample at that scale).
  std::int64_t poisson(double mean);

  /// Exponential with the given mean.
  double exponential(double mean);

 private:
  std::uint64_t s_[4];
  double cached_gauss_ = 0.0;
  bool has_cached_gauss_ = false;
};

}  // namespace qlink
