#pragma once

#include <cstdint>
#include <random>

namespace uqf {

/// Reproducible random stream keyed by (base_seed, stream_id).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distribution transforms are done here rather than through
/// <random> distributions, which are implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t base_seed, std::uint64_t stream_id);

  std::uint64_t base_seed() const noexcept { return base_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (one value per call).
  double normal();

  /// A child stream whose id is mixed from this stream's id and `tag`.
  RngStream child(std::uint64_t tag) const;

 private:
  std::uint64_t base_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive stream ids from structured keys.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace uqf
