#pragma once

#include <cstdint>
#include <string_view>

namespace feater {

// Counter-based deterministic random source. A stream is (key, counter);
// draw i depends only on the key and i, so identical seeds give identical
// sequences regardless of what other streams did. Substreams are derived
// from a purpose label so masking, init and data generation stay
// independently reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // New independent stream keyed by (this stream's key, label).
  RngStream substream(std::string_view label) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double next_uniform();
  double uniform_range(double lo, double hi);
  // Standard normal via Box-Muller; consumes exactly two draws.
  double next_normal();
  double normal(double mean, double stddev);
  // Uniform integer in [0, n), unbiased. n must be positive.
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_ = 0;     // as given by the user, for reporting
  std::uint64_t key_ = 0;      // mixed key actually driving the stream
  std::uint64_t counter_ = 0;  // draw position
};

}  // namespace feater
