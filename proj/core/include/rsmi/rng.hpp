#pragma once

#include <cstdint>
#include <vector>

namespace rsmi {

// Counter-based stream built on the SplitMix64 finalizer (Steele/Lea/Vigna).
// Draw i of a stream is a pure function of (seed, stream_id, i), so any
// sequence replays bit-exactly across runs and platforms, and streams with
// distinct stream_ids can be handed to concurrent tasks without coordination.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(uint64_t seed, uint64_t stream_id);

  uint64_t next_u64();

  // Uniform draw in the open interval (0, 1).
  double next_uniform();

  // One draw from N(0, sigma^2) via the inverse-CDF transform of a uniform
  // draw. sigma = 0 yields exact zero while still consuming one draw.
  double next_gaussian(double sigma);

  // Unbiased uniform integer in [0, n). n must be positive.
  uint64_t next_below(uint64_t n);

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }
  uint64_t draws() const { return counter_; }

 private:
  uint64_t seed_ = 0;
  uint64_t stream_id_ = 0;
  uint64_t base_ = 0;
  uint64_t counter_ = 0;
};

// n independent draws from N(0, sigma^2). sigma = 0 is legal and yields zeros.
std::vector<double> gaussian_vector(RngStream& rng, int n, double sigma);

}  // namespace rsmi
