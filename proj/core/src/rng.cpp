#include "rsmi/rng.hpp"

#include <stdexcept>

#include "rsmi/normal.hpp"

namespace rsmi {

namespace {

constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer; bijective on 64-bit words.
uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  base_ = mix64(mix64(seed + kGamma) ^ mix64(stream_id * kGamma + 0x243F6A8885A308D3ULL));
}

uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(base_ + counter_ * kGamma);
}

double RngStream::next_uniform() {
  // 53-bit mantissa shifted into (0, 1): never returns an endpoint.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_gaussian(double sigma) {
  double u = next_uniform();
  return sigma * inv_norm_cdf(u);
}

uint64_t RngStream::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::next_below: n must be positive");
  uint64_t min = (~n + 1) % n;  // (2^64 - n) mod n
  for (;;) {
    uint64_t v = next_u64();
    if (v >= min) return v % n;
  }
}

std::vector<double> gaussian_vector(RngStream& rng, int n, double sigma) {
  if (n < 0) throw std::invalid_argument("gaussian_vector: n must be non-negative");
  if (sigma < 0) throw std::invalid_argument("gaussian_vector: sigma must be non-negative");
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = rng.next_gaussian(sigma);
  return out;
}

}  // namespace rsmi
