#pragma once

#include <array>
#include <cstdint>

namespace kinetic::rng {

using Counter = std::array<uint32_t, 4>;
using Key = std::array<uint32_t, 2>;

// Philox4x32 with 10 rounds.
Counter philox4x32(Counter ctr, Key key);

// Maps 53 random bits to the open interval (0, 1).
inline double to_open_unit(uint32_t hi, uint32_t lo) {
  const uint64_t bits = (static_cast<uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// Inverse standard normal CDF (Wichura AS241, ~1e-16 relative).
double normal_quantile(double p);

// Reproducible standard normals for one (seed, stream) pair, addressed by
// draw index. Two normals per generator call; the last block is cached.
class NormalStream {
 public:
  NormalStream(uint64_t seed, uint64_t stream);
  double at(uint64_t index);

 private:
  Key key_;
  uint32_t stream_lo_, stream_hi_;
  uint64_t cached_block_ = ~uint64_t{0};
  double cached_[2] = {0.0, 0.0};
};

// Uniforms on (0, 1) addressed the same way.
class UniformStream {
 public:
  UniformStream(uint64_t seed, uint64_t stream);
  double at(uint64_t index);

 private:
  Key key_;
  uint32_t stream_lo_, stream_hi_;
  uint64_t cached_block_ = ~uint64_t{0};
  double cached_[2] = {0.0, 0.0};
};

}  // namespace kinetic::rng
