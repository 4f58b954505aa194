#include "kinetic/rng.hpp"

#include <cmath>

namespace kinetic::rng {
namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

inline Counter round(const Counter& c, const Key& k) {
  uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kMul0, c[0], hi0, lo0);
  mulhilo(kMul1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

// Tags keep normal and uniform streams of the same (seed, stream) apart.
constexpr uint32_t kNormalTag = 0x4e4f524du;
constexpr uint32_t kUniformTag = 0x554e4946u;

}  // namespace

Counter philox4x32(Counter ctr, Key key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    ctr = round(ctr, key);
  }
  return ctr;
}

double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

NormalStream::NormalStream(uint64_t seed, uint64_t stream)
    : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
      stream_lo_(static_cast<uint32_t>(stream)),
      stream_hi_(static_cast<uint32_t>(stream >> 32) ^ kNormalTag) {}

double NormalStream::at(uint64_t index) {
  const uint64_t block = index >> 1;
  if (block != cached_block_) {
    const Counter out = philox4x32(
        {static_cast<uint32_t>(block), static_cast<uint32_t>(block >> 32), stream_lo_, stream_hi_}, key_);
    cached_[0] = normal_quantile(to_open_unit(out[0], out[1]));
    cached_[1] = normal_quantile(to_open_unit(out[2], out[3]));
    cached_block_ = block;
  }
  return cached_[index & 1];
}

UniformStream::UniformStream(uint64_t seed, uint64_t stream)
    : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
      stream_lo_(static_cast<uint32_t>(stream)),
      stream_hi_(static_cast<uint32_t>(stream >> 32) ^ kUniformTag) {}

double UniformStream::at(uint64_t index) {
  const uint64_t block = index >> 1;
  if (block != cached_block_) {
    const Counter out = philox4x32(
        {static_cast<uint32_t>(block), static_cast<uint32_t>(block >> 32), stream_lo_, stream_hi_}, key_);
    cached_[0] = to_open_unit(out[0], out[1]);
    cached_[1] = to_open_unit(out[2], out[3]);
    cached_block_ = block;
  }
  return cached_[index & 1];
}

}  // namespace kinetic::rng
