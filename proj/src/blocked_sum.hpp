#pragma once

#include <algorithm>
#include <utility>
#include <vector>

namespace kinetic::detail {

// Sum and sum of squares of item(i) over [0, n). The range is cut into a fixed
// number of blocks so the result does not depend on the thread count.
template <class Item>
std::pair<double, double> blocked_sum2(long n, Item&& item) {
  constexpr long kBlocks = 256;
  const long blocks = std::max(1L, std::min(kBlocks, n));
  std::vector<double> sums(blocks, 0.0), squares(blocks, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < blocks; ++b) {
    const long lo = n * b / blocks, hi = n * (b + 1) / blocks;
    double s = 0.0, q = 0.0;
    for (long i = lo; i < hi; ++i) {
      const double v = item(i);
      s += v;
      q += v * v;
    }
    sums[b] = s;
    squares[b] = q;
  }
  double s = 0.0, q = 0.0;
  for (long b = 0; b < blocks; ++b) {
    s += sums[b];
    q += squares[b];
  }
  return {s, q};
}

}  // namespace kinetic::detail
