#pragma once

#include <vector>

namespace kinetic::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

// Weight exp(-x^2) on the real line.
const Rule& gauss_hermite(int n);
// Weight (1-x)^a (1+x)^b on [-1, 1], a, b > -1.
const Rule& gauss_jacobi(int n, double a, double b);
// Unit weight on [-1, 1].
const Rule& gauss_legendre(int n);

// Unit weight on [lo, hi].
Rule legendre_on(int n, double lo, double hi);
// Weight (x - lo)^p on [lo, hi], p > -1.
Rule jacobi_left_on(int n, double p, double lo, double hi);
// Weight exp(-lambda x^2) on the real line.
Rule hermite_scaled(int n, double lambda);

// Double-exponential rules, robust to algebraic endpoint singularities.
// Unit weight on [lo, hi], nodes clustered at lo.
Rule tanh_sinh_left_on(int n, double lo, double hi);
// Weight exp(-lambda u^2) on (0, inf), nodes clustered at 0.
Rule exp_sinh_gaussian(int n, double lambda);

}  // namespace kinetic::quad
