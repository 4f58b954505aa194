#include "kinetic/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "kinetic/errors.hpp"

namespace kinetic::quad {
namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights mu0 * v0^2.
Rule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
  const Eigen::Index n = diag.size();
  Rule r;
  if (n == 1) {
    r.nodes = {diag[0]};
    r.weights = {mu0};
    return r;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, offdiag, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("Golub-Welsch eigensolver failed");
  r.nodes.resize(n);
  r.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.nodes[i] = es.eigenvalues()[i];
    const double v = es.eigenvectors()(0, i);
    r.weights[i] = mu0 * v * v;
  }
  return r;
}

Rule build_hermite(int n) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd b(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) b[k - 1] = std::sqrt(k / 2.0);
  Rule r = golub_welsch(a, b, std::sqrt(M_PI));
  // Symmetrize to kill eigensolver round-off.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

Rule build_jacobi(int n, double a, double b) {
  if (!(a > -1.0) || !(b > -1.0)) throw DomainError("gauss_jacobi: exponents must exceed -1");
  Eigen::VectorXd diag(n);
  Eigen::VectorXd off(std::max(n - 1, 0));
  const double ab = a + b;
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + ab;
    if (k == 0)
      diag[k] = (b - a) / (ab + 2.0);
    else
      diag[k] = (b * b - a * a) / (s * (s + 2.0));
  }
  for (int k = 1; k < n; ++k) {
    const double s = 2.0 * k + ab;
    double num = 4.0 * k * (k + a) * (k + b) * (k + ab);
    double den = s * s * (s + 1.0) * (s - 1.0);
    if (k == 1 && std::abs(ab + 1.0) < 1e-14) {
      // (k + ab) / (s - 1) -> 1 when a + b = -1.
      num = 4.0 * (1.0 + a) * (1.0 + b);
      den = s * s * (s + 1.0);
    }
    off[k - 1] = std::sqrt(num / den);
  }
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) +
                              std::lgamma(b + 1.0) - std::lgamma(ab + 2.0));
  return golub_welsch(diag, off, mu0);
}

std::mutex cache_mutex;
std::map<std::tuple<int, int, double, double>, Rule> cache;

const Rule& cached(int kind, int n, double a, double b) {
  if (n < 1) throw ArgumentError("quadrature: node count must be >= 1");
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto key = std::make_tuple(kind, n, a, b);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Rule r = kind == 0 ? build_hermite(n) : build_jacobi(n, a, b);
  return cache.emplace(key, std::move(r)).first->second;
}

}  // namespace

const Rule& gauss_hermite(int n) { return cached(0, n, 0.0, 0.0); }
const Rule& gauss_jacobi(int n, double a, double b) { return cached(1, n, a, b); }
const Rule& gauss_legendre(int n) { return cached(1, n, 0.0, 0.0); }

Rule legendre_on(int n, double lo, double hi) {
  const Rule& base = gauss_legendre(n);
  Rule r = base;
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = mid + half * base.nodes[i];
    r.weights[i] = half * base.weights[i];
  }
  return r;
}

Rule jacobi_left_on(int n, double p, double lo, double hi) {
  const Rule& base = gauss_jacobi(n, 0.0, p);
  Rule r = base;
  const double half = 0.5 * (hi - lo);
  const double scale = std::pow(half, p + 1.0);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = lo + half * (1.0 + base.nodes[i]);
    r.weights[i] = scale * base.weights[i];
  }
  return r;
}

Rule hermite_scaled(int n, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("hermite_scaled: lambda must be positive");
  const Rule& base = gauss_hermite(n);
  Rule r = base;
  const double s = 1.0 / std::sqrt(lambda);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = s * base.nodes[i];
    r.weights[i] = s * base.weights[i];
  }
  return r;
}

}  // namespace kinetic::quad

namespace kinetic::quad {

Rule tanh_sinh_left_on(int n, double lo, double hi) {
  if (n < 2) throw ArgumentError("tanh_sinh_left_on: need at least two nodes");
  // t in [-ta, tb]: 1 + tanh reaches ~1e-80 at the singular end, 1 - tanh ~1e-13 at the other.
  const double ta = 4.8, tb = 3.0;
  const double h = (ta + tb) / (n - 1);
  const double half = 0.5 * (hi - lo);
  Rule r;
  for (int i = 0; i < n; ++i) {
    const double t = -ta + i * h;
    const double u = 0.5 * M_PI * std::sinh(t);
    // 1 + tanh(u) without cancellation.
    const double e = std::exp(-2.0 * std::abs(u));
    const double onep = u < 0 ? 2.0 * e / (1.0 + e) : 2.0 / (1.0 + e);
    const double ch = std::cosh(u);
    r.nodes.push_back(lo + half * onep);
    r.weights.push_back(h * half * 0.5 * M_PI * std::cosh(t) / (ch * ch));
  }
  return r;
}

Rule exp_sinh_gaussian(int n, double lambda) {
  if (n < 2) throw ArgumentError("exp_sinh_gaussian: need at least two nodes");
  if (!(lambda > 0.0)) throw DomainError("exp_sinh_gaussian: lambda must be positive");
  // u = exp(pi/2 sinh t) / sqrt(lambda), from u ~ 1e-40 to lambda u^2 = 60.
  const double ta = std::asinh(2.0 * std::log(1e-40) / M_PI);
  const double tb = std::asinh(2.0 * std::log(std::sqrt(60.0)) / M_PI);
  const double h = (tb - ta) / (n - 1);
  const double s = 1.0 / std::sqrt(lambda);
  Rule r;
  for (int i = 0; i < n; ++i) {
    const double t = ta + i * h;
    const double u = s * std::exp(0.5 * M_PI * std::sinh(t));
    r.nodes.push_back(u);
    r.weights.push_back(h * 0.5 * M_PI * std::cosh(t) * u * std::exp(-lambda * u * u));
  }
  return r;
}

}  // namespace kinetic::quad
