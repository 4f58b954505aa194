#include "kinetic/fields.hpp"

#include <cmath>
#include <numeric>

#include "kinetic/errors.hpp"

namespace kinetic {
namespace {

std::vector<int> all_axes(int d) {
  std::vector<int> a(2 * d);
  std::iota(a.begin(), a.end(), 0);
  return a;
}

}  // namespace

std::vector<int> ScalarField::axes() const { return active_axes ? *active_axes : all_axes(d); }

ScalarField ScalarField::abs() const {
  ScalarField out = *this;
  auto f = fn;
  out.fn = [f](double t, std::span<const double> x) { return std::abs(f(t, x)); };
  return out;
}

ScalarField ScalarField::scaled(double c) const {
  ScalarField out = *this;
  auto f = fn;
  out.fn = [f, c](double t, std::span<const double> x) { return c * f(t, x); };
  return out;
}

ScalarField ScalarField::constant(int d, double c) {
  ScalarField f;
  f.fn = [c](double, std::span<const double>) { return c; };
  f.d = d;
  f.time_independent = true;
  f.active_axes = std::vector<int>{};
  return f;
}

ScalarField ScalarField::gaussian(const PhasePoint& centre, const Eigen::VectorXd& widths) {
  const int n2 = static_cast<int>(centre.vec().size());
  if (widths.size() != n2 || !(widths.array() > 0.0).all())
    throw ArgumentError("ScalarField::gaussian: need one positive width per axis");
  ScalarField f;
  const Eigen::VectorXd c = centre.vec();
  const Eigen::VectorXd inv = widths.cwiseInverse();
  f.fn = [c, inv](double, std::span<const double> x) {
    double q = 0.0;
    for (int a = 0; a < c.size(); ++a) {
      const double u = (x[a] - c[a]) * inv[a];
      q += u * u;
    }
    return std::exp(-0.5 * q);
  };
  f.d = n2 / 2;
  f.time_independent = true;
  return f;
}

std::vector<int> VectorField::axes() const { return active_axes ? *active_axes : all_axes(d); }

Eigen::VectorXd VectorField::operator()(double t, const PhasePoint& x) const {
  Eigen::VectorXd out(d);
  fn(t, x.span(), {out.data(), static_cast<size_t>(d)});
  return out;
}

ScalarField VectorField::magnitude() const {
  ScalarField s;
  auto f = fn;
  const int dd = d;
  s.fn = [f, dd](double t, std::span<const double> x) {
    double buf[8];
    std::vector<double> heap;
    double* out = buf;
    if (dd > 8) {
      heap.resize(dd);
      out = heap.data();
    }
    f(t, x, {out, static_cast<size_t>(dd)});
    double acc = 0.0;
    for (int i = 0; i < dd; ++i) acc += out[i] * out[i];
    return std::sqrt(acc);
  };
  s.d = d;
  s.time_independent = time_independent;
  s.active_axes = active_axes;
  return s;
}

ScalarField VectorField::dot(const Eigen::VectorXd& v) const {
  ScalarField s;
  auto f = fn;
  const int dd = d;
  s.fn = [f, dd, v](double t, std::span<const double> x) {
    Eigen::VectorXd out(dd);
    f(t, x, {out.data(), static_cast<size_t>(dd)});
    return out.dot(v);
  };
  s.d = d;
  s.time_independent = time_independent;
  s.active_axes = active_axes;
  return s;
}

VectorField VectorField::zero(int d) {
  VectorField v;
  v.fn = [](double, std::span<const double>, std::span<double> out) {
    for (double& o : out) o = 0.0;
  };
  v.d = d;
  v.time_independent = true;
  v.active_axes = std::vector<int>{};
  return v;
}

VectorField VectorField::constant(const Eigen::VectorXd& c) {
  VectorField v;
  v.fn = [c](double, std::span<const double>, std::span<double> out) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = c[static_cast<Eigen::Index>(i)];
  };
  v.d = static_cast<int>(c.size());
  v.time_independent = true;
  v.active_axes = std::vector<int>{};
  return v;
}

}  // namespace kinetic
