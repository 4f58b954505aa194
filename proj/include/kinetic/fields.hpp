#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kinetic/phase_point.hpp"

namespace kinetic {

using ScalarFn = std::function<double(double t, std::span<const double> x)>;
using VectorFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

// Space-time scalar field on [0, inf) x R^{2d}. The metadata lets quadrature
// skip axes the field does not depend on.
struct ScalarField {
  ScalarFn fn;
  int d = 1;
  bool time_independent = false;
  std::optional<std::vector<int>> active_axes;  // indices into the stacked 2d vector; unset = all

  double operator()(double t, std::span<const double> x) const { return fn(t, x); }
  double operator()(double t, const PhasePoint& x) const { return fn(t, x.span()); }

  std::vector<int> axes() const;
  ScalarField abs() const;
  ScalarField scaled(double c) const;

  static ScalarField constant(int d, double c);
  static ScalarField zero(int d) { return constant(d, 0.0); }
  // exp(-|(x - centre) / widths|^2 / 2), widths per stacked axis.
  static ScalarField gaussian(const PhasePoint& centre, const Eigen::VectorXd& widths);
};

// Space-time field with values in R^d (a drift in the x1 block).
struct VectorField {
  VectorFn fn;
  int d = 1;
  bool time_independent = false;
  std::optional<std::vector<int>> active_axes;

  void operator()(double t, std::span<const double> x, std::span<double> out) const { fn(t, x, out); }
  Eigen::VectorXd operator()(double t, const PhasePoint& x) const;

  std::vector<int> axes() const;
  ScalarField magnitude() const;
  // Inner product with a fixed vector.
  ScalarField dot(const Eigen::VectorXd& v) const;

  static VectorField zero(int d);
  static VectorField constant(const Eigen::VectorXd& c);
};

}  // namespace kinetic
