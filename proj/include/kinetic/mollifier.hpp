#pragma once

#include <memory>
#include <vector>

#include "kinetic/fields.hpp"
#include "kinetic/flow.hpp"

namespace kinetic {

// Normalized 1-D bump c exp(-1/(1-u^2)) on (-1, 1).
double bump(double u);
// Normalized radial bump on the unit ball of R^k.
double radial_bump(double r, int k);

// phi_n(t, x) = n^{1+2d} prod_i bump(n z_i): tensor-product kernel on R^{1+2d}.
class Mollifier {
 public:
  Mollifier(int n, int d, int nodes_per_axis = 12);

  int n() const { return n_; }
  int dim() const { return d_; }
  double radius() const { return 1.0 / n_; }
  // phi_n evaluated at the space-time offset (s, y).
  double kernel(double s, std::span<const double> y) const;
  // Mass of the scaled kernel by quadrature over its support.
  double mass() const;

  // Tensor quadrature over the support on the axes the field depends on.
  ScalarField apply(const ScalarField& f) const;
  VectorField apply(const VectorField& f) const;

 private:
  int n_;
  int d_;
  std::vector<double> offsets_;  // quadrature offsets on (-1/n, 1/n)
  std::vector<double> weights_;  // normalized to sum 1
};

// Accurately mollified power-law drift (singularity handled by split
// quadrature), tabulated for fast evaluation. d = 1 uses the tensor kernel
// (which is radial in one dimension); d >= 2 uses a radial kernel.
class MollifiedPowerLaw {
 public:
  MollifiedPowerLaw(const PowerLawDrift& law, int n, int d);

  int n() const { return n_; }
  // Mollified pair kernel k(w) = w |w|^{-alpha} evaluated on a d-vector.
  void kernel(std::span<const double> w, std::span<double> out) const;
  // The full mollified drift b1_n on a phase point.
  void value(std::span<const double> x, std::span<double> out) const;
  VectorField field() const;
  ScalarField magnitude() const;
  // Radial profile h with k_n(w) = h(|w|) w/|w| (d >= 2); signed profile for d = 1.
  double profile(double r) const;

 private:
  double raw_profile(double r) const;
  double compute_profile(double r) const;

  PowerLawDrift law_;
  int n_;
  int d_;
  // Two-tier table on [0, fine_max] and [0, coarse_max]; raw beyond.
  double fine_max_, coarse_max_, fine_h_, coarse_h_;
  std::vector<double> fine_, coarse_;
};

// Taming b -> b / (1 + |b|/n).
VectorField tame(const VectorField& f, int n);

}  // namespace kinetic
