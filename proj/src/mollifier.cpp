#include "kinetic/mollifier.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/quadrature.hpp"

namespace kinetic {
namespace {

double raw_bump(double u) {
  const double a = 1.0 - u * u;
  return a > 0.0 ? std::exp(-1.0 / a) : 0.0;
}

double tanh_sinh(const std::function<double(double)>& f, double a, double b) {
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  if (!(b > a)) return 0.0;
  return integrator.integrate(f, a, b);
}

double bump_constant() {
  static const double c = 1.0 / tanh_sinh(raw_bump, -1.0, 1.0);
  return c;
}

double radial_constant(int k) {
  static const double c1 = 1.0 / tanh_sinh(raw_bump, -1.0, 1.0);
  static const double c2 = 1.0 / (2.0 * M_PI * tanh_sinh([](double r) { return r * raw_bump(r); }, 0.0, 1.0));
  static const double c3 = 1.0 / (4.0 * M_PI * tanh_sinh([](double r) { return r * r * raw_bump(r); }, 0.0, 1.0));
  switch (k) {
    case 1:
      return c1;
    case 2:
      return c2;
    case 3:
      return c3;
  }
  throw ArgumentError("radial_bump: dimension above 3 unsupported");
}

}  // namespace

double bump(double u) { return bump_constant() * raw_bump(u); }

double radial_bump(double r, int k) { return radial_constant(k) * raw_bump(r); }

// ---- Mollifier ----------------------------------------------------------

Mollifier::Mollifier(int n, int d, int nodes_per_axis) : n_(n), d_(d) {
  if (n < 1) throw ArgumentError("Mollifier: n must be >= 1");
  if (d < 1) throw ArgumentError("Mollifier: d must be >= 1");
  const quad::Rule& rule = quad::gauss_legendre(nodes_per_axis);
  double total = 0.0;
  for (int i = 0; i < rule.size(); ++i) {
    offsets_.push_back(rule.nodes[i] / n);
    weights_.push_back(rule.weights[i] * bump(rule.nodes[i]));
    total += weights_.back();
  }
  for (double& w : weights_) w /= total;
}

double Mollifier::kernel(double s, std::span<const double> y) const {
  double v = n_ * bump(n_ * s);
  for (double yi : y) v *= n_ * bump(n_ * yi);
  return v;
}

double Mollifier::mass() const {
  // Each axis contributes int n bump(n u) du over (-1/n, 1/n).
  const double n = n_;
  const double axis = tanh_sinh([n](double u) { return n * bump(n * u); }, -1.0 / n, 1.0 / n);
  return std::pow(axis, 1 + 2 * d_);
}

namespace {

// Iterates the tensor product of the mollifier rule over `axes`
// (axis -1 is time) and calls visit(shift_t, shift_x, weight).
template <class Visit>
void tensor_walk(const std::vector<double>& offsets, const std::vector<double>& weights,
                 const std::vector<int>& axes, int n2, Visit&& visit) {
  const int m = static_cast<int>(offsets.size());
  const int k = static_cast<int>(axes.size());
  std::vector<int> idx(k, 0);
  std::vector<double> shift(n2, 0.0);
  while (true) {
    double w = 1.0, st = 0.0;
    std::fill(shift.begin(), shift.end(), 0.0);
    for (int a = 0; a < k; ++a) {
      w *= weights[idx[a]];
      if (axes[a] < 0)
        st = offsets[idx[a]];
      else
        shift[axes[a]] = offsets[idx[a]];
    }
    visit(st, shift, w);
    int a = 0;
    while (a < k && ++idx[a] == m) idx[a++] = 0;
    if (a == k) break;
    if (k == 0) break;
  }
}

}  // namespace

ScalarField Mollifier::apply(const ScalarField& f) const {
  std::vector<int> axes = f.axes();
  if (!f.time_independent) axes.insert(axes.begin(), -1);
  auto offsets = offsets_;
  auto weights = weights_;
  const int n2 = 2 * f.d;
  ScalarField out = f;
  auto fn = f.fn;
  out.fn = [fn, offsets, weights, axes, n2](double t, std::span<const double> x) {
    double acc = 0.0;
    std::vector<double> z(n2);
    tensor_walk(offsets, weights, axes, n2, [&](double st, const std::vector<double>& shift, double w) {
      for (int i = 0; i < n2; ++i) z[i] = x[i] - shift[i];
      acc += w * fn(t - st, z);
    });
    return acc;
  };
  return out;
}

VectorField Mollifier::apply(const VectorField& f) const {
  std::vector<int> axes = f.axes();
  if (!f.time_independent) axes.insert(axes.begin(), -1);
  auto offsets = offsets_;
  auto weights = weights_;
  const int n2 = 2 * f.d, d = f.d;
  VectorField out = f;
  auto fn = f.fn;
  out.fn = [fn, offsets, weights, axes, n2, d](double t, std::span<const double> x, std::span<double> res) {
    std::vector<double> z(n2), tmp(d);
    for (int i = 0; i < d; ++i) res[i] = 0.0;
    tensor_walk(offsets, weights, axes, n2, [&](double st, const std::vector<double>& shift, double w) {
      for (int i = 0; i < n2; ++i) z[i] = x[i] - shift[i];
      fn(t - st, z, tmp);
      for (int i = 0; i < d; ++i) res[i] += w * tmp[i];
    });
  };
  return out;
}

// ---- MollifiedPowerLaw --------------------------------------------------

MollifiedPowerLaw::MollifiedPowerLaw(const PowerLawDrift& law, int n, int d) : law_(law), n_(n), d_(d) {
  if (n < 1) throw ArgumentError("MollifiedPowerLaw: n must be >= 1");
  if (d < 1 || d > 2) throw ArgumentError("MollifiedPowerLaw: d must be 1 or 2");
  if (!(law.alpha >= 1.0 && law.alpha < 4.0 / 3.0)) throw DomainError("MollifiedPowerLaw: alpha must lie in [1, 4/3)");
  fine_max_ = 2.0 / n;
  coarse_max_ = 64.0;
  const int fine_count = 1600;
  fine_h_ = fine_max_ / fine_count;
  coarse_h_ = 5e-3;
  const int coarse_count = static_cast<int>(std::ceil(coarse_max_ / coarse_h_));
  fine_.resize(fine_count + 1);
  for (int i = 0; i <= fine_count; ++i) fine_[i] = compute_profile(i * fine_h_);
  coarse_.resize(coarse_count + 1);
  for (int i = 0; i <= coarse_count; ++i) {
    coarse_[i] = compute_profile(i * coarse_h_);
  }
}

double MollifiedPowerLaw::raw_profile(double r) const { return std::pow(r, 1.0 - law_.alpha); }

double MollifiedPowerLaw::compute_profile(double r) const {
  const double a = law_.alpha;
  const double n = n_;
  if (d_ == 1) {
    // G(r) = int bump(w) sgn(r - w/n) |r - w/n|^{1-a} dw, split at the singular point.
    auto k = [&](double w) {
      const double u = r - w / n;
      const double m = std::abs(u);
      if (m == 0.0) return 0.0;
      return bump(w) * std::copysign(std::pow(m, 1.0 - a), u);
    };
    const double split = n * r;
    if (split < 1.0) return tanh_sinh(k, -1.0, split) + tanh_sinh(k, split, 1.0);
    return tanh_sinh(k, -1.0, 1.0);
  }
  // d = 2, polar coordinates around the evaluation point x = (r, 0):
  // h(r) = int phi(x - w) (w . e) |w|^{-a} dw, w = s (cos b, sin b).
  const double rad = 1.0 / n;
  const double c = radial_constant(2) * n * n;
  const double s_lo = std::max(0.0, r - rad), s_hi = r + rad;
  const quad::Rule srule = s_lo == 0.0 ? quad::jacobi_left_on(64, 2.0 - a, 0.0, s_hi) : quad::legendre_on(64, s_lo, s_hi);
  double total = 0.0;
  for (int i = 0; i < srule.size(); ++i) {
    const double s = srule.nodes[i];
    double bmax = M_PI;
    if (r > 0.0) {
      const double cstar = (r * r + s * s - rad * rad) / (2.0 * r * s);
      if (cstar >= 1.0) continue;
      if (cstar > -1.0) bmax = std::acos(cstar);
    }
    const quad::Rule brule = quad::legendre_on(48, 0.0, bmax);
    double inner = 0.0;
    for (int j = 0; j < brule.size(); ++j) {
      const double b = brule.nodes[j];
      const double px = r - s * std::cos(b), py = -s * std::sin(b);
      const double dist = std::sqrt(px * px + py * py) * n;
      inner += brule.weights[j] * raw_bump(dist) * std::cos(b);
    }
    // 2x for the symmetric half of the circle; s^{1-a} s ds.
    const double radial = s_lo == 0.0 ? 1.0 : std::pow(s, 2.0 - a);
    total += srule.weights[i] * radial * 2.0 * inner;
  }
  return c * total;
}

double MollifiedPowerLaw::profile(double r) const {
  const double m = std::abs(r);
  double v;
  if (m <= fine_max_) {
    const double u = m / fine_h_;
    const size_t i = std::min(static_cast<size_t>(u), fine_.size() - 2);
    const double f = u - i;
    v = (1 - f) * fine_[i] + f * fine_[i + 1];
  } else if (m < coarse_max_) {
    const double u = m / coarse_h_;
    const size_t i = std::min(static_cast<size_t>(u), coarse_.size() - 2);
    const double f = u - i;
    v = (1 - f) * coarse_[i] + f * coarse_[i + 1];
  } else {
    v = raw_profile(m);
  }
  return (d_ == 1 && r < 0) ? -v : v;
}

void MollifiedPowerLaw::kernel(std::span<const double> w, std::span<double> out) const {
  if (d_ == 1) {
    out[0] = profile(w[0]);
    return;
  }
  double r2 = 0.0;
  for (int i = 0; i < d_; ++i) r2 += w[i] * w[i];
  const double r = std::sqrt(r2);
  if (r == 0.0) {
    for (int i = 0; i < d_; ++i) out[i] = 0.0;
    return;
  }
  const double h = profile(r) / r;
  for (int i = 0; i < d_; ++i) out[i] = h * w[i];
}

void MollifiedPowerLaw::value(std::span<const double> x, std::span<double> out) const {
  double w[2], k[2];
  for (int i = 0; i < d_; ++i) out[i] = 0.0;
  for (const auto& term : law_.terms) {
    for (int i = 0; i < d_; ++i) w[i] = x[d_ + i] - (term.center.size() ? term.center[i] : 0.0);
    kernel({w, static_cast<size_t>(d_)}, {k, static_cast<size_t>(d_)});
    for (int i = 0; i < d_; ++i) out[i] += term.gamma * k[i];
  }
}

VectorField MollifiedPowerLaw::field() const {
  auto self = std::make_shared<const MollifiedPowerLaw>(*this);
  VectorField f;
  f.fn = [self](double, std::span<const double> x, std::span<double> out) { self->value(x, out); };
  f.d = d_;
  f.time_independent = true;
  std::vector<int> axes;
  for (int i = 0; i < d_; ++i) axes.push_back(d_ + i);
  f.active_axes = axes;
  return f;
}

ScalarField MollifiedPowerLaw::magnitude() const { return field().magnitude(); }

VectorField tame(const VectorField& f, int n) {
  if (n < 1) throw ArgumentError("tame: n must be >= 1");
  VectorField out = f;
  auto fn = f.fn;
  const double nn = n;
  out.fn = [fn, nn](double t, std::span<const double> x, std::span<double> res) {
    fn(t, x, res);
    double m = 0.0;
    for (double v : res) m += v * v;
    const double scale = 1.0 / (1.0 + std::sqrt(m) / nn);
    for (double& v : res) v *= scale;
  };
  return out;
}

}  // namespace kinetic
