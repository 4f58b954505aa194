#include "kinetic/kde.hpp"

#include <cmath>

#include "kinetic/errors.hpp"
#include "blocked_sum.hpp"

namespace kinetic {

KdeEstimator::KdeEstimator(const PathEnsemble& ens, size_t ti, double c, long max_samples) : d_(ens.dim()) {
  m_ = max_samples > 0 ? std::min(max_samples, ens.paths()) : ens.paths();
  if (m_ < 10000) throw ArgumentError("kde: need at least 1e4 paths");
  const int n2 = 2 * d_;
  mean_ = Eigen::VectorXd::Zero(n2);
  for (long p = 0; p < m_; ++p) {
    auto s = ens.state(p, ti);
    for (int a = 0; a < n2; ++a) mean_[a] += s[a];
  }
  mean_ /= m_;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n2, n2);
  Eigen::VectorXd z(n2);
  for (long p = 0; p < m_; ++p) {
    auto s = ens.state(p, ti);
    for (int a = 0; a < n2; ++a) z[a] = s[a] - mean_[a];
    cov.noalias() += z * z.transpose();
  }
  cov /= (m_ - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("kde: sample covariance is singular");
  const Eigen::MatrixXd L = llt.matrixL();
  whiten_ = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n2, n2));
  h_ = c * std::pow(static_cast<double>(m_), -1.0 / (2 * d_ + 4));
  double logdet = 0.0;
  for (int a = 0; a < n2; ++a) logdet -= std::log(L(a, a));
  log_scale_ = logdet - d_ * std::log(2.0 * M_PI * h_ * h_);
  white_.resize(static_cast<size_t>(m_) * n2);
  for (long p = 0; p < m_; ++p) {
    auto s = ens.state(p, ti);
    for (int a = 0; a < n2; ++a) z[a] = s[a] - mean_[a];
    const Eigen::VectorXd u = whiten_ * z;
    for (int a = 0; a < n2; ++a) white_[p * n2 + a] = u[a];
  }
}

KdeValue KdeEstimator::operator()(const PhasePoint& y) const { return (*this)(y.span()); }

KdeValue KdeEstimator::operator()(std::span<const double> y) const {
  const int n2 = 2 * d_;
  Eigen::VectorXd z(n2);
  for (int a = 0; a < n2; ++a) z[a] = y[a] - mean_[a];
  const Eigen::VectorXd u = whiten_ * z;
  const double inv = -0.5 / (h_ * h_);
  const auto [sum, sumsq] = detail::blocked_sum2(m_, [&](long p) {
    double r2 = 0.0;
    for (int a = 0; a < n2; ++a) {
      const double e = u[a] - white_[p * n2 + a];
      r2 += e * e;
    }
    return std::exp(log_scale_ + inv * r2);
  });
  KdeValue v;
  v.estimate = sum / m_;
  v.std_error = std::sqrt(std::max(0.0, sumsq / m_ - v.estimate * v.estimate) / (m_ - 1));
  return v;
}

double KdeEstimator::mass(double half_width, int points_per_axis) const {
  const int n2 = 2 * d_;
  const double step = 2.0 * half_width / points_per_axis;
  // Midpoint rule in whitened coordinates; dy = |det L| du.
  const Eigen::MatrixXd L = whiten_.inverse();
  const double jac = std::abs(L.determinant());
  std::vector<int> idx(n2, 0);
  Eigen::VectorXd u(n2);
  double total = 0.0;
  while (true) {
    for (int a = 0; a < n2; ++a) u[a] = -half_width + (idx[a] + 0.5) * step;
    const Eigen::VectorXd y = mean_ + L * u;
    total += (*this)(std::span<const double>(y.data(), n2)).estimate;
    int a = 0;
    while (a < n2 && ++idx[a] == points_per_axis) idx[a++] = 0;
    if (a == n2) break;
  }
  return total * jac * std::pow(step, n2);
}

KdeValue kde_density(const PathEnsemble& ens, double t, const PhasePoint& y, double c) {
  return KdeEstimator(ens, ens.time_index(t), c)(y);
}

namespace {

SandwichPoint polar_point(const KdeEstimator& kde, const PhasePoint& theta, double tau, double radius, double angle) {
  const int d = theta.dim();
  // Offset in scaled coordinates along the first velocity and position axes.
  PhasePoint w(d);
  w[0] = radius * std::cos(angle);
  w[d] = radius * std::sin(angle);
  const PhasePoint off = ScaleMatrix(tau).apply_inverse(w);
  SandwichPoint sp;
  sp.y = theta - off;
  sp.scaled_sq = radius * radius;
  const KdeValue v = kde(sp.y);
  sp.estimate = v.estimate;
  sp.std_error = v.std_error;
  return sp;
}

double quadratic_r_squared(const std::vector<Eigen::VectorXd>& w, const std::vector<double>& logp) {
  const int n = static_cast<int>(w.front().size());
  const int cols = 1 + n + n * (n + 1) / 2;
  const int rows = static_cast<int>(w.size());
  if (rows <= cols) throw PreconditionError("verify_two_sided: regression underdetermined");
  Eigen::MatrixXd X(rows, cols);
  Eigen::VectorXd Y(rows);
  for (int i = 0; i < rows; ++i) {
    int c = 0;
    X(i, c++) = 1.0;
    for (int a = 0; a < n; ++a) X(i, c++) = w[i][a];
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) X(i, c++) = w[i][a] * w[i][b];
    Y[i] = logp[i];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
  const double ss_res = (Y - X * beta).squaredNorm();
  const double ss_tot = (Y.array() - Y.mean()).square().sum();
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
}

}  // namespace

TwoSidedReport verify_two_sided(const PathEnsemble& ens, double t, const FlowMap& flow_map, double s,
                                const PhasePoint& x, const TwoSidedOptions& opt) {
  if (!(t > s)) throw DomainError("verify_two_sided: requires t > s");
  if (opt.angles < 4 || opt.calibration_radii.empty() || opt.test_radii.empty())
    throw PreconditionError("verify_two_sided: regression underdetermined");
  const int d = ens.dim();
  const double tau = t - s;
  const size_t ti = ens.time_index(t);
  const KdeEstimator kde(ens, ti, opt.bandwidth_c);
  const PhasePoint theta = flow(flow_map, s, t, x);
  const double pref = std::pow(tau, -2.0 * d);

  const KdeValue centre = kde(theta);
  if (!(centre.estimate > 0.0)) throw NumericalError("verify_two_sided: zero density at the flow point");
  const double logc = std::log(centre.estimate);

  TwoSidedReport rep;
  double lam_hi = -INFINITY, lam_lo = INFINITY;
  for (double rad : opt.calibration_radii)
    for (int k = 0; k < opt.angles; ++k) {
      SandwichPoint sp = polar_point(kde, theta, tau, rad, 2.0 * M_PI * k / opt.angles);
      if (!(sp.estimate > 0.0)) throw NumericalError("verify_two_sided: zero density on the calibration grid");
      const double ratio = (logc - std::log(sp.estimate)) / sp.scaled_sq;
      lam_hi = std::max(lam_hi, ratio);
      lam_lo = std::min(lam_lo, ratio);
      rep.calibration.push_back(sp);
    }
  const Calibration cal{opt.calibration_seed ? opt.calibration_seed : ens.seed(), "kde-polar-calibration",
                        ens.paths()};
  const double C = centre.estimate / pref;
  rep.C0 = {"C0", C, cal};
  rep.C1 = {"C1", C, cal};
  rep.lambda0 = {"lambda0", lam_hi, cal};
  rep.lambda1 = {"lambda1", lam_lo, cal};

  auto bounds = [&](SandwichPoint& sp) {
    sp.lower = centre.estimate * std::exp(-lam_hi * sp.scaled_sq);
    sp.upper = centre.estimate * std::exp(-lam_lo * sp.scaled_sq);
    const double rel = centre.std_error / centre.estimate;
    const double sl = std::hypot(sp.std_error, rel * sp.lower);
    const double su = std::hypot(sp.std_error, rel * sp.upper);
    sp.ok = sp.estimate >= sp.lower - opt.sigmas * sl && sp.estimate <= sp.upper + opt.sigmas * su;
  };
  for (auto& sp : rep.calibration) bounds(sp);
  for (double rad : opt.test_radii)
    for (int k = 0; k < opt.angles; ++k) {
      SandwichPoint sp = polar_point(kde, theta, tau, rad, 2.0 * M_PI * (k + 0.5) / opt.angles);
      bounds(sp);
      rep.all_ok = rep.all_ok && sp.ok;
      rep.test.push_back(sp);
    }

  std::vector<Eigen::VectorXd> w;
  std::vector<double> logp;
  const ScaleMatrix T(tau);
  auto add = [&](const PhasePoint& y, double est) {
    if (!(est > 0.0)) return;
    w.push_back(T.apply(theta - y).vec());
    logp.push_back(std::log(est));
  };
  add(theta, centre.estimate);
  for (const auto& sp : rep.calibration) add(sp.y, sp.estimate);
  for (const auto& sp : rep.test) add(sp.y, sp.estimate);
  // Only the sampled plane carries information; restrict to its two coordinates.
  for (auto& v : w) v = Eigen::Vector2d(v[0], v[d]);
  rep.r_squared = quadratic_r_squared(w, logp);

  rep.kde_mass = -1.0;
  if (d == 1) rep.kde_mass = KdeEstimator(ens, ti, opt.bandwidth_c, 20000).mass(6.0, 48);
  return rep;
}

}  // namespace kinetic
