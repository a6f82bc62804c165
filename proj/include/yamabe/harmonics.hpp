// Real spherical harmonics on S^2, product Gauss-Legendre x uniform-longitude
// quadrature, and mode analysis/synthesis. Mode ordering convention:
//   j = 0            : constant (l = 0)
//   j = 1, 2, 3      : the coordinate functions x, y, z (l = 1)
//   j > 3            : ordered by (l, m), m = -l..l
// Eigenvalues of -Laplace_{S^2}: lambda_j = l(l+1).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "yamabe/core.hpp"

namespace yamabe {

struct SphericalMode {
  int j = 0, l = 0, m = 0;
  double lambda = 0;  // l(l+1)
};

namespace detail {
// Associated Legendre P_l^m(x) with the (1-x^2)^{m/2} factor, no
// Condon-Shortley phase; m >= 0.
inline double assoc_legendre(int l, int m, double x) {
  double somx2 = std::sqrt(std::max(0.0, 1.0 - x * x));
  double pmm = 1.0;
  for (int i = 1; i <= m; ++i) pmm *= (2 * i - 1) * somx2;
  if (l == m) return pmm;
  double pmmp1 = x * (2 * m + 1) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2 * ll - 1) * pmmp1 - (ll + m - 1) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

// theta-derivative: dP_l^m(cos theta)/dtheta, valid away from the poles.
inline double assoc_legendre_dtheta(int l, int m, double ct, double st) {
  double p = assoc_legendre(l, m, ct);
  double pm1 = (l - 1 >= m) ? assoc_legendre(l - 1, m, ct) : 0.0;
  // d/dtheta P_l^m(cos th) = (l ct P_l^m - (l+m) P_{l-1}^m)/st
  return (l * ct * p - (l + m) * pm1) / st;
}

inline double sh_norm(int l, int m) {
  double f = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) f *= k;  // (l+m)!/(l-m)!
  return std::sqrt((2 * l + 1) / (4 * PI) / f);
}
}  // namespace detail

class HarmonicBasis {
 public:
  explicit HarmonicBasis(int lmax) : lmax_(lmax) {
    // mode table with the coordinate-function ordering for l = 1
    modes_.push_back({0, 0, 0, 0.0});
    if (lmax >= 1) {
      modes_.push_back({1, 1, 1, 2.0});   // ~ x
      modes_.push_back({2, 1, -1, 2.0});  // ~ y
      modes_.push_back({3, 1, 0, 2.0});   // ~ z
    }
    for (int l = 2; l <= lmax; ++l)
      for (int m = -l; m <= l; ++m)
        modes_.push_back({(int)modes_.size(), l, m, double(l) * (l + 1)});

    // quadrature: exact for products of harmonics up to degree 2*lmax
    int nth = lmax + 1, nph = 2 * lmax + 2;
    GaussLegendre gl = gauss_legendre(nth);
    nodes_.reserve(nth * nph);
    weights_.reserve(nth * nph);
    std::vector<double> cts, sts, phis;
    for (int a = 0; a < nth; ++a)
      for (int b = 0; b < nph; ++b) {
        double ct = gl.x[a], st = std::sqrt(1 - ct * ct), ph = 2 * PI * b / nph;
        Eigen::Vector3d p(st * std::cos(ph), st * std::sin(ph), ct);
        nodes_.push_back(p);
        weights_.push_back(gl.w[a] * 2 * PI / nph);
        cts.push_back(ct);
        sts.push_back(st);
        phis.push_back(ph);
      }
    int nn = (int)nodes_.size(), nm = (int)modes_.size();
    Y_.resize(nn, nm);
    dYdth_.resize(nn, nm);
    dYdph_.resize(nn, nm);
    for (int k = 0; k < nn; ++k)
      for (int j = 0; j < nm; ++j) {
        Y_(k, j) = eval_angles(modes_[j], cts[k], sts[k], phis[k]);
        dYdth_(k, j) = eval_dtheta(modes_[j], cts[k], sts[k], phis[k]);
        dYdph_(k, j) = eval_dphi(modes_[j], cts[k], sts[k], phis[k]);
      }
    Yw_ = Y_.transpose();
    for (int k = 0; k < nn; ++k) Yw_.col(k) *= weights_[k];
  }

  int lmax() const { return lmax_; }
  int n_modes() const { return (int)modes_.size(); }
  int n_nodes() const { return (int)nodes_.size(); }
  const SphericalMode& mode(int j) const { return modes_[j]; }
  const std::vector<Eigen::Vector3d>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const Eigen::MatrixXd& synthesis() const { return Y_; }     // nodes x modes
  const Eigen::MatrixXd& analysis() const { return Yw_; }     // modes x nodes
  const Eigen::MatrixXd& dtheta() const { return dYdth_; }
  const Eigen::MatrixXd& dphi() const { return dYdph_; }
  // 1/sin(theta) at node k (for the angular gradient)
  double inv_sin_theta(int k) const {
    double st = std::sqrt(1 - nodes_[k].z() * nodes_[k].z());
    return 1.0 / st;
  }

  double eval_mode(int j, const Eigen::Vector3d& p) const {
    double r = p.norm();
    double ct = p.z() / r, st = std::sqrt(std::max(0.0, 1 - ct * ct));
    double ph = std::atan2(p.y(), p.x());
    return eval_angles(modes_[j], ct, st, ph);
  }
  // angular derivatives at an arbitrary direction (not pole-safe; callers
  // nudge directions off the poles)
  double eval_mode_dtheta(int j, const Eigen::Vector3d& p) const {
    double r = p.norm();
    double ct = p.z() / r, st = std::sqrt(std::max(0.0, 1 - ct * ct));
    double ph = std::atan2(p.y(), p.x());
    return eval_dtheta(modes_[j], ct, st, ph);
  }
  double eval_mode_dphi(int j, const Eigen::Vector3d& p) const {
    double r = p.norm();
    double ct = p.z() / r, st = std::sqrt(std::max(0.0, 1 - ct * ct));
    double ph = std::atan2(p.y(), p.x());
    return eval_dphi(modes_[j], ct, st, ph);
  }

  Eigen::VectorXd decompose(const Eigen::VectorXd& samples) const {
    if (samples.size() != (int)nodes_.size())
      throw std::invalid_argument("decompose: samples must live on the quadrature nodes");
    return Yw_ * samples;
  }
  Eigen::VectorXd decompose(const std::function<double(const Eigen::Vector3d&)>& f) const {
    Eigen::VectorXd s(n_nodes());
    for (int k = 0; k < n_nodes(); ++k) s[k] = f(nodes_[k]);
    return Yw_ * s;
  }
  double recompose(const Eigen::VectorXd& coef, const Eigen::Vector3d& p) const {
    double v = 0;
    for (int j = 0; j < coef.size(); ++j) v += coef[j] * eval_mode(j, p);
    return v;
  }

 private:
  static double trig(int m, double ph) {
    if (m > 0) return std::sqrt(2.0) * std::cos(m * ph);
    if (m < 0) return std::sqrt(2.0) * std::sin(-m * ph);
    return 1.0;
  }
  static double dtrig(int m, double ph) {
    if (m > 0) return -std::sqrt(2.0) * m * std::sin(m * ph);
    if (m < 0) return std::sqrt(2.0) * (-m) * std::cos(-m * ph);
    return 0.0;
  }
  static double eval_angles(const SphericalMode& md, double ct, double st, double ph) {
    int ma = std::abs(md.m);
    return detail::sh_norm(md.l, ma) * detail::assoc_legendre(md.l, ma, ct) * trig(md.m, ph);
  }
  static double eval_dtheta(const SphericalMode& md, double ct, double st, double ph) {
    int ma = std::abs(md.m);
    return detail::sh_norm(md.l, ma) * detail::assoc_legendre_dtheta(md.l, ma, ct, st) *
           trig(md.m, ph);
  }
  static double eval_dphi(const SphericalMode& md, double ct, double st, double ph) {
    int ma = std::abs(md.m);
    return detail::sh_norm(md.l, ma) * detail::assoc_legendre(md.l, ma, ct) * dtrig(md.m, ph);
  }

  int lmax_;
  std::vector<SphericalMode> modes_;
  std::vector<Eigen::Vector3d> nodes_;
  std::vector<double> weights_;
  Eigen::MatrixXd Y_, Yw_, dYdth_, dYdph_;
};

}  // namespace yamabe
