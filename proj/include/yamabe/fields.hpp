// Global field representation used throughout the solver:
//  - one block per singular ball: plain mode coefficients c_j(t) of
//    u(x_i + e^{-t} theta) on a uniform grid in t = -log r, 0 <= t <= Tmax
//    (covers 0 < r <= 1);
//  - one exterior block per ball on a log-radial grid s = log r, 0 <= s <= S
//    (covers 1 <= r <= e^S), the blocks summing to the exterior field;
//  - per-ball multipole tails  sum_j  m_{ij} r^{-1-l_j} Y_j  added to the
//    exterior sum (harmonic, exact beyond the grid).
// Weighted norms are dyadic-annulus suprema of sigma^{-mu} (|u| + sigma |grad u|),
// the C^1-type surrogate of the weighted Hoelder norms; the exterior weight is
// |x|^{N-nu'} against the configuration origin.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "yamabe/balance.hpp"
#include "yamabe/harmonics.hpp"

namespace yamabe {

struct FieldGrids {
  double dt = 0;   // interior step in t
  int nt = 0;      // interior nodes, t_k = k dt
  double ds = 0;   // exterior step in s = log r
  int ns = 0;      // exterior nodes, s_k = k ds
  double t_max() const { return dt * (nt - 1); }
  double s_max() const { return ds * (ns - 1); }
};

// Cubic interpolation (Catmull-Rom) of matrix columns at fractional index u.
inline Eigen::VectorXd column_interp(const Eigen::MatrixXd& M, double u) {
  int n = (int)M.cols();
  if (n == 1) return M.col(0);
  if (n < 4) {  // linear fallback for tiny grids
    int k = std::max(0, std::min((int)std::floor(u), n - 2));
    double s = u - k;
    return (1 - s) * M.col(k) + s * M.col(k + 1);
  }
  int k = std::max(0, std::min((int)std::floor(u), n - 2));
  int st = std::max(0, std::min(k - 1, n - 4));  // 4-point cubic stencil
  double s = u - st;
  double w0 = -(s - 1) * (s - 2) * (s - 3) / 6.0;
  double w1 = s * (s - 2) * (s - 3) / 2.0;
  double w2 = -s * (s - 1) * (s - 3) / 2.0;
  double w3 = s * (s - 1) * (s - 2) / 6.0;
  return w0 * M.col(st) + w1 * M.col(st + 1) + w2 * M.col(st + 2) + w3 * M.col(st + 3);
}

struct WeightedField {
  std::shared_ptr<const HarmonicBasis> basis;
  std::vector<Eigen::Vector3d> centers;
  FieldGrids grids;
  std::vector<Eigen::MatrixXd> ball;  // per ball: n_modes x nt
  std::vector<Eigen::MatrixXd> ext;   // per ball: n_modes x ns
  Eigen::MatrixXd mpole;              // n_balls x n_modes tail coefficients

  int nballs() const { return (int)centers.size(); }
  int nmodes() const { return basis->n_modes(); }

  static WeightedField zero(std::shared_ptr<const HarmonicBasis> basis,
                            const std::vector<Eigen::Vector3d>& centers, const FieldGrids& g) {
    WeightedField f;
    f.basis = std::move(basis);
    f.centers = centers;
    f.grids = g;
    int nm = f.basis->n_modes();
    for (size_t i = 0; i < centers.size(); ++i) {
      f.ball.emplace_back(Eigen::MatrixXd::Zero(nm, g.nt));
      f.ext.emplace_back(Eigen::MatrixXd::Zero(nm, g.ns));
    }
    f.mpole = Eigen::MatrixXd::Zero((int)centers.size(), nm);
    return f;
  }

  // which ball contains x (r_i < 1), or -1 for the exterior region
  int region_of(const Eigen::Vector3d& x) const {
    for (int i = 0; i < nballs(); ++i)
      if ((x - centers[i]).norm() < 1.0) return i;
    return -1;
  }

  // mode coefficients of the interior trace on the sphere r_i = e^{-t}
  Eigen::VectorXd ball_coefs_at(int i, double t) const {
    return column_interp(ball[i], t / grids.dt);
  }

  double eval_interior(int i, const Eigen::Vector3d& x) const {
    Eigen::Vector3d d = x - centers[i];
    double r = d.norm();
    double t = std::min(-std::log(r), grids.t_max());
    Eigen::VectorXd c = ball_coefs_at(i, t);
    double v = 0;
    for (int j = 0; j < c.size(); ++j) v += c[j] * basis->eval_mode(j, d / r);
    return v;
  }

  double eval_exterior(const Eigen::Vector3d& x) const {
    double v = 0;
    for (int i = 0; i < nballs(); ++i) {
      Eigen::Vector3d d = x - centers[i];
      double r = d.norm();
      Eigen::Vector3d dir = d / r;
      double s = std::log(r);
      if (grids.ns > 0 && s <= grids.s_max()) {
        Eigen::VectorXd c = column_interp(ext[i], s / grids.ds);
        for (int j = 0; j < c.size(); ++j) v += c[j] * basis->eval_mode(j, dir);
      } else if (grids.ns > 0) {
        // continue each sampled mode beyond the grid with its harmonic decay
        Eigen::VectorXd c = ext[i].col(grids.ns - 1);
        double rs = std::exp(grids.s_max());
        for (int j = 0; j < c.size(); ++j)
          v += c[j] * std::pow(r / rs, -1.0 - basis->mode(j).l) * basis->eval_mode(j, dir);
      }
      for (int j = 0; j < mpole.cols(); ++j)
        if (mpole(i, j) != 0)
          v += mpole(i, j) * std::pow(r, -1.0 - basis->mode(j).l) * basis->eval_mode(j, dir);
    }
    return v;
  }

  double eval(const Eigen::Vector3d& x) const {
    int i = region_of(x);
    return i >= 0 ? eval_interior(i, x) : eval_exterior(x);
  }

  Eigen::Vector3d grad(const Eigen::Vector3d& x, double h = 1e-5) const {
    Eigen::Vector3d g;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e[k] = h;
      g[k] = (eval(x + e) - eval(x - e)) / (2 * h);
    }
    return g;
  }

  WeightedField& operator+=(const WeightedField& o) {
    for (int i = 0; i < nballs(); ++i) {
      ball[i] += o.ball[i];
      ext[i] += o.ext[i];
    }
    mpole += o.mpole;
    return *this;
  }
  WeightedField& operator*=(double a) {
    for (int i = 0; i < nballs(); ++i) {
      ball[i] *= a;
      ext[i] *= a;
    }
    mpole *= a;
    return *this;
  }
  friend WeightedField operator+(WeightedField a, const WeightedField& b) { return a += b; }
  friend WeightedField operator*(double a, WeightedField f) { return f *= a; }
  friend WeightedField operator-(WeightedField a, const WeightedField& b) {
    WeightedField nb = b;
    nb *= -1.0;
    return a += nb;
  }
};

// sup over the sphere grid at radius r = e^{-t} of |u| + r |grad u|, from the
// mode coefficients and their radial derivative (columns differenced in t).
namespace detail {
inline double c1_sup_interior(const HarmonicBasis& B, const Eigen::VectorXd& c,
                              const Eigen::VectorXd& dc_dt, double r) {
  Eigen::VectorXd u = B.synthesis() * c;
  Eigen::VectorXd ut = B.dtheta() * c;
  Eigen::VectorXd up = B.dphi() * c;
  Eigen::VectorXd ur = B.synthesis() * dc_dt;  // du/dr = -(1/r) du/dt
  double sup = 0;
  for (int k = 0; k < u.size(); ++k) {
    double ang = std::hypot(ut[k], up[k] * B.inv_sin_theta(k)) / r;
    double rad = std::abs(ur[k]) / r;
    sup = std::max(sup, std::abs(u[k]) + r * std::hypot(rad, ang));
  }
  return sup;
}
}  // namespace detail

// Weighted norm of a per-ball block: sup over dyadic annuli [sigma, 2 sigma]
// of sigma^{-mu} (sup |u| + sigma sup |grad u|), sampled on the t-grid.
inline double weighted_norm_ball(const WeightedField& f, int i, double mu) {
  const auto& B = *f.basis;
  const Eigen::MatrixXd& M = f.ball[i];
  int nt = f.grids.nt;
  double dt = f.grids.dt, sup = 0;
  for (int k = 0; k < nt; ++k) {
    double t = k * dt, r = std::exp(-t);
    Eigen::VectorXd dc;
    if (k == 0)
      dc = (-3 * M.col(0) + 4 * M.col(1) - M.col(2)) / (2 * dt);
    else if (k == nt - 1)
      dc = (3 * M.col(nt - 1) - 4 * M.col(nt - 2) + M.col(nt - 3)) / (2 * dt);
    else
      dc = (M.col(k + 1) - M.col(k - 1)) / (2 * dt);
    double s = detail::c1_sup_interior(B, M.col(k), dc, r);
    sup = std::max(sup, std::pow(r, -mu) * s);
  }
  return sup;
}

// Exterior norm: sup over the exterior sample grids of |x|^{N-nu'} (|u| + |x| |grad u|),
// with N = 3 and the gradient taken by finite differences of the full field.
inline double weighted_norm_exterior(const WeightedField& f, double nup) {
  double sup = 0;
  int skip = std::max(1, f.grids.ns / 40);
  for (int i = 0; i < f.nballs(); ++i) {
    for (int k = 0; k < f.grids.ns; k += skip) {
      double r = std::exp(k * f.grids.ds);
      for (int a = 0; a < f.basis->n_nodes(); a += 3) {
        Eigen::Vector3d x = f.centers[i] + r * f.basis->nodes()[a];
        if (f.region_of(x) >= 0) continue;
        double R = x.norm();
        if (R < 1e-9) continue;
        double val = std::abs(f.eval_exterior(x));
        double gv = f.grad(x).norm();
        sup = std::max(sup, std::pow(R, 3.0 - nup) * (val + R * gv));
      }
    }
  }
  return sup;
}

// Norm of the full field: max over balls of the mu-weighted interior norm and
// the exterior nu'-weighted norm.
inline double weighted_norm(const WeightedField& f, double mu, double nup = -1.0) {
  double v = 0;
  for (int i = 0; i < f.nballs(); ++i) v = std::max(v, weighted_norm_ball(f, i, mu));
  if (f.grids.ns > 0) v = std::max(v, weighted_norm_exterior(f, nup));
  return v;
}

}  // namespace yamabe
