// The glued approximate solution
//   ubar = sum_i chi_i u_{eps_i}(R_i, a_i, x - x_i) + (1 - sum_i chi_i) wbar,
//   wbar = sum_i (eps_i/2) R_i^{(N-2)/2} |x - x_i|^{2-N},
// its boundary-matching moments, and the error term
//   zeta = Lap ubar + (N(N-2)/4) ubar^{(N+2)/(N-2)}
// evaluated analytically region by region (the Delaunay pieces solve the ODE
// exactly, wbar is harmonic, and in the transition annuli the cutoff identity
//   zeta = (Lap chi)(u_i - wbar) + 2 chi' dr(u_i - wbar) + c[ubar^p - chi u_i^p]
// avoids forming Lap ubar by finite differences at cancellation-prone size).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "yamabe/balance.hpp"
#include "yamabe/delaunay.hpp"
#include "yamabe/fields.hpp"
#include "yamabe/harmonics.hpp"

namespace yamabe {

// Degree-7 smoothstep: s -> 35 s^4 - 84 s^5 + 70 s^6 - 20 s^7 on [0,1], C^3.
inline double smoothstep7(double s) {
  if (s <= 0) return 0;
  if (s >= 1) return 1;
  return ((( -20 * s + 70) * s - 84) * s + 35) * s * s * s * s;
}
inline double smoothstep7_d1(double s) {
  if (s <= 0 || s >= 1) return 0;
  return (((-140 * s + 420) * s - 420) * s + 140) * s * s * s;
}
inline double smoothstep7_d2(double s) {
  if (s <= 0 || s >= 1) return 0;
  return (((-840 * s + 2100) * s - 1680) * s + 420) * s * s;
}

// chi(r) = 1 for r <= rho, 0 for r >= 2 rho, smoothstep in between.
struct CutoffFamily {
  double rho = 0;
  double operator()(double r) const { return smoothstep7((2 * rho - r) / rho); }
  double d1(double r) const { return -smoothstep7_d1((2 * rho - r) / rho) / rho; }
  double d2(double r) const { return smoothstep7_d2((2 * rho - r) / rho) / (rho * rho); }
};

struct ApproxSolution {
  Configuration config;
  std::vector<DelaunayOrbit> orbits;  // per point (shared for equal eps_i)
  std::vector<CutoffFamily> cutoffs;

  int n() const { return config.n(); }
  int N() const { return config.dim; }
  double p_crit() const { return (N() + 2.0) / (N() - 2.0); }
  double c_N() const { return N() * (N() - 2.0) / 4.0; }

  double wbar_coef(int i) const {
    return config.eps_i(i) / 2.0 * std::pow(config.R[i], (N() - 2.0) / 2.0);
  }

  double eval_wbar(const Eigen::VectorXd& x) const {
    double s = 0;
    for (int i = 0; i < n(); ++i) {
      double r = (x - config.points[i]).norm();
      if (r == 0) throw std::domain_error("eval_wbar: singular point");
      s += wbar_coef(i) * std::pow(r, 2.0 - N());
    }
    return s;
  }
  Eigen::VectorXd grad_wbar(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (int i = 0; i < n(); ++i) {
      Eigen::VectorXd d = x - config.points[i];
      g += wbar_coef(i) * (2.0 - N()) * std::pow(d.norm(), -(double)N()) * d;
    }
    return g;
  }

  double family(int i, const Eigen::VectorXd& x) const {
    DelaunayFamilyParams fam{{N(), config.eps_i(i)}, config.R[i], config.a[i]};
    return family_eval(fam, orbits[i], x - config.points[i]);
  }
  // evaluation by exact offset from center i, for points so deep in a ball
  // that forming the absolute position would lose the offset to rounding
  double family_offset(int i, const Eigen::VectorXd& d) const {
    DelaunayFamilyParams fam{{N(), config.eps_i(i)}, config.R[i], config.a[i]};
    return family_eval(fam, orbits[i], d);
  }
  Eigen::VectorXd family_gradient(int i, const Eigen::VectorXd& x) const {
    DelaunayFamilyParams fam{{N(), config.eps_i(i)}, config.R[i], config.a[i]};
    return family_grad(fam, orbits[i], x - config.points[i]);
  }

  double eval(const Eigen::VectorXd& x) const {
    double s = 0, chi_sum = 0;
    for (int i = 0; i < n(); ++i) {
      double r = (x - config.points[i]).norm();
      if (r >= 2 * cutoffs[i].rho) continue;
      double chi = cutoffs[i](r);
      chi_sum += chi;
      s += chi * family(i, x);
    }
    if (chi_sum < 1.0) s += (1.0 - chi_sum) * eval_wbar(x);
    return s;
  }

  // zeta = Lap ubar + c ubar^p, analytic per region.
  double zeta(const Eigen::VectorXd& x) const {
    int host = -1;
    double r = 0;
    for (int i = 0; i < n(); ++i) {
      r = (x - config.points[i]).norm();
      if (r < 2 * cutoffs[i].rho) { host = i; break; }
    }
    if (host < 0) return c_N() * std::pow(eval_wbar(x), p_crit());
    if (r <= cutoffs[host].rho) return 0.0;  // exact Delaunay region
    const CutoffFamily& cf = cutoffs[host];
    double chi = cf(r), chi1 = cf.d1(r), chi2 = cf.d2(r);
    double u = family(host, x), w = eval_wbar(x);
    Eigen::VectorXd dir = (x - config.points[host]) / r;
    double dru = family_gradient(host, x).dot(dir), drw = grad_wbar(x).dot(dir);
    double lap_chi = chi2 + (N() - 1.0) / r * chi1;
    double ub = chi * u + (1 - chi) * w;
    return lap_chi * (u - w) + 2 * chi1 * (dru - drw) +
           c_N() * (std::pow(ub, p_crit()) - chi * std::pow(u, p_crit()));
  }
};

inline ApproxSolution make_approx(const Configuration& cfg, int n_periods = 5,
                                  int steps_per_period = 1024) {
  ApproxSolution s;
  s.config = cfg;
  std::map<double, DelaunayOrbit> cache;
  for (int i = 0; i < cfg.n(); ++i) {
    double ei = cfg.eps_i(i);
    auto it = cache.find(ei);
    if (it == cache.end())
      it = cache.emplace(ei, integrate_orbit({cfg.dim, ei}, n_periods, steps_per_period)).first;
    s.orbits.push_back(it->second);
    s.cutoffs.push_back(CutoffFamily{cfg.rho_i(i)});
  }
  return s;
}

// Boundary-matching moments on the sphere r_i = rho_i:
//   dirichlet_j = int (u_i - wbar)(x_i + rho theta) phi_j dtheta
//   neumann_j   = int d_r (u_i - wbar)(x_i + rho theta) phi_j dtheta.
struct Moments {
  double dirichlet = 0, neumann = 0;
};

inline Moments matching_moments(const ApproxSolution& sol, const HarmonicBasis& B, int i, int j) {
  double rho = sol.cutoffs[i].rho;
  Moments m;
  for (int k = 0; k < B.n_nodes(); ++k) {
    Eigen::VectorXd x = sol.config.points[i] + rho * Eigen::VectorXd(B.nodes()[k]);
    Eigen::VectorXd dir = B.nodes()[k];
    double diff = sol.family(i, x) - sol.eval_wbar(x);
    double ddiff = (sol.family_gradient(i, x) - sol.grad_wbar(x)).dot(dir);
    double wphi = B.weights()[k] * B.synthesis()(k, j);
    m.dirichlet += wphi * diff;
    m.neumann += wphi * ddiff;
  }
  return m;
}

// Standard solver grids for a configuration at scale eps.
inline FieldGrids default_grids(const ApproxSolution& sol, double t_pad = 10.0,
                                double far_radius = 40.0, double ds = 0.01) {
  double T = 0, logR = 0;
  for (int i = 0; i < sol.n(); ++i) {
    T = std::max(T, sol.orbits[i].period);
    logR = std::max(logR, std::log(sol.config.R[i]));
  }
  double dt = T / 1024.0;
  double tmax = logR + 3 * T + t_pad;
  FieldGrids g;
  g.dt = dt;
  g.nt = (int)std::ceil(tmax / dt) + 1;
  g.ds = ds;
  g.ns = (int)std::ceil(std::log(far_radius) / ds) + 1;
  return g;
}

// Smooth exterior partition of unity eta_i = r_i^{-6} / sum_k r_k^{-6}.
inline double ext_partition(const std::vector<Eigen::Vector3d>& centers, int i,
                            const Eigen::Vector3d& x) {
  double num = 0, den = 0;
  for (int k = 0; k < (int)centers.size(); ++k) {
    double w = std::pow((x - centers[k]).norm(), -6.0);
    den += w;
    if (k == i) num = w;
  }
  return num / den;
}

inline std::vector<Eigen::Vector3d> config_centers(const Configuration& cfg) {
  std::vector<Eigen::Vector3d> c;
  for (const auto& p : cfg.points) c.push_back(Eigen::Vector3d(p[0], p[1], p[2]));
  return c;
}

// Sample an arbitrary pointwise function into the field representation.
// Interior blocks hold the function's sphere-mode coefficients per ball; the
// exterior is split by the smooth partition of unity.
inline WeightedField sample_field(const std::function<double(const Eigen::Vector3d&)>& f,
                                  std::shared_ptr<const HarmonicBasis> basis,
                                  const std::vector<Eigen::Vector3d>& centers,
                                  const FieldGrids& g) {
  WeightedField out = WeightedField::zero(basis, centers, g);
  const HarmonicBasis& B = *basis;
  for (int i = 0; i < out.nballs(); ++i) {
    Eigen::VectorXd s(B.n_nodes());
    for (int k = 0; k < g.nt; ++k) {
      double r = std::exp(-k * g.dt);
      for (int a = 0; a < B.n_nodes(); ++a) s[a] = f(centers[i] + r * B.nodes()[a]);
      out.ball[i].col(k) = B.analysis() * s;
    }
    for (int k = 0; k < g.ns; ++k) {
      double r = std::exp(k * g.ds);
      for (int a = 0; a < B.n_nodes(); ++a) {
        Eigen::Vector3d x = centers[i] + r * B.nodes()[a];
        bool covered = false;  // exterior blocks carry no mass inside any ball
        for (int b = 0; b < (int)centers.size() && !covered; ++b)
          covered = b != i && (x - centers[b]).norm() < 1.0;
        s[a] = covered ? 0.0 : ext_partition(centers, i, x) * f(x);
      }
      out.ext[i].col(k) = B.analysis() * s;
    }
  }
  return out;
}

// zeta as a weighted field on the solver grids.
inline WeightedField zeta_field(const ApproxSolution& sol,
                                std::shared_ptr<const HarmonicBasis> basis,
                                const FieldGrids& g) {
  auto centers = config_centers(sol.config);
  return sample_field(
      [&](const Eigen::Vector3d& x) {
        Eigen::VectorXd xx = x;
        return sol.zeta(xx);
      },
      std::move(basis), centers, g);
}

}  // namespace yamabe
