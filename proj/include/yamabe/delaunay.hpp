// Delaunay-type radial profiles for the conformal scalar curvature equation:
// the periodic ODE orbit v_eps, its period, the translated family
// u_eps(R, a, x), and the radial Jacobi fields Phi^{j,+-}.
//
// Cylindrical variable t = -log|x|; the profile solves
//   v'' - ((N-2)^2/4) v + (N(N-2)/4) v^{(N+2)/(N-2)} = 0,
// with conserved energy
//   H(v, v') = v'^2 - ((N-2)^2/4)(v^2 - v^{2N/(N-2)}).
#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "yamabe/core.hpp"

namespace yamabe {

struct DelaunayParams {
  int dim = 3;     // ambient dimension N >= 3
  double eps = 0;  // necksize, 0 < eps <= eps_cyl(N)
};

inline double eps_cyl(int N) { return std::pow((N - 2.0) / N, (N - 2.0) / 4.0); }

inline double hamiltonian(double v, double vdot, int N) {
  double c = (N - 2.0) * (N - 2.0) / 4.0;
  return vdot * vdot - c * (v * v - std::pow(v, 2.0 * N / (N - 2.0)));
}

struct VMaxResult {
  double value = 0;
  bool degenerate = false;  // eps == eps_cyl (double root, cylinder orbit)
};

// Larger root of v^2 - v^{2N/(N-2)} = eps^2 - eps^{2N/(N-2)} in (eps, 1).
inline VMaxResult v_max(const DelaunayParams& p) {
  int N = p.dim;
  double ec = eps_cyl(N);
  if (!(p.eps > 0) || p.eps > ec * (1 + 1e-12))
    throw std::invalid_argument("v_max: eps outside (0, eps_cyl]");
  if (std::abs(p.eps - ec) < 1e-14 * ec) return {ec, true};
  double q = 2.0 * N / (N - 2.0);
  double rhs = p.eps * p.eps - std::pow(p.eps, q);
  auto g = [&](double v) { return v * v - std::pow(v, q) - rhs; };
  // g(eps)=0, g > 0 between the roots, g(1) = -rhs < 0: bracket from above.
  double lo = ec, hi = 1.0;  // the larger root lies in (eps_cyl, 1)
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  double v = 0.5 * (lo + hi);
  for (int it = 0; it < 50; ++it) {  // Newton polish
    double dg = 2 * v - q * std::pow(v, q - 1);
    double dv = g(v) / dg;
    v -= dv;
    if (std::abs(dv) < 1e-16) break;
  }
  if (std::abs(g(v)) > 1e-13) throw std::runtime_error("v_max: residual above 1e-13");
  return {v, false};
}

// Period via the substitution integral
//   (N-2)/4 * T = int_1^{vmax/eps} (vb^2 - 1 - eps^{4/(N-2)}(vb^{2N/(N-2)} - 1))^{-1/2} dvb
// with vb = 1 + s^2 near the lower endpoint and vb = vmax/eps - s^2 near the
// upper one, removing both inverse-square-root singularities.
inline double period(const DelaunayParams& p) {
  int N = p.dim;
  if (p.eps >= eps_cyl(N) * (1 - 1e-12))
    throw std::invalid_argument("period: eps must be below eps_cyl");
  double beta = std::pow(p.eps, 4.0 / (N - 2.0));
  double q2 = 2.0 * N / (N - 2.0);
  double vm = v_max(p).value / p.eps;
  // Factored integrands 2/sqrt(g/s^2): finite at s = 0, Taylor fallback where
  // direct evaluation would cancel (or s^2 would underflow).
  auto glo_over_u = [&](double u) {  // g(1+u)/u
    if (u < 1e-8) return 2.0 + u - beta * (q2 + 0.5 * q2 * (q2 - 1) * u);
    return 2.0 + u - beta * std::expm1(q2 * std::log1p(u)) / u;
  };
  auto ghi_over_u = [&](double u) {  // g(vm-u)/u
    if (u < 1e-6 * vm) {
      double gp = 2 * vm - beta * q2 * std::pow(vm, q2 - 1);
      double gpp = 2 - beta * q2 * (q2 - 1) * std::pow(vm, q2 - 2);
      return -gp + 0.5 * gpp * u;
    }
    double vb = vm - u;
    return (vb * vb - 1 - beta * (std::pow(vb, q2) - 1)) / u;
  };
  double vmid = 0.5 * (1 + vm);
  double s1 = std::sqrt(vmid - 1), s2 = std::sqrt(vm - vmid);
  boost::math::quadrature::tanh_sinh<double> ts;
  double err1 = 0, err2 = 0, L1 = 0;
  std::size_t lv = 0;
  double I1 = ts.integrate([&](double s) { return 2 / std::sqrt(glo_over_u(s * s)); }, 0.0, s1,
                           1e-12, &err1, &L1, &lv);
  double I2 = ts.integrate([&](double s) { return 2 / std::sqrt(ghi_over_u(s * s)); }, 0.0, s2,
                           1e-12, &err2, &L1, &lv);
  double I = I1 + I2;
  if (err1 + err2 > 1e-8 * I)
    throw std::runtime_error("period: quadrature not converged, partials " + std::to_string(I1) +
                             " " + std::to_string(I2));
  return 4.0 / (N - 2.0) * I;
}

// One period orbit plus the eps-variation field (Phi^{0,-} = dv/deps,
// integrated alongside with initial data (1, 0)), sampled on a uniform grid
// covering n_periods periods.
struct DelaunayOrbit {
  DelaunayParams params;
  double dt = 0;
  int nt = 0;                    // samples at t_k = k*dt, k = 0..nt-1
  std::vector<double> v, vdot;   // profile and derivative
  std::vector<double> ve, vedot; // dv/deps and its t-derivative
  double period = 0;             // T_eps (0 for the cylinder branch)
  double energy = 0;             // H0 = H(eps, 0)
  double v_max = 0;
  double energy_drift = 0;       // max |H - H0| over the grid
  bool degenerate = false;

  double t_end() const { return (nt - 1) * dt; }

  // Periodic-even interpolation of v: valid for all real t.
  double v_at(double t) const { return interp(v, vdot, fold(t)); }
  double vdot_at(double t) const {
    double tf = fold(t);
    double s = (t < 0 && fold_flips(t)) ? -1.0 : 1.0;
    return s * interp_d(v, vdot, tf);
  }
  // dv/deps: even in t but not periodic; requires grid coverage.
  double ve_at(double t) const {
    double ta = std::abs(t);
    if (ta > t_end() + 1e-12) throw std::out_of_range("DelaunayOrbit: ve_at beyond grid");
    return interp(ve, vedot, std::min(ta, t_end()));
  }
  double vedot_at(double t) const {
    if (degenerate || nt == 1) return 0;
    double ta = std::abs(t);
    if (ta > t_end() + 1e-12) throw std::out_of_range("DelaunayOrbit: vedot_at beyond grid");
    double val = qinterp([&](int k) { return vedot[k]; }, [&](int k) { return vedd(k); },
                         [&](int k) { return veddd(k); }, std::min(ta, t_end()));
    return t < 0 ? -val : val;
  }

 private:
  // Fold t into [0, t_end] using evenness + periodicity.
  double fold(double t) const {
    if (degenerate) return 0;
    double ta = std::abs(t);
    if (ta <= t_end()) return ta;
    double tr = std::fmod(ta, period);
    return tr;
  }
  bool fold_flips(double t) const { return true; }  // v even => vdot odd at -t
  // ODE-supplied derivatives: vdd = v'', vddd = v''', vedd = (dv/deps)''.
  double vdd(int k) const {
    int N = params.dim;
    double c = (N - 2.0) * (N - 2.0) / 4.0, b = N * (N - 2.0) / 4.0;
    return c * v[k] - b * std::pow(v[k], (N + 2.0) / (N - 2.0));
  }
  double vddd(int k) const {
    int N = params.dim;
    double c = (N - 2.0) * (N - 2.0) / 4.0, bp = N * (N + 2.0) / 4.0;
    return (c - bp * std::pow(v[k], 4.0 / (N - 2.0))) * vdot[k];
  }
  double vedd(int k) const {
    int N = params.dim;
    double c = (N - 2.0) * (N - 2.0) / 4.0, bp = N * (N + 2.0) / 4.0;
    return (c - bp * std::pow(v[k], 4.0 / (N - 2.0))) * ve[k];
  }
  double veddd(int k) const {
    int N = params.dim;
    double c = (N - 2.0) * (N - 2.0) / 4.0, bp = N * (N + 2.0) / 4.0;
    double vp = std::pow(v[k], 4.0 / (N - 2.0));
    return (c - bp * vp) * vedot[k] -
           bp * 4.0 / (N - 2.0) * vp / v[k] * vdot[k] * ve[k];
  }
  template <class F, class D, class S>
  double qinterp(F f, D d, S s2, double t) const {
    if (degenerate || nt == 1) return f(0);
    double u = t / dt;
    int k = std::min((int)u, nt - 2);
    return quintic_hermite(f(k), d(k), s2(k), f(k + 1), d(k + 1), s2(k + 1), dt, u - k);
  }
  double interp(const std::vector<double>& f, const std::vector<double>&, double t) const {
    if (&f == &v)
      return qinterp([&](int k) { return v[k]; }, [&](int k) { return vdot[k]; },
                     [&](int k) { return vdd(k); }, t);
    return qinterp([&](int k) { return ve[k]; }, [&](int k) { return vedot[k]; },
                   [&](int k) { return vedd(k); }, t);
  }
  double interp_d(const std::vector<double>&, const std::vector<double>&, double t) const {
    if (degenerate || nt == 1) return 0;
    return qinterp([&](int k) { return vdot[k]; }, [&](int k) { return vdd(k); },
                   [&](int k) { return vddd(k); }, t);
  }

 public:
  void export_csv(const std::string& path) const {
    std::ofstream out(path);
    out << "# N=" << params.dim << " eps=" << params.eps << " T_eps=" << period << "\n";
    out << "t,v,vdot,H_drift\n";
    out.precision(16);
    for (int k = 0; k < nt; ++k)
      out << k * dt << "," << v[k] << "," << vdot[k] << ","
          << hamiltonian(v[k], vdot[k], params.dim) - energy << "\n";
  }
};

// Integrate the orbit (and the eps-variation equation) with the fixed-step
// order-8 Runge-Kutta scheme, 4096 steps per period by default.
inline DelaunayOrbit integrate_orbit(const DelaunayParams& p, int n_periods = 1,
                                     int steps_per_period = 4096,
                                     double energy_tol = 1e-9) {
  int N = p.dim;
  DelaunayOrbit orb;
  orb.params = p;
  VMaxResult vm = v_max(p);
  orb.v_max = vm.value;
  orb.energy = hamiltonian(p.eps, 0.0, N);
  if (vm.degenerate) {
    orb.degenerate = true;
    orb.nt = 1;
    orb.dt = 1;
    orb.v = {p.eps};
    orb.vdot = {0};
    orb.ve = {1};
    orb.vedot = {0};
    return orb;
  }
  orb.period = period(p);
  orb.dt = orb.period / steps_per_period;
  orb.nt = n_periods * steps_per_period + 1;
  double c = (N - 2.0) * (N - 2.0) / 4.0, b = N * (N - 2.0) / 4.0;
  double pw = (N + 2.0) / (N - 2.0), bp = N * (N + 2.0) / 4.0;
  auto rhs = [&](double, const std::array<double, 4>& y) {
    double vp = std::pow(y[0], pw - 1);  // v^{4/(N-2)}
    return std::array<double, 4>{y[1], c * y[0] - b * vp * y[0], y[3], (c - bp * vp) * y[2]};
  };
  std::array<double, 4> y = {p.eps, 0.0, 1.0, 0.0};
  orb.v.resize(orb.nt);
  orb.vdot.resize(orb.nt);
  orb.ve.resize(orb.nt);
  orb.vedot.resize(orb.nt);
  for (int k = 0; k < orb.nt; ++k) {
    orb.v[k] = y[0];
    orb.vdot[k] = y[1];
    orb.ve[k] = y[2];
    orb.vedot[k] = y[3];
    double drift = std::abs(hamiltonian(y[0], y[1], N) - orb.energy);
    orb.energy_drift = std::max(orb.energy_drift, drift);
    if (k + 1 < orb.nt) y = rk8_step(rhs, k * orb.dt, y, orb.dt);
  }
  if (orb.energy_drift > energy_tol)
    throw std::runtime_error("integrate_orbit: energy drift " + std::to_string(orb.energy_drift) +
                             " exceeds tolerance");
  return orb;
}

// Period recovered from the orbit itself: first return of vdot to zero from
// below (the next minimum of v). Used to cross-check period().
inline double period_from_orbit(const DelaunayOrbit& orb) {
  for (int k = 1; k + 1 < orb.nt; ++k) {
    if (orb.vdot[k] < 0 && orb.vdot[k + 1] >= 0) {
      double lo = k * orb.dt, hi = (k + 1) * orb.dt;
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        (orb.vdot_at(mid) < 0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  throw std::runtime_error("period_from_orbit: no return to minimum in grid range");
}

// Translated family u_eps(R, a, x) =
//   |x - a|x|^2|^{(2-N)/2} v_eps(-2 log|x| + log|x - a|x|^2| + log R).
struct DelaunayFamilyParams {
  DelaunayParams base;
  double R = 1;
  Eigen::VectorXd a;  // dimension N; empty means a = 0
};

inline double family_eval(const DelaunayFamilyParams& fam, const DelaunayOrbit& orb,
                          const Eigen::VectorXd& x) {
  int N = fam.base.dim;
  double r = x.norm();
  if (r == 0) throw std::domain_error("family_eval: singular point x = 0");
  Eigen::VectorXd y = x;
  if (fam.a.size()) y -= fam.a * (r * r);
  double w = y.norm();
  if (w == 0) throw std::domain_error("family_eval: singular point x = a|x|^2");
  double t = -2 * std::log(r) + std::log(w) + std::log(fam.R);
  return std::pow(w, (2.0 - N) / 2.0) * orb.v_at(t);
}

inline Eigen::VectorXd family_grad(const DelaunayFamilyParams& fam, const DelaunayOrbit& orb,
                                   const Eigen::VectorXd& x) {
  int N = fam.base.dim;
  double r = x.norm();
  Eigen::VectorXd y = x;
  if (fam.a.size()) y -= fam.a * (r * r);
  double w = y.norm();
  double t = -2 * std::log(r) + std::log(w) + std::log(fam.R);
  // grad w = (y - 2 x (a.y)) / w; grad t = -2 x / r^2 + grad w / w
  Eigen::VectorXd gw = y;
  if (fam.a.size()) gw -= 2.0 * x * fam.a.dot(y);
  gw /= w;
  Eigen::VectorXd gt = -2.0 / (r * r) * x + gw / w;
  double v = orb.v_at(t), vd = orb.vdot_at(t);
  double wp = std::pow(w, (2.0 - N) / 2.0);
  return (2.0 - N) / 2.0 * wp / w * v * gw + wp * vd * gt;
}

// Radial Jacobi fields (factors in the cylindrical picture):
//   Phi^{0,+} = vdot, Phi^{0,-} = dv/deps,
//   Phi^{1,+} = e^{-t}((N-2)/2 v - vdot), Phi^{1,-} = e^{t}((2-N)/2 v - vdot).
struct JacobiFields {
  double p0p, p0m, p1p, p1m;
};

inline JacobiFields jacobi_fields(const DelaunayOrbit& orb, double t) {
  int N = orb.params.dim;
  double v = orb.v_at(t), vd = orb.vdot_at(t);
  JacobiFields J;
  J.p0p = vd;
  J.p0m = orb.ve_at(t);
  J.p1p = std::exp(-t) * ((N - 2.0) / 2.0 * v - vd);
  J.p1m = std::exp(t) * ((2.0 - N) / 2.0 * v - vd);
  return J;
}

// t-derivatives of the four Jacobi fields (via the profile ODE).
inline JacobiFields jacobi_fields_dt(const DelaunayOrbit& orb, double t) {
  int N = orb.params.dim;
  double v = orb.v_at(t), vd = orb.vdot_at(t);
  double c = (N - 2.0) * (N - 2.0) / 4.0, b = N * (N - 2.0) / 4.0;
  double vdd = c * v - b * std::pow(v, (N + 2.0) / (N - 2.0));
  JacobiFields J = jacobi_fields(orb, t);
  JacobiFields D;
  D.p0p = vdd;
  D.p0m = orb.vedot_at(t);
  D.p1p = -J.p1p + std::exp(-t) * ((N - 2.0) / 2.0 * vd - vdd);
  D.p1m = J.p1m + std::exp(t) * ((2.0 - N) / 2.0 * vd - vdd);
  return D;
}

}  // namespace yamabe
