// Mode-by-mode solver for the model linearized operator on a unit ball
// carrying one Delaunay piece.  In the cylindrical variable t = -log r
// (ball boundary at t = 0, puncture at t -> infinity) the operator acts on
// the mode amplitudes w_j of u = r^{(2-N)/2} sum_j w_j(t) phi_j as
//   w'' - ((N-2)^2/4 + lambda_j) w + (N(N+2)/4) v_eps(t + log R)^{4/(N-2)} w,
// sources F = r^{-(N+2)/2} sum_j f_j(t) phi_j.
//
// Low modes (l <= 1) are solved by variation of constants with the explicit
// homogeneous pairs Phi^{j,+-}: the particular solution with zero Cauchy data
// at the far end, plus the multiple of the bounded/decaying field Phi^{j,+}
// needed to meet the boundary value.  That multiple is the deficiency
// coefficient of the glued solve.  High modes (l >= 2) are coercive and are
// solved by a Numerov/Thomas sweep with far-end Dirichlet data zero.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "yamabe/delaunay.hpp"
#include "yamabe/fields.hpp"
#include "yamabe/harmonics.hpp"

namespace yamabe {

struct BallModel {
  const DelaunayOrbit* orb = nullptr;
  double R = 1;
  int dim = 3;
  FieldGrids g;

  double log_r() const { return std::log(R); }
  double eps() const { return orb->params.eps; }
  double gamma2(double lambda) const {
    return (dim - 2.0) * (dim - 2.0) / 4.0 + lambda;
  }
  double potential(double t) const {  // t in ball time, boundary at 0
    double v = orb->v_at(t + log_r());
    return dim * (dim + 2.0) / 4.0 * std::pow(v, 4.0 / (dim - 2.0));
  }
  Eigen::VectorXd potential_grid() const {
    Eigen::VectorXd V(g.nt);
    for (int k = 0; k < g.nt; ++k) V[k] = potential(k * g.dt);
    return V;
  }
};

// Homogeneous pair for a low mode (l = 0 or 1) in ball time.
struct LowModePair {
  std::vector<double> plus, minus, dplus, dminus;  // values and t-derivatives
  double wronskian = 0;                            // plus*dminus - dplus*minus
};

inline LowModePair low_mode_pair(const BallModel& m, int l) {
  if (l < 0 || l > 1) throw std::invalid_argument("low_mode_pair: l must be 0 or 1");
  LowModePair P;
  int nt = m.g.nt;
  P.plus.resize(nt);
  P.minus.resize(nt);
  P.dplus.resize(nt);
  P.dminus.resize(nt);
  for (int k = 0; k < nt; ++k) {
    double t = k * m.g.dt + m.log_r();
    JacobiFields J = jacobi_fields(*m.orb, t);
    JacobiFields D = jacobi_fields_dt(*m.orb, t);
    P.plus[k] = l == 0 ? J.p0p : J.p1p;
    P.minus[k] = l == 0 ? J.p0m : J.p1m;
    P.dplus[k] = l == 0 ? D.p0p : D.p1p;
    P.dminus[k] = l == 0 ? D.p0m : D.p1m;
  }
  P.wronskian = P.plus[0] * P.dminus[0] - P.dplus[0] * P.minus[0];
  return P;
}

struct ModeSolution {
  Eigen::VectorXd w;      // cylindrical amplitude on the t grid
  double deficiency = 0;  // eps-scaled coefficient of Phi^{j,+} added
  double dw0 = 0;         // cylindrical derivative w'(0) at the boundary
};

// Variation of constants for l <= 1.  Returns the solution with w(0) = w0
// whose far behavior is the zero-Cauchy-data particular solution plus the
// boundary multiple of Phi^{j,+}.
inline ModeSolution solve_mode_low(const BallModel& m, const LowModePair& P,
                                   const Eigen::VectorXd& f, double w0) {
  int nt = m.g.nt;
  if ((int)f.size() != nt) throw std::invalid_argument("solve_mode_low: source size");
  std::vector<double> gp(nt), gm(nt);
  for (int k = 0; k < nt; ++k) {
    gp[k] = P.plus[k] * f[k];
    gm[k] = P.minus[k] * f[k];
  }
  std::vector<double> Cp = cumulative_integral6(gp, m.g.dt);
  std::vector<double> Cm = cumulative_integral6(gm, m.g.dt);
  ModeSolution sol;
  sol.w.resize(nt);
  for (int k = 0; k < nt; ++k) {
    double Ip = Cp[nt - 1] - Cp[k];  // int_t^{Tmax} Phi^+ f
    double Im = Cm[nt - 1] - Cm[k];  // int_t^{Tmax} Phi^- f
    sol.w[k] = (P.plus[k] * Im - P.minus[k] * Ip) / P.wronskian;
  }
  double phi0 = P.plus[0];
  if (std::abs(phi0) < 1e-3 * m.eps())
    throw std::runtime_error("solve_mode_low: boundary value of Phi^+ too small");
  double mult = (w0 - sol.w[0]) / phi0;
  // the integral terms of d/dt [(Phi^+ I^- - Phi^- I^+)/W] cancel, so the
  // boundary derivative is available in closed form
  double dwbar0 =
      (P.dplus[0] * (Cm[nt - 1] - Cm[0]) - P.dminus[0] * (Cp[nt - 1] - Cp[0])) / P.wronskian;
  sol.dw0 = dwbar0 + mult * P.dplus[0];
  for (int k = 0; k < nt; ++k) sol.w[k] += mult * P.plus[k];
  sol.deficiency = m.eps() * mult;
  return sol;
}

// Numerov sweep for coercive modes (l >= 2): Dirichlet w(0) = w0, w(Tmax) = 0.
inline ModeSolution solve_mode_high(const BallModel& m, const Eigen::VectorXd& V, double lambda,
                                    const Eigen::VectorXd& f, double w0) {
  int nt = m.g.nt;
  double g2 = m.gamma2(lambda), s = m.g.dt * m.g.dt / 12.0;
  auto Q = [&](int k) { return g2 - V[k]; };
  // (1 - s Q_{k-1}) w_{k-1} - (2 + 10 s Q_k) w_k + (1 - s Q_{k+1}) w_{k+1}
  //   = s (f_{k-1} + 10 f_k + f_{k+1})
  int n = nt - 2;  // unknowns k = 1 .. nt-2
  Eigen::VectorXd dw(n), rhs(n);
  std::vector<double> cu(n);  // upper diagonal after elimination
  for (int k = 1; k <= n; ++k) {
    double a = 1 - s * Q(k - 1), b = -(2 + 10 * s * Q(k)), c = 1 - s * Q(k + 1);
    double d = s * (f[k - 1] + 10 * f[k] + f[k + 1]);
    if (k == 1) d -= a * w0;
    // Thomas forward sweep
    if (k == 1) {
      dw[0] = b;
      cu[0] = c;
      rhs[0] = d;
    } else {
      double w = a / dw[k - 2];
      dw[k - 1] = b - w * cu[k - 2];
      cu[k - 1] = c;
      rhs[k - 1] = d - w * rhs[k - 2];
    }
  }
  ModeSolution sol;
  sol.w = Eigen::VectorXd::Zero(nt);
  sol.w[0] = w0;
  Eigen::VectorXd x(n);
  x[n - 1] = rhs[n - 1] / dw[n - 1];
  for (int k = n - 2; k >= 0; --k) x[k] = (rhs[k] - cu[k] * x[k + 1]) / dw[k];
  for (int k = 1; k <= n; ++k) sol.w[k] = x[k - 1];
  return sol;
}

inline ModeSolution solve_mode(const BallModel& m, const Eigen::VectorXd& V,
                               const SphericalMode& mode, const LowModePair* pair,
                               const Eigen::VectorXd& f, double w0) {
  if (mode.l <= 1) return solve_mode_low(m, *pair, f, w0);
  return solve_mode_high(m, V, mode.lambda, f, w0);
}

// Logarithmic slope phi = w'/w of the decaying homogeneous solution of a
// coercive mode (l >= 2), recorded at the grid nodes.  The Riccati equation
// phi' = (gamma^2 - V) - phi^2 is integrated backwards from the far end,
// where the flow attracts toward the decaying branch; this avoids the
// overflow of the raw growing solution.
inline Eigen::VectorXd riccati_slope_grid(const BallModel& m, double lambda) {
  double g2 = m.gamma2(lambda);
  auto rhs = [&](double t, const std::array<double, 1>& y) {
    return std::array<double, 1>{g2 - m.potential(t) - y[0] * y[0]};
  };
  int nt = m.g.nt;
  double T = m.g.t_max(), h = -m.g.dt / 4;
  Eigen::VectorXd slope(nt);
  std::array<double, 1> y = {-std::sqrt(std::max(g2 - m.potential(T), 0.25 * g2))};
  slope[nt - 1] = y[0];
  for (int k = nt - 1; k > 0; --k) {
    for (int s = 0; s < 4; ++s) y = rk8_step(rhs, k * m.g.dt + s * h, y, h);
    slope[k - 1] = y[0];
  }
  return slope;
}

// Dirichlet-to-Neumann coefficient of the interior model at r = 1: for a
// homogeneous solution u = r^{(2-N)/2} w(t) phi_j with controlled far
// behavior, T_j = (d_r u / u)(1) = (2-N)/2 - w'(0)/w(0).
//
// Low modes use the explicit field Phi^{j,+}; coercive modes integrate the
// Riccati equation phi' = (gamma^2 - V) - phi^2 for phi = w'/w backwards from
// the far end (attracting toward the decaying branch), which avoids the
// overflow of the raw growing solution.
inline double interior_dtn(const BallModel& m, int l, double lambda) {
  double c0 = (2.0 - m.dim) / 2.0;
  if (l <= 1) {
    double t0 = m.log_r();
    JacobiFields J = jacobi_fields(*m.orb, t0);
    JacobiFields D = jacobi_fields_dt(*m.orb, t0);
    double w = l == 0 ? J.p0p : J.p1p, dw = l == 0 ? D.p0p : D.p1p;
    if (std::abs(w) < 1e-3 * m.eps())
      throw std::runtime_error("interior_dtn: boundary value of Phi^+ too small");
    return c0 - dw / w;
  }
  return c0 - riccati_slope_grid(m, lambda)[0];
}

// Per-ball solve in plain coefficients: given the source block S (modes x nt,
// plain coefficients of F on spheres r = e^{-t}) and plain Dirichlet data at
// r = 1, produce the solution block and the low-mode deficiency coefficients.
struct BallSolve {
  Eigen::MatrixXd block;       // modes x nt, plain coefficients of u
  Eigen::VectorXd deficiency;  // one entry per mode, zero for l >= 2
  Eigen::VectorXd neumann;     // d_r of the plain coefficients at r = 1
};

inline BallSolve solve_dirichlet_ball(const BallModel& m, const HarmonicBasis& B,
                                      const Eigen::MatrixXd& S, const Eigen::VectorXd& dirichlet) {
  int nt = m.g.nt, nm = B.n_modes(), N = m.dim;
  if (S.rows() != nm || S.cols() != nt || dirichlet.size() != nm)
    throw std::invalid_argument("solve_dirichlet_ball: shape mismatch");
  Eigen::VectorXd V = m.potential_grid();
  LowModePair P0 = low_mode_pair(m, 0), P1 = low_mode_pair(m, 1);
  // gauge factors: plain -> cylindrical source e^{-t(N+2)/2}, solution back
  Eigen::VectorXd to_cyl(nt), to_plain(nt);
  for (int k = 0; k < nt; ++k) {
    double t = k * m.g.dt;
    to_cyl[k] = std::exp(-t * (N + 2.0) / 2.0);
    to_plain[k] = std::exp(t * (N - 2.0) / 2.0);
  }
  BallSolve out;
  out.block.resize(nm, nt);
  out.deficiency = Eigen::VectorXd::Zero(nm);
  out.neumann.resize(nm);
  // per-degree decaying slope and normalized decaying solution for the
  // boundary derivative of coercive modes: w'(0) = rho(0) w(0) - int phihat f
  std::map<int, std::pair<double, std::vector<double>>> decay;
  for (int j = 0; j < nm; ++j) {
    const SphericalMode& mode = B.mode(j);
    Eigen::VectorXd f = S.row(j).transpose().cwiseProduct(to_cyl);
    const LowModePair* pair = mode.l == 0 ? &P0 : (mode.l == 1 ? &P1 : nullptr);
    ModeSolution ms = solve_mode(m, V, mode, pair, f, dirichlet[j]);
    if (mode.l >= 2) {
      auto it = decay.find(mode.l);
      if (it == decay.end()) {
        Eigen::VectorXd rho = riccati_slope_grid(m, mode.lambda);
        std::vector<double> rv(rho.data(), rho.data() + nt);
        std::vector<double> C = cumulative_integral6(rv, m.g.dt);
        for (int k = 0; k < nt; ++k) C[k] = std::exp(C[k]);
        it = decay.emplace(mode.l, std::make_pair(rho[0], std::move(C))).first;
      }
      std::vector<double> pf(nt);
      for (int k = 0; k < nt; ++k) pf[k] = it->second.second[k] * f[k];
      ms.dw0 = it->second.first * dirichlet[j] - cumulative_integral6(pf, m.g.dt).back();
    }
    out.block.row(j) = ms.w.cwiseProduct(to_plain).transpose();
    out.deficiency[j] = ms.deficiency;
    out.neumann[j] = -((N - 2.0) / 2.0 * dirichlet[j] + ms.dw0);
  }
  return out;
}

}  // namespace yamabe
