// Global linear solve for the model operator: interior mode solves on each
// ball are glued to an exterior harmonic representation (per-ball multipoles
// plus the Newton potential of the exterior source) by matching Dirichlet and
// Neumann data on the unit spheres.  The matching unknown is the vector of
// boundary mode coefficients psi; it satisfies
//   (S - T) psi = N_part - dP + S P,
// where T is the diagonal interior Dirichlet-to-Neumann map, S = D A^{-1} the
// exterior one (A = multipole collocation matrix, D its Neumann counterpart),
// N_part the Neumann trace of the zero-Dirichlet interior particular solution
// and P, dP the boundary traces of the Newton potential.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "yamabe/approx.hpp"
#include "yamabe/interior.hpp"

namespace yamabe {

// gradient of F(r) Y_j(theta) about the origin, at offset d, given F and F'
inline Eigen::Vector3d mode_field_grad(const HarmonicBasis& B, int j, Eigen::Vector3d d, double F,
                                       double dF) {
  double r = d.norm();
  if (std::abs(d.x()) + std::abs(d.y()) < 1e-9 * r) d.x() += 1e-9 * r;  // off the pole
  Eigen::Vector3d er = d / r;
  double st = std::hypot(er.x(), er.y()), ct = er.z();
  double cp = er.x() / st, sp = er.y() / st;
  Eigen::Vector3d eth(ct * cp, ct * sp, -st), eph(-sp, cp, 0);
  double Y = B.eval_mode(j, er);
  double Yth = B.eval_mode_dtheta(j, er), Yph = B.eval_mode_dphi(j, er);
  return dF * Y * er + F / r * (Yth * eth + Yph / st * eph);
}

inline double multipole_eval(const HarmonicBasis& B, int j, const Eigen::Vector3d& d) {
  double r = d.norm();
  return std::pow(r, -1.0 - B.mode(j).l) * B.eval_mode(j, d);
}
inline Eigen::Vector3d multipole_grad(const HarmonicBasis& B, int j, const Eigen::Vector3d& d) {
  double r = d.norm();
  int l = B.mode(j).l;
  double F = std::pow(r, -1.0 - l);
  return mode_field_grad(B, j, d, F, -(1.0 + l) * F / r);
}

// Newton potential of a separated source sigma(r) Y_j around one center:
//   u_j(r) = -1/(2l+1) [ r^{-l-1} I1 + r^l I2 ],
//   I1 = int_1^r sigma s^{l+2} ds,  I2 = int_r^{Rfar} sigma s^{1-l} ds,
// on the exterior log grid (source vanishes inside the balls and beyond the
// grid).  Radial derivative: the sigma terms cancel, so
//   u_j'(r) = -1/(2l+1) [ -(l+1) r^{-l-2} I1 + l r^{l-1} I2 ].
struct NewtonPotential {
  Eigen::MatrixXd val, dval;  // n_modes x ns: u_j and u_j' at r = e^{s_k}
};

inline NewtonPotential newton_potential(const HarmonicBasis& B, const FieldGrids& g,
                                        const Eigen::MatrixXd& src) {
  int nm = B.n_modes(), ns = g.ns;
  NewtonPotential np;
  np.val.resize(nm, ns);
  np.dval.resize(nm, ns);
  std::vector<double> g1(ns), g2(ns);
  for (int j = 0; j < nm; ++j) {
    int l = B.mode(j).l;
    for (int k = 0; k < ns; ++k) {
      double s = k * g.ds;
      g1[k] = src(j, k) * std::exp((l + 3.0) * s);  // sigma s^{l+2} ds, s~ = e^s
      g2[k] = src(j, k) * std::exp((2.0 - l) * s);
    }
    std::vector<double> C1 = cumulative_integral6(g1, g.ds);
    std::vector<double> C2 = cumulative_integral6(g2, g.ds);
    for (int k = 0; k < ns; ++k) {
      double r = std::exp(k * g.ds);
      double I1 = C1[k], I2 = C2[ns - 1] - C2[k];
      double rl = std::pow(r, (double)l);
      np.val(j, k) = -(std::pow(r, -1.0 - l) * I1 + rl * I2) / (2 * l + 1);
      np.dval(j, k) = -(-(l + 1.0) * std::pow(r, -2.0 - l) * I1 + l * rl / r * I2) / (2 * l + 1);
    }
  }
  return np;
}

// value/gradient of a per-ball mode field (sampled profiles) at offset d
inline double mode_table_eval(const HarmonicBasis& B, const FieldGrids& g,
                              const Eigen::MatrixXd& val, const Eigen::Vector3d& d) {
  double s = std::log(d.norm());
  Eigen::VectorXd c = column_interp(val, std::min(s, g.s_max()) / g.ds);
  if (s > g.s_max()) {  // harmonic continuation
    double rs = std::exp(g.s_max());
    for (int j = 0; j < c.size(); ++j)
      c[j] *= std::pow(d.norm() / rs, -1.0 - B.mode(j).l);
  }
  double v = 0;
  Eigen::Vector3d dir = d / d.norm();
  for (int j = 0; j < c.size(); ++j) v += c[j] * B.eval_mode(j, dir);
  return v;
}

inline Eigen::Vector3d mode_table_grad(const HarmonicBasis& B, const FieldGrids& g,
                                       const Eigen::MatrixXd& val, const Eigen::MatrixXd& dval,
                                       const Eigen::Vector3d& d) {
  double r = d.norm(), s = std::log(r);
  Eigen::VectorXd c = column_interp(val, std::min(s, g.s_max()) / g.ds);
  Eigen::VectorXd dc = column_interp(dval, std::min(s, g.s_max()) / g.ds);
  if (s > g.s_max()) {
    double rs = std::exp(g.s_max());
    for (int j = 0; j < c.size(); ++j) {
      double f = std::pow(r / rs, -1.0 - B.mode(j).l);
      c[j] *= f;
      dc[j] = -(1.0 + B.mode(j).l) * c[j] / r;
    }
  }
  Eigen::Vector3d gr = Eigen::Vector3d::Zero();
  for (int j = 0; j < c.size(); ++j)
    if (c[j] != 0 || dc[j] != 0) gr += mode_field_grad(B, j, d, c[j], dc[j]);
  return gr;
}

struct GluedSystem {
  std::shared_ptr<const HarmonicBasis> basis;
  std::vector<Eigen::Vector3d> centers;
  FieldGrids g;
  std::vector<std::shared_ptr<DelaunayOrbit>> orbits;
  std::vector<BallModel> balls;
  Eigen::MatrixXd A, D, S;  // collocation, Neumann map, exterior DtN
  Eigen::VectorXd Tdiag;    // interior DtN per unknown
  Eigen::PartialPivLU<Eigen::MatrixXd> A_lu, glue_lu;

  int nm() const { return basis->n_modes(); }
  int nballs() const { return (int)centers.size(); }
  int nu() const { return nballs() * nm(); }
  int idx(int i, int j) const { return i * nm() + j; }
};

inline GluedSystem make_glued_system(std::shared_ptr<const HarmonicBasis> basis,
                                     const std::vector<Eigen::Vector3d>& centers,
                                     const std::vector<std::shared_ptr<DelaunayOrbit>>& orbits,
                                     const std::vector<double>& R, const FieldGrids& g) {
  GluedSystem GS;
  GS.basis = std::move(basis);
  GS.centers = centers;
  GS.g = g;
  GS.orbits = orbits;
  const HarmonicBasis& B = *GS.basis;
  int n = (int)centers.size(), nm = B.n_modes(), nu = n * nm;
  for (int i = 0; i < n; ++i) {
    BallModel m;
    m.orb = GS.orbits[i].get();
    m.R = R[i];
    m.dim = 3;
    m.g = g;
    GS.balls.push_back(m);
  }
  GS.A = Eigen::MatrixXd::Identity(nu, nu);
  GS.D = Eigen::MatrixXd::Zero(nu, nu);
  Eigen::VectorXd vals(B.n_nodes()), ders(B.n_nodes());
  for (int i0 = 0; i0 < n; ++i0)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < nm; ++j) {
        if (i == i0) {
          GS.D(GS.idx(i0, j), GS.idx(i, j)) = -(1.0 + B.mode(j).l);
          continue;
        }
        for (int k = 0; k < B.n_nodes(); ++k) {
          Eigen::Vector3d x = centers[i0] + B.nodes()[k];
          vals[k] = multipole_eval(B, j, x - centers[i]);
          ders[k] = multipole_grad(B, j, x - centers[i]).dot(B.nodes()[k]);
        }
        GS.A.col(GS.idx(i, j)).segment(i0 * nm, nm) += B.analysis() * vals;
        GS.D.col(GS.idx(i, j)).segment(i0 * nm, nm) += B.analysis() * ders;
      }
  GS.A_lu.compute(GS.A);
  GS.S = GS.D * GS.A_lu.inverse();
  GS.Tdiag.resize(nu);
  for (int i = 0; i < n; ++i) {
    std::vector<double> dtn_l(B.lmax() + 1);  // depends on the degree only
    for (int l = 0; l <= B.lmax(); ++l)
      dtn_l[l] = interior_dtn(GS.balls[i], l, double(l) * (l + 1));
    for (int j = 0; j < nm; ++j) GS.Tdiag[GS.idx(i, j)] = dtn_l[B.mode(j).l];
  }
  Eigen::MatrixXd G = GS.S;
  G.diagonal() -= GS.Tdiag;
  GS.glue_lu.compute(G);
  return GS;
}

inline GluedSystem make_glued_system(const ApproxSolution& sol,
                                     std::shared_ptr<const HarmonicBasis> basis,
                                     const FieldGrids& g) {
  std::vector<std::shared_ptr<DelaunayOrbit>> orbits;
  for (const auto& o : sol.orbits) orbits.push_back(std::make_shared<DelaunayOrbit>(o));
  std::vector<double> R(sol.config.R.data(), sol.config.R.data() + sol.config.R.size());
  return make_glued_system(std::move(basis), config_centers(sol.config), orbits, R, g);
}

// Coupling matrix of the closure map: unit diagonal, off-diagonal entries
// R_{i0}^{N-2} |x_i - x_{i0}|^{2-N}; singular exactly when first-order
// parameter changes can absorb the low-mode deficiencies.
inline Eigen::MatrixXd kernel_system_matrix(const Configuration& cfg) {
  int n = cfg.n(), N = cfg.dim;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  for (int i0 = 0; i0 < n; ++i0)
    for (int i = 0; i < n; ++i)
      if (i != i0)
        M(i0, i) = std::pow(cfg.R[i0], N - 2.0) *
                   std::pow((cfg.points[i] - cfg.points[i0]).norm(), 2.0 - N);
  return M;
}

struct GlueResult {
  WeightedField w;
  Eigen::MatrixXd deficiency;  // nballs x nmodes, nonzero only for l <= 1
  Eigen::VectorXd psi;         // matched boundary mode coefficients
};

// Solve the model operator L w = f for a source given as a weighted field
// (ball blocks + exterior blocks; f.mpole is ignored as sources carry no
// harmonic tail).
inline GlueResult glue_solve(const GluedSystem& GS, const WeightedField& f) {
  const HarmonicBasis& B = *GS.basis;
  int n = GS.nballs(), nm = GS.nm(), nu = GS.nu();
  // interior particular solutions (zero Dirichlet) and their Neumann traces
  std::vector<BallSolve> part;
  Eigen::VectorXd Npart(nu);
  for (int i = 0; i < n; ++i) {
    part.push_back(solve_dirichlet_ball(GS.balls[i], B, f.ball[i], Eigen::VectorXd::Zero(nm)));
    Npart.segment(i * nm, nm) = part[i].neumann;
  }
  // Newton potentials of the exterior source, one per ball block
  std::vector<NewtonPotential> np;
  for (int i = 0; i < n; ++i) np.push_back(newton_potential(B, GS.g, f.ext[i]));
  // boundary traces P (values) and dP (radial derivatives) on each sphere
  Eigen::VectorXd P(nu), dP(nu);
  Eigen::VectorXd pv(B.n_nodes()), pd(B.n_nodes());
  for (int i0 = 0; i0 < n; ++i0) {
    pv.setZero();
    pd.setZero();
    for (int k = 0; k < B.n_nodes(); ++k) {
      Eigen::Vector3d x = GS.centers[i0] + B.nodes()[k];
      for (int i = 0; i < n; ++i) {
        if (i == i0) continue;  // own trace handled exactly below
        Eigen::Vector3d d = x - GS.centers[i];
        pv[k] += mode_table_eval(B, GS.g, np[i].val, d);
        pd[k] += mode_table_grad(B, GS.g, np[i].val, np[i].dval, d).dot(B.nodes()[k]);
      }
    }
    P.segment(i0 * nm, nm) = B.analysis() * pv + np[i0].val.col(0);
    dP.segment(i0 * nm, nm) = B.analysis() * pd + np[i0].dval.col(0);
  }
  // match Neumann data: (S - T) psi = Npart - dP + S P
  Eigen::VectorXd rhs = Npart - dP + GS.S * P;
  GlueResult out;
  out.psi = GS.glue_lu.solve(rhs);
  Eigen::VectorXd m = GS.A_lu.solve(out.psi - P);
  out.w = WeightedField::zero(GS.basis, GS.centers, GS.g);
  out.deficiency = Eigen::MatrixXd::Zero(n, nm);
  for (int i = 0; i < n; ++i) {
    BallSolve bs =
        solve_dirichlet_ball(GS.balls[i], B, f.ball[i], out.psi.segment(i * nm, nm));
    out.w.ball[i] = bs.block;
    out.deficiency.row(i) = bs.deficiency.transpose();
    out.w.ext[i] = np[i].val;
    out.w.mpole.row(i) = m.segment(i * nm, nm).transpose();
  }
  return out;
}

// Difference between the linearization around the zero-displacement
// approximate solution and the model operator:
//   (Lambda - L) w = (15/4) [ ubar^4 - 1_{ball i} r_i^{-2} v_eps(t+log R_i)^4 ] w,
// sampled into the field representation (exterior part partitioned as usual).
// `sol` must carry zero displacements: then ubar equals the model profile
// inside every cutoff radius and the difference vanishes there identically.
inline WeightedField apply_potential_difference(const ApproxSolution& sol, const GluedSystem& GS,
                                                const WeightedField& w) {
  const HarmonicBasis& B = *GS.basis;
  WeightedField out = WeightedField::zero(GS.basis, GS.centers, GS.g);
  double c4 = 15.0 / 4.0;
  Eigen::VectorXd pd(B.n_nodes());
  Eigen::VectorXd xg(3);
  for (int i = 0; i < out.nballs(); ++i) {
    double rho = sol.cutoffs[i].rho;
    for (int k = 0; k < GS.g.nt; ++k) {
      double t = k * GS.g.dt, r = std::exp(-t);
      double vmod = GS.balls[i].potential(t) / (r * r);
      Eigen::VectorXd vals = B.synthesis() * w.ball[i].col(k);
      if (r < rho) continue;  // ubar is the exact model profile: zero column
      for (int a = 0; a < B.n_nodes(); ++a) {
        xg = GS.centers[i] + r * B.nodes()[a];
        double ub = sol.eval(xg);
        pd[a] = (c4 * std::pow(ub, 4.0) - vmod) * vals[a];
      }
      out.ball[i].col(k) = B.analysis() * pd;
    }
    for (int k = 0; k < GS.g.ns; ++k) {
      double r = std::exp(k * GS.g.ds);
      for (int a = 0; a < B.n_nodes(); ++a) {
        Eigen::Vector3d x = GS.centers[i] + r * B.nodes()[a];
        bool covered = false;
        for (int b = 0; b < out.nballs() && !covered; ++b)
          covered = b != i && (x - GS.centers[b]).norm() < 1.0;
        if (covered) {
          pd[a] = 0;
          continue;
        }
        xg = x;
        double ub = sol.eval(xg);
        pd[a] = ext_partition(GS.centers, i, x) * c4 * std::pow(ub, 4.0) * w.eval(x);
      }
      out.ext[i].col(k) = B.analysis() * pd;
    }
  }
  return out;
}

struct LinearSolveResult {
  WeightedField w;
  Eigen::MatrixXd deficiency;
  Eigen::VectorXd psi;
  int iterations = 0;
  double correction = 0;  // weighted norm of the last update
};

// Solve the linearization at the zero-displacement approximate solution,
// Lambda w = f, by the contraction w <- L^{-1} (f - (Lambda - L) w).
inline LinearSolveResult full_linearized_solve(const ApproxSolution& sol, const GluedSystem& GS,
                                               const WeightedField& f, double tol = 1e-9,
                                               int max_iter = 25, double mu = -0.5) {
  ApproxSolution sol0 = sol;
  bool displaced = false;
  for (const auto& ai : sol.config.a)
    if (ai.size() && ai.norm() > 0) displaced = true;
  if (displaced) {
    Configuration c0 = sol.config;
    for (auto& ai : c0.a) ai.setZero();
    sol0 = make_approx(c0, 6, 1024);
  }
  GlueResult g0 = glue_solve(GS, f);
  LinearSolveResult res{g0.w, g0.deficiency, g0.psi, 0, 0};
  for (int it = 1; it <= max_iter; ++it) {
    WeightedField Bw = apply_potential_difference(sol0, GS, res.w);
    GlueResult gk = glue_solve(GS, f - Bw);
    res.correction = weighted_norm(gk.w - res.w, mu);
    res.w = gk.w;
    res.deficiency = gk.deficiency;
    res.psi = gk.psi;
    res.iterations = it;
    if (res.correction <= tol * std::max(1.0, weighted_norm(res.w, mu))) break;
  }
  return res;
}

// Convert low-mode deficiency coefficients into equivalent first-order
// parameter changes: dilations S_i = (R_i / eps_i) K^0_i and translations
// alpha_i^j = (1 / eps_i) K^j_i, j = 1..3.
struct ParameterShift {
  Eigen::VectorXd S;      // per ball
  Eigen::MatrixXd alpha;  // nballs x 3
};

inline ParameterShift deficiency_to_parameters(const Configuration& cfg,
                                               const Eigen::MatrixXd& deficiency) {
  int n = cfg.n();
  ParameterShift ps;
  ps.S.resize(n);
  ps.alpha.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    double ei = cfg.eps_i(i);
    ps.S[i] = cfg.R[i] / ei * deficiency(i, 0);
    for (int j = 0; j < 3; ++j) ps.alpha(i, j) = deficiency(i, 1 + j) / ei;
  }
  return ps;
}

// Norm on (field, parameter shifts): rho^nu ||v|| + eps |S| + eps rho |alpha|.
// The exterior weight exponent nup defaults to 2 (weight |x|), which is
// saturated by the |x|^{-1} far-field decay of solved fields; sources decay
// faster and can use the sharper default of weighted_norm directly.
inline double combined_norm(const Configuration& cfg, const WeightedField& v,
                            const Eigen::MatrixXd& deficiency, double mu, double nu,
                            double nup = 2.0) {
  ParameterShift ps = deficiency_to_parameters(cfg, deficiency);
  double rho = 0;
  for (int i = 0; i < cfg.n(); ++i) rho = std::max(rho, cfg.rho_i(i));
  double out = std::pow(rho, nu) * weighted_norm(v, mu, nup);
  for (int i = 0; i < cfg.n(); ++i) {
    out = std::max(out, cfg.eps * std::abs(ps.S[i]));
    out = std::max(out, cfg.eps * rho * ps.alpha.row(i).cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace yamabe
