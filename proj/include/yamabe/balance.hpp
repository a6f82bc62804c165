// Singular configurations and the balancing system fixing the Delaunay
// translation parameters R_i and the displacement vectors a_i:
//   sum_{i != i0} R_i^{(N-2)/2} R_{i0}^{(N-2)/2} q_i |x_{i0}-x_i|^{2-N} = q_{i0}
//   a_{i0} = -(1/q_{i0}) R_{i0}^{(N-2)/2} sum_{i != i0}
//            q_i R_i^{(N-2)/2} |x_{i0}-x_i|^{-N} (x_{i0}-x_i).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace yamabe {

struct Configuration {
  int dim = 3;
  std::vector<Eigen::VectorXd> points;  // n distinct singular points
  Eigen::VectorXd q;                    // necksize ratios, positive
  double eps = 0;                       // overall scale
  Eigen::VectorXd R;                    // translation parameters, each > 1
  std::vector<Eigen::VectorXd> a;       // displacement vectors
  double kappa = 1;                     // dilation bookkeeping

  int n() const { return (int)points.size(); }
  double eps_i(int i) const { return eps * q[i]; }
  double rho_i(int i) const {
    return std::pow(eps_i(i), 4.0 / (dim * dim - 4.0));
  }
};

inline double balancing_residual(const std::vector<Eigen::VectorXd>& pts,
                                 const Eigen::VectorXd& q, const Eigen::VectorXd& R, int N) {
  int n = (int)pts.size();
  double m = (N - 2.0) / 2.0, worst = 0;
  for (int i0 = 0; i0 < n; ++i0) {
    double s = 0;
    for (int i = 0; i < n; ++i)
      if (i != i0)
        s += std::pow(R[i] * R[i0], m) * q[i] * std::pow((pts[i0] - pts[i]).norm(), 2.0 - N);
    worst = std::max(worst, std::abs(s - q[i0]) / q[i0]);
  }
  return worst;
}

// Damped Newton in xi = log R; positivity is automatic in these coordinates.
inline Eigen::VectorXd solve_balancing(const std::vector<Eigen::VectorXd>& pts,
                                       const Eigen::VectorXd& q, int N, int max_iter = 60) {
  int n = (int)pts.size();
  if (n < 2) throw std::invalid_argument("solve_balancing: need n >= 2");
  double m = (N - 2.0) / 2.0;
  Eigen::MatrixXd G(n, n);  // q_i |x_{i0}-x_i|^{2-N}
  for (int i0 = 0; i0 < n; ++i0)
    for (int i = 0; i < n; ++i) {
      if (i == i0) { G(i0, i) = 0; continue; }
      double d = (pts[i0] - pts[i]).norm();
      if (d == 0) throw std::invalid_argument("solve_balancing: coincident points");
      G(i0, i) = q[i] * std::pow(d, 2.0 - N);
    }
  Eigen::VectorXd xi(n);
  for (int i0 = 0; i0 < n; ++i0)
    xi[i0] = -std::log(G.row(i0).sum() / q[i0]) / (N - 2.0);

  auto F = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd f(n);
    for (int i0 = 0; i0 < n; ++i0) {
      double s = 0;
      for (int i = 0; i < n; ++i)
        if (i != i0) s += G(i0, i) * std::exp(m * (x[i] + x[i0]));
      f[i0] = s - q[i0];
    }
    return f;
  };
  Eigen::VectorXd f = F(xi);
  for (int it = 0; it < max_iter; ++it) {
    if (f.norm() <= 1e-14 * q.norm()) break;
    Eigen::MatrixXd J(n, n);
    for (int i0 = 0; i0 < n; ++i0) {
      for (int i = 0; i < n; ++i)
        J(i0, i) = (i == i0) ? m * (f[i0] + q[i0]) : m * G(i0, i) * std::exp(m * (xi[i] + xi[i0]));
    }
    Eigen::VectorXd dx = J.fullPivLu().solve(-f);
    double step = 1.0;
    for (int half = 0; half < 30; ++half) {
      Eigen::VectorXd xn = xi + step * dx;
      Eigen::VectorXd fn = F(xn);
      if (fn.norm() < f.norm()) { xi = xn; f = fn; break; }
      step *= 0.5;
      if (half == 29)
        throw std::runtime_error("solve_balancing: Newton stalled (q outside solvable cone?)");
    }
  }
  if (f.norm() > 1e-12 * q.norm())
    throw std::runtime_error("solve_balancing: no solution after max_iter (residual " +
                             std::to_string(f.norm()) + ")");
  return xi.array().exp();
}

inline std::vector<Eigen::VectorXd> compute_displacements(const std::vector<Eigen::VectorXd>& pts,
                                                          const Eigen::VectorXd& q,
                                                          const Eigen::VectorXd& R, int N) {
  int n = (int)pts.size();
  double m = (N - 2.0) / 2.0;
  std::vector<Eigen::VectorXd> a(n);
  for (int i0 = 0; i0 < n; ++i0) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(pts[i0].size());
    for (int i = 0; i < n; ++i)
      if (i != i0) {
        Eigen::VectorXd d = pts[i0] - pts[i];
        s += q[i] * std::pow(R[i], m) * std::pow(d.norm(), -(double)N) * d;
      }
    a[i0] = -std::pow(R[i0], m) / q[i0] * s;
  }
  return a;
}

// Assemble a balanced configuration; requires unit balls disjoint, R_i > 1.
inline Configuration make_configuration(int dim, std::vector<Eigen::VectorXd> pts,
                                        Eigen::VectorXd q, double eps) {
  Configuration c;
  c.dim = dim;
  c.points = std::move(pts);
  c.q = std::move(q);
  c.eps = eps;
  c.R = solve_balancing(c.points, c.q, dim);
  c.a = compute_displacements(c.points, c.q, c.R, dim);
  return c;
}

inline void check_geometry(const Configuration& c) {
  for (int i = 0; i < c.n(); ++i) {
    if (c.R[i] <= 1) throw std::runtime_error("configuration infeasible: R_i <= 1");
    for (int k = i + 1; k < c.n(); ++k)
      if ((c.points[i] - c.points[k]).norm() <= 2.0)
        throw std::runtime_error("configuration infeasible: unit balls intersect");
  }
}

// Dilate x_i -> kappa x_i with R_i -> kappa R_i, which leaves the balancing
// residual invariant (|x|^{2-N} scales by kappa^{2-N}, R^m R^m by kappa^{N-2}).
inline Configuration rescale(const Configuration& c, double kappa) {
  if (!(kappa > 0)) throw std::invalid_argument("rescale: kappa must be positive");
  Configuration r = c;
  for (auto& p : r.points) p *= kappa;
  r.R *= kappa;
  r.a = compute_displacements(r.points, r.q, r.R, r.dim);
  r.kappa = c.kappa * kappa;
  check_geometry(r);
  return r;
}

}  // namespace yamabe
