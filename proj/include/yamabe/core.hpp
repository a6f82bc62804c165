// Shared numerical kernels: fixed-step 8th-order Runge-Kutta, Gauss-Legendre
// nodes, cumulative quadrature on uniform grids, cubic Hermite interpolation.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace yamabe {

constexpr double PI = 3.14159265358979323846264338327950288;

// ---------------------------------------------------------------------------
// Fixed-step explicit Runge-Kutta of order 8 (the 12-stage Dormand-Prince
// scheme, propagation formula only -- no error estimator, no step control).
// State is a small std::array; the right-hand side is any callable
// f(t, y) -> deriv.
// ---------------------------------------------------------------------------
template <std::size_t D, class F>
std::array<double, D> rk8_step(const F& f, double t, std::array<double, D> w, double h) {
  using V = std::array<double, D>;
  auto axpy = [](const V& w0, double hh, std::initializer_list<std::pair<double, const V*>> terms) {
    V r = w0;
    for (std::size_t i = 0; i < D; ++i) {
      double s = 0;
      for (auto& [c, k] : terms) s += c * (*k)[i];
      r[i] += hh * s;
    }
    return r;
  };
  static constexpr double
    c2 = 0.526001519587677318785587544488E-01, c3 = 0.789002279381515978178381316732E-01,
    c4 = 0.118350341907227396726757197510E+00, c5 = 0.281649658092772603273242802490E+00,
    c6 = 1.0 / 3.0, c7 = 0.25, c8 = 0.307692307692307692307692307692E+00,
    c9 = 0.651282051282051282051282051282E+00, c10 = 0.6,
    c11 = 0.857142857142857142857142857142E+00,
    b1 = 5.42937341165687622380535766363E-2, b6 = 4.45031289275240888144113950566E0,
    b7 = 1.89151789931450038304281599044E0, b8 = -5.8012039600105847814672114227E0,
    b9 = 3.1116436695781989440891606237E-1, b10 = -1.52160949662516078556178806805E-1,
    b11 = 2.01365400804030348374776537501E-1, b12 = 4.47106157277725905176885569043E-2,
    a21 = 5.26001519587677318785587544488E-2,
    a31 = 1.97250569845378994544595329183E-2, a32 = 5.91751709536136983633785987549E-2,
    a41 = 2.95875854768068491816892993775E-2, a43 = 8.87627564304205475450678981324E-2,
    a51 = 2.41365134159266685502369798665E-1, a53 = -8.84549479328286085344864962717E-1,
    a54 = 9.24834003261792003115737966543E-1,
    a61 = 3.7037037037037037037037037037E-2, a64 = 1.70828608729473871279604482173E-1,
    a65 = 1.25467687566822425016691814123E-1,
    a71 = 3.7109375E-2, a74 = 1.70252211019544039314978060272E-1,
    a75 = 6.02165389804559606850219397283E-2, a76 = -1.7578125E-2,
    a81 = 3.70920001185047927108779319836E-2, a84 = 1.70383925712239993810214054705E-1,
    a85 = 1.07262030446373284651809199168E-1, a86 = -1.53194377486244017527936158236E-2,
    a87 = 8.27378916381402288758473766002E-3,
    a91 = 6.24110958716075717114429577812E-1, a94 = -3.36089262944694129406857109825E0,
    a95 = -8.68219346841726006818189891453E-1, a96 = 2.75920996994467083049415600797E1,
    a97 = 2.01540675504778934086186788979E1, a98 = -4.34898841810699588477366255144E1,
    a101 = 4.77662536438264365890433908527E-1, a104 = -2.48811461997166764192642586468E0,
    a105 = -5.90290826836842996371446475743E-1, a106 = 2.12300514481811942347288949897E1,
    a107 = 1.52792336328824235832596922938E1, a108 = -3.32882109689848629194453265587E1,
    a109 = -2.03312017085086261358222928593E-2,
    a111 = -9.3714243008598732571704021658E-1, a114 = 5.18637242884406370830023853209E0,
    a115 = 1.09143734899672957818500254654E0, a116 = -8.14978701074692612513997267357E0,
    a117 = -1.85200656599969598641566180701E1, a118 = 2.27394870993505042818970056734E1,
    a119 = 2.49360555267965238987089396762E0, a1110 = -3.0467644718982195003823669022E0,
    a121 = 2.27331014751653820792359768449E0, a124 = -1.05344954667372501984066689879E1,
    a125 = -2.00087205822486249909675718444E0, a126 = -1.79589318631187989172765950534E1,
    a127 = 2.79488845294199600508499808837E1, a128 = -2.85899827713502369474065508674E0,
    a129 = -8.87285693353062954433549289258E0, a1210 = 1.23605671757943030647266201528E1,
    a1211 = 6.43392746015763530355970484046E-1;

  V k1 = f(t, w);
  V k2 = f(t + c2 * h, axpy(w, h, {{a21, &k1}}));
  V k3 = f(t + c3 * h, axpy(w, h, {{a31, &k1}, {a32, &k2}}));
  V k4 = f(t + c4 * h, axpy(w, h, {{a41, &k1}, {a43, &k3}}));
  V k5 = f(t + c5 * h, axpy(w, h, {{a51, &k1}, {a53, &k3}, {a54, &k4}}));
  V k6 = f(t + c6 * h, axpy(w, h, {{a61, &k1}, {a64, &k4}, {a65, &k5}}));
  V k7 = f(t + c7 * h, axpy(w, h, {{a71, &k1}, {a74, &k4}, {a75, &k5}, {a76, &k6}}));
  V k8 = f(t + c8 * h, axpy(w, h, {{a81, &k1}, {a84, &k4}, {a85, &k5}, {a86, &k6}, {a87, &k7}}));
  V k9 = f(t + c9 * h, axpy(w, h, {{a91, &k1}, {a94, &k4}, {a95, &k5}, {a96, &k6}, {a97, &k7}, {a98, &k8}}));
  V k10 = f(t + c10 * h, axpy(w, h, {{a101, &k1}, {a104, &k4}, {a105, &k5}, {a106, &k6}, {a107, &k7}, {a108, &k8}, {a109, &k9}}));
  V k11 = f(t + c11 * h, axpy(w, h, {{a111, &k1}, {a114, &k4}, {a115, &k5}, {a116, &k6}, {a117, &k7}, {a118, &k8}, {a119, &k9}, {a1110, &k10}}));
  V k12 = f(t + h, axpy(w, h, {{a121, &k1}, {a124, &k4}, {a125, &k5}, {a126, &k6}, {a127, &k7}, {a128, &k8}, {a129, &k9}, {a1210, &k10}, {a1211, &k11}}));
  return axpy(w, h, {{b1, &k1}, {b6, &k6}, {b7, &k7}, {b8, &k8}, {b9, &k9}, {b10, &k10}, {b11, &k11}, {b12, &k12}});
}

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on P_n.
// ---------------------------------------------------------------------------
struct GaussLegendre {
  std::vector<double> x, w;
};

inline GaussLegendre gauss_legendre(int n) {
  GaussLegendre g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-like initial guess for the i-th root.
    double x = std::cos(PI * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    g.x[n - 1 - i] = x;
    g.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Cumulative integral on a uniform grid, 4th order. Returns C with
// C[k] = integral from x[0] to x[k]; uses the 4-point interior rule
//   int_{x_k}^{x_{k+1}} g = h/24 * (-g_{k-1} + 13 g_k + 13 g_{k+1} - g_{k+2})
// with one-sided variants at the ends.
// ---------------------------------------------------------------------------
inline std::vector<double> cumulative_integral(const std::vector<double>& g, double h) {
  std::size_t n = g.size();
  std::vector<double> C(n, 0.0);
  if (n < 2) return C;
  if (n < 4) {  // fall back to trapezoid on tiny grids
    for (std::size_t k = 1; k < n; ++k) C[k] = C[k - 1] + 0.5 * h * (g[k - 1] + g[k]);
    return C;
  }
  auto seg = [&](std::size_t k) {  // integral over [x_k, x_{k+1}]
    if (k == 0) return h / 24.0 * (9 * g[0] + 19 * g[1] - 5 * g[2] + g[3]);
    if (k == n - 2) return h / 24.0 * (g[n - 4] - 5 * g[n - 3] + 19 * g[n - 2] + 9 * g[n - 1]);
    return h / 24.0 * (-g[k - 1] + 13 * g[k] + 13 * g[k + 1] - g[k + 2]);
  };
  for (std::size_t k = 1; k < n; ++k) C[k] = C[k - 1] + seg(k - 1);
  return C;
}

// 6th-order variant: each segment [x_k, x_{k+1}] is integrated with a 6-point
// Lagrange stencil (centered where possible, shifted near the ends). Stencil
// weights are generated once by polynomial exactness.
inline std::vector<double> cumulative_integral6(const std::vector<double>& g, double h) {
  std::size_t n = g.size();
  if (n < 6) return cumulative_integral(g, h);
  // weights[a][j]: integral over [a, a+1] (grid units) of the Lagrange basis
  // on nodes 0..5; a = 0..4
  static const auto weights = [] {
    std::array<std::array<double, 6>, 5> W{};
    for (int a = 0; a < 5; ++a) {
      Eigen::MatrixXd V(6, 6);
      Eigen::VectorXd mom(6);
      for (int m = 0; m < 6; ++m) {
        for (int j = 0; j < 6; ++j) V(m, j) = std::pow((double)j, m);
        mom[m] = (std::pow(a + 1.0, m + 1) - std::pow((double)a, m + 1)) / (m + 1);
      }
      Eigen::VectorXd w = V.fullPivLu().solve(mom);
      for (int j = 0; j < 6; ++j) W[a][j] = w[j];
    }
    return W;
  }();
  std::vector<double> C(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    std::size_t s = k >= 2 ? std::min(k - 2, n - 6) : 0;
    const auto& w = weights[k - s];
    double acc = 0;
    for (int j = 0; j < 6; ++j) acc += w[j] * g[s + j];
    C[k + 1] = C[k] + h * acc;
  }
  return C;
}

// Cubic Hermite interpolation of (f0, d0) at x=0 and (f1, d1) at x=h,
// evaluated at x = s*h with s in [0, 1].
inline double hermite(double f0, double d0, double f1, double d1, double h, double s) {
  double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * h * d0 +
         (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * h * d1;
}

// Quintic Hermite interpolation from values, first and second derivatives at
// the two cell ends; used for orbit samples where the ODE supplies exact
// derivatives (two orders better than cubic at no extra storage cost).
inline double quintic_hermite(double f0, double d0, double s0, double f1, double d1, double s1,
                              double h, double s) {
  double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  return f0 * (1 - 10 * s3 + 15 * s4 - 6 * s5) + h * d0 * (s - 6 * s3 + 8 * s4 - 3 * s5) +
         h * h * s0 * (0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5) +
         f1 * (10 * s3 - 15 * s4 + 6 * s5) + h * d1 * (-4 * s3 + 7 * s4 - 3 * s5) +
         h * h * s1 * (0.5 * s3 - s4 + 0.5 * s5);
}

// Derivative of the cubic Hermite interpolant at s in [0, 1].
inline double hermite_deriv(double f0, double d0, double f1, double d1, double h, double s) {
  double s2 = s * s;
  return ((6 * s2 - 6 * s) * f0 + (3 * s2 - 4 * s + 1) * h * d0 +
          (-6 * s2 + 6 * s) * f1 + (3 * s2 - 2 * s) * h * d1) / h;
}

}  // namespace yamabe
