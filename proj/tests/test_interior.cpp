#include <catch2/catch_amalgamated.hpp>

#include "yamabe/interior.hpp"

using namespace yamabe;

namespace {

BallModel make_model(const DelaunayOrbit& orb, double R) {
  BallModel m;
  m.orb = &orb;
  m.R = R;
  m.dim = 3;
  double T = orb.period;
  m.g.dt = T / 1024.0;
  m.g.nt = (int)std::ceil((std::log(R) + 3 * T + 10) / m.g.dt) + 1;
  m.g.ds = 0.02;
  m.g.ns = 8;
  return m;
}

// manufactured cylindrical amplitude with w(0) = 0 and fast decay
double w_true(double t) { return std::exp(-2 * t) * std::sin(2 * t); }
double w_true_dd(double t) { return -8 * std::exp(-2 * t) * std::cos(2 * t); }

Eigen::VectorXd manufactured_source(const BallModel& m, const Eigen::VectorXd& V, double lambda) {
  Eigen::VectorXd f(m.g.nt);
  double g2 = m.gamma2(lambda);
  for (int k = 0; k < m.g.nt; ++k) {
    double t = k * m.g.dt;
    f[k] = w_true_dd(t) - g2 * w_true(t) + V[k] * w_true(t);
  }
  return f;
}

// five-point fourth-order second derivative on the grid
double fd_dd(const Eigen::VectorXd& w, int k, double dt) {
  return (-w[k - 2] + 16 * w[k - 1] - 30 * w[k] + 16 * w[k + 1] - w[k + 2]) / (12 * dt * dt);
}

}  // namespace

TEST_CASE("homogeneous pairs have constant Wronskian") {
  DelaunayOrbit orb = integrate_orbit({3, 1e-2}, 5, 1024);
  BallModel m = make_model(orb, 2.0);
  for (int l : {0, 1}) {
    LowModePair P = low_mode_pair(m, l);
    double W0 = P.wronskian;
    REQUIRE(W0 != 0.0);
    for (int k = 0; k < m.g.nt; k += m.g.nt / 17) {
      double Wk = P.plus[k] * P.dminus[k] - P.dplus[k] * P.minus[k];
      REQUIRE(Wk == Catch::Approx(W0).epsilon(1e-6));
    }
  }
}

TEST_CASE("interior boundary response approaches the closed-form limits") {
  // small-neck limit at R = 2: radial mode -> -2, translational modes -> 1
  DelaunayOrbit orb = integrate_orbit({3, 1e-4}, 5, 1024);
  BallModel m = make_model(orb, 2.0);
  REQUIRE(interior_dtn(m, 0, 0.0) == Catch::Approx(-2.0).margin(1e-3));
  REQUIRE(interior_dtn(m, 1, 2.0) == Catch::Approx(1.0).margin(1e-3));
  // coercive modes approach the harmonic growth rate l
  REQUIRE(interior_dtn(m, 2, 6.0) == Catch::Approx(2.0).margin(1e-3));
  REQUIRE(interior_dtn(m, 3, 12.0) == Catch::Approx(3.0).margin(1e-3));
}

TEST_CASE("boundary response at moderate neck stays finite and ordered") {
  DelaunayOrbit orb = integrate_orbit({3, 1e-2}, 5, 1024);
  BallModel m = make_model(orb, 2.0);
  double prev = interior_dtn(m, 2, 6.0);
  for (int l = 3; l <= 8; ++l) {
    double cur = interior_dtn(m, l, l * (l + 1.0));
    REQUIRE(cur > prev);  // stiffer modes respond more steeply
    prev = cur;
  }
}

TEST_CASE("ill-conditioned boundary placement is rejected") {
  DelaunayOrbit orb = integrate_orbit({3, 1e-2}, 5, 1024);
  BallModel m = make_model(orb, std::exp(orb.period / 2));  // boundary at a bulge zero of vdot
  REQUIRE_THROWS(interior_dtn(m, 0, 0.0));
}

TEST_CASE("low-mode variation of constants reproduces a manufactured solution") {
  DelaunayOrbit orb = integrate_orbit({3, 1e-2}, 5, 1024);
  BallModel m = make_model(orb, 2.0);
  Eigen::VectorXd V = m.potential_grid();
  for (int l : {0, 1}) {
    LowModePair P = low_mode_pair(m, l);
    double lambda = l * (l + 1.0);
    Eigen::VectorXd f = manufactured_source(m, V, lambda);
    ModeSolution sol = solve_mode_low(m, P, f, 0.0);
    double err = 0;
    for (int k = 0; k < m.g.nt; ++k) err = std::max(err, std::abs(sol.w[k] - w_true(k * m.g.dt)));
    CAPTURE(l, err);
    REQUIRE(err < 1e-6);
    REQUIRE(std::abs(sol.deficiency) < 1e-6 * m.eps());
    // nonzero boundary value: adds the bounded homogeneous field, tracked by
    // the deficiency coefficient
    ModeSolution sol2 = solve_mode_low(m, P, f, 0.7);
    REQUIRE(sol2.w[0] == Catch::Approx(0.7).margin(1e-10));
    double mult = sol2.deficiency / m.eps();
    for (int k = 0; k < m.g.nt; k += m.g.nt / 7) {
      REQUIRE(sol2.w[k] - sol.w[k] == Catch::Approx(mult * P.plus[k]).margin(1e-9));
    }
    // the output satisfies the mode equation pointwise (FD truncation scales
    // with the solution size)
    double amp = sol2.w.cwiseAbs().maxCoeff();
    for (int k = 2; k < m.g.nt - 2; k += 97) {
      double res = fd_dd(sol2.w, k, m.g.dt) - (m.gamma2(lambda) - V[k]) * sol2.w[k] - f[k];
      REQUIRE(std::abs(res) < 1e-5 * std::max(1.0, amp));
    }
  }
}

TEST_CASE("coercive-mode sweep reproduces a manufactured solution") {
  DelaunayOrbit orb = integrate_orbit({3, 1e-2}, 5, 1024);
  BallModel m = make_model(orb, 2.0);
  Eigen::VectorXd V = m.potential_grid();
  for (int l : {2, 5, 8}) {
    double lambda = l * (l + 1.0);
    Eigen::VectorXd f = manufactured_source(m, V, lambda);
    ModeSolution sol = solve_mode_high(m, V, lambda, f, 0.0);
    double err = 0;
    for (int k = 0; k < m.g.nt; ++k) err = std::max(err, std::abs(sol.w[k] - w_true(k * m.g.dt)));
    CAPTURE(l, err);
    REQUIRE(err < 1e-6);
  }
  // homogeneous solve with unit boundary data decays into the ball
  ModeSolution h = solve_mode_high(m, V, 20.0, Eigen::VectorXd::Zero(m.g.nt), 1.0);
  REQUIRE(h.w[0] == 1.0);
  int k5 = (int)(5.0 / m.g.dt);
  REQUIRE(std::abs(h.w[k5]) < 1e-8);
  REQUIRE(std::abs(h.w[m.g.nt - 1]) == 0.0);
}

TEST_CASE("whole-ball solve handles gauge bookkeeping per mode") {
  DelaunayOrbit orb = integrate_orbit({3, 1e-2}, 5, 1024);
  BallModel m = make_model(orb, 2.0);
  Eigen::VectorXd V = m.potential_grid();
  HarmonicBasis B(3);
  int nm = B.n_modes(), nt = m.g.nt;
  Eigen::MatrixXd S(nm, nt);
  for (int j = 0; j < nm; ++j) {
    Eigen::VectorXd f = manufactured_source(m, V, B.mode(j).lambda);
    for (int k = 0; k < nt; ++k) S(j, k) = std::exp(k * m.g.dt * 2.5) * f[k];
  }
  BallSolve bs = solve_dirichlet_ball(m, B, S, Eigen::VectorXd::Zero(nm));
  for (int j = 0; j < nm; ++j) {
    double err = 0;
    for (int k = 0; k < nt; ++k) {
      double w = bs.block(j, k) * std::exp(-k * m.g.dt * 0.5);
      err = std::max(err, std::abs(w - w_true(k * m.g.dt)));
    }
    CAPTURE(j, err);
    REQUIRE(err < 1e-6);
    if (B.mode(j).l >= 2) REQUIRE(bs.deficiency[j] == 0.0);
    REQUIRE(std::abs(bs.deficiency[j]) < 1e-6 * m.eps());
  }
}
