#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "yamabe/approx.hpp"
#include "yamabe/presets.hpp"

using namespace yamabe;

namespace {

// 4th-order 5-point Laplacian, per axis.
double fd_laplacian(const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& x, double h) {
  double acc = 0;
  for (int d = 0; d < x.size(); ++d) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(x.size());
    e[d] = h;
    acc += (-f(x + 2 * e) + 16 * f(x + e) - 30 * f(x) + 16 * f(x - e) - f(x - 2 * e)) /
           (12 * h * h);
  }
  return acc;
}

double fit_slope(const std::vector<double>& eps, const std::vector<double>& val) {
  double mx = 0, my = 0;
  int n = (int)eps.size();
  for (int i = 0; i < n; ++i) {
    mx += std::log(eps[i]);
    my += std::log(val[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < n; ++i) {
    sxy += (std::log(eps[i]) - mx) * (std::log(val[i]) - my);
    sxx += (std::log(eps[i]) - mx) * (std::log(eps[i]) - mx);
  }
  return sxy / sxx;
}

double max_low_mode_moment(const ApproxSolution& sol, const HarmonicBasis& B) {
  double m = 0;
  for (int i = 0; i < sol.n(); ++i) {
    double rho = sol.cutoffs[i].rho;
    for (int j = 0; j < 4; ++j) {
      Moments mo = matching_moments(sol, B, i, j);
      m = std::max(m, std::abs(mo.dirichlet));
      m = std::max(m, rho * std::abs(mo.neumann));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("degree-7 cutoff: values, smoothness, derivative bounds") {
  CutoffFamily chi{0.03};
  REQUIRE(chi(0.5 * chi.rho) == 1.0);
  REQUIRE(chi(chi.rho) == 1.0);
  REQUIRE(chi(2 * chi.rho) == 0.0);
  REQUIRE(chi(5 * chi.rho) == 0.0);
  // monotone decreasing inside the annulus, derivatives match finite differences
  double h = 1e-6 * chi.rho;
  double prev = 1.0;
  for (int k = 1; k <= 40; ++k) {
    double r = chi.rho * (1.0 + k / 41.0);
    double c = chi(r);
    REQUIRE(c < prev);
    prev = c;
    double h2 = 1e-4 * chi.rho;
    double d1_fd = (chi(r + h) - chi(r - h)) / (2 * h);
    double d2_fd = (chi(r + h2) - 2 * c + chi(r - h2)) / (h2 * h2);
    REQUIRE(chi.d1(r) == Catch::Approx(d1_fd).margin(1e-6 / chi.rho));
    REQUIRE(chi.d2(r) == Catch::Approx(d2_fd).margin(1e-4 / (chi.rho * chi.rho)));
    REQUIRE(std::abs(chi.d1(r)) <= 2.1875 / chi.rho * (1 + 1e-12));
  }
  // C^1 across the seams: derivative -> 0 at both ends
  REQUIRE(std::abs(chi.d1(chi.rho * (1 + 1e-8))) < 1e-4 / chi.rho);
  REQUIRE(std::abs(chi.d1(chi.rho * (2 - 1e-8))) < 1e-4 / chi.rho);
}

TEST_CASE("approximate solution reduces to exact pieces in pure regions") {
  Configuration cfg = preset("triangle-N3", 1e-2);
  ApproxSolution sol = make_approx(cfg);
  std::mt19937 rng(20260826);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd dir(3);
    dir << uni(rng), uni(rng), uni(rng);
    dir.normalize();
    int i = trial % 3;
    double rho = sol.cutoffs[i].rho;
    // inside the cutoff: exactly the Delaunay piece
    Eigen::VectorXd x_in = cfg.points[i] + (0.3 + 0.6 * std::abs(uni(rng))) * rho * dir;
    REQUIRE(sol.eval(x_in) == sol.family(i, x_in));
    // outside all cutoffs: exactly the harmonic blend
    Eigen::VectorXd x_out = cfg.points[i] + (2.5 + std::abs(uni(rng))) * rho * dir;
    bool clear = true;
    for (int k = 0; k < 3; ++k)
      if ((x_out - cfg.points[k]).norm() < 2 * sol.cutoffs[k].rho) clear = false;
    if (!clear) continue;
    REQUIRE(sol.eval(x_out) == sol.eval_wbar(x_out));
    REQUIRE(sol.eval(x_out) > 0);
  }
}

TEST_CASE("singular blend is harmonic away from the points") {
  Configuration cfg = preset("triangle-N3", 1e-2);
  ApproxSolution sol = make_approx(cfg);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  int checked = 0;
  while (checked < 25) {
    Eigen::VectorXd x(3);
    x << uni(rng), uni(rng), uni(rng);
    bool ok = true;
    for (int k = 0; k < 3; ++k)
      if ((x - cfg.points[k]).norm() < 0.3) ok = false;
    if (!ok) continue;
    double lap = fd_laplacian([&](const Eigen::VectorXd& y) { return sol.eval_wbar(y); }, x, 1e-2);
    REQUIRE(std::abs(lap) < 1e-8);
    // gradient consistency
    Eigen::VectorXd g = sol.grad_wbar(x);
    for (int d = 0; d < 3; ++d) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
      e[d] = 1e-6;
      double fd = (sol.eval_wbar(x + e) - sol.eval_wbar(x - e)) / 2e-6;
      REQUIRE(g[d] == Catch::Approx(fd).margin(1e-8));
    }
    ++checked;
  }
}

TEST_CASE("triangle barycenter value of the singular blend") {
  double eps = 1e-2;
  Configuration cfg = preset("triangle-N3", eps);
  double d = (cfg.points[0] - cfg.points[1]).norm();
  double circum = d / std::sqrt(3.0);
  Eigen::VectorXd bary = (cfg.points[0] + cfg.points[1] + cfg.points[2]) / 3.0;
  ApproxSolution sol = make_approx(cfg);
  double expected = 3.0 * (eps / 2.0) * std::sqrt(cfg.R[0]) / circum;
  REQUIRE(sol.eval_wbar(bary) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("error term matches a finite-difference check of the equation") {
  Configuration cfg = preset("triangle-N3", 1e-2);
  ApproxSolution sol = make_approx(cfg);
  auto u = [&](const Eigen::VectorXd& y) { return sol.eval(y); };
  double c = sol.c_N(), p = sol.p_crit();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto check_at = [&](const Eigen::VectorXd& x, double h, double tol) {
    double zeta_fd = fd_laplacian(u, x, h) + c * std::pow(u(x), p);
    double za = sol.zeta(x);
    double scale = std::max({std::abs(za), std::abs(zeta_fd), 1e-12});
    REQUIRE(std::abs(za - zeta_fd) < tol * scale + 3e-7);
  };
  for (int trial = 0; trial < 8; ++trial) {
    Eigen::VectorXd dir(3);
    dir << uni(rng), uni(rng), uni(rng);
    dir.normalize();
    int i = trial % 3;
    double rho = sol.cutoffs[i].rho;
    // deep interior: zeta vanishes identically
    REQUIRE(sol.zeta(cfg.points[i] + 0.5 * rho * dir) == 0.0);
    // transition annulus (dominant region)
    check_at(cfg.points[i] + (1.2 + 0.6 * std::abs(uni(rng))) * rho * dir, 1e-3 * rho, 1e-3);
    // exterior region: zeta = c wbar^p
    Eigen::VectorXd x_out = cfg.points[i] + (3.0 + std::abs(uni(rng))) * rho * dir;
    REQUIRE(sol.zeta(x_out) ==
            Catch::Approx(c * std::pow(sol.eval_wbar(x_out), p)).epsilon(1e-14));
    check_at(x_out, 1e-3 * rho, 1e-3);
  }
}

TEST_CASE("matching moments decay superlinearly when balanced, linearly otherwise") {
  HarmonicBasis B(4);
  std::vector<double> eps_grid = {3e-2, 1e-2, 3e-3};
  std::vector<double> bal, unbal;
  for (double eps : eps_grid) {
    Configuration cfg = preset("triangle-N3", eps);
    bal.push_back(max_low_mode_moment(make_approx(cfg), B));

    Configuration bad = cfg;
    bad.R[0] *= 1.3;  // break the closure condition at one point
    bad.a = compute_displacements(bad.points, bad.q, bad.R, bad.dim);
    unbal.push_back(max_low_mode_moment(make_approx(bad), B));
  }
  double s_bal = fit_slope(eps_grid, bal);
  double s_unbal = fit_slope(eps_grid, unbal);
  CAPTURE(bal, unbal, s_bal, s_unbal);
  REQUIRE(s_bal == Catch::Approx(2.6).margin(0.3));
  REQUIRE(s_unbal == Catch::Approx(1.0).margin(0.3));
}

TEST_CASE("sampled error field reproduces pointwise values") {
  Configuration cfg = preset("triangle-N3", 1e-2);
  ApproxSolution sol = make_approx(cfg);
  auto basis = std::make_shared<HarmonicBasis>(8);
  FieldGrids g = default_grids(sol);
  WeightedField zf = zeta_field(sol, basis, g);
  double scale = 0;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<std::pair<Eigen::Vector3d, double>> samples;
  for (int trial = 0; trial < 24; ++trial) {
    Eigen::VectorXd dir(3);
    dir << uni(rng), uni(rng), uni(rng);
    dir.normalize();
    int i = trial % 3;
    double rho = sol.cutoffs[i].rho;
    double r = trial < 12 ? (1.05 + 0.9 * std::abs(uni(rng))) * rho  // annulus
                          : (1.5 + 6.0 * std::abs(uni(rng)));        // exterior
    Eigen::VectorXd x = cfg.points[i] + r * dir;
    bool clear = true;
    for (int k = 0; k < 3; ++k)
      if (k != i && (x - cfg.points[k]).norm() < 1.0) clear = false;
    if (!clear) continue;
    double zv = sol.zeta(x);
    scale = std::max(scale, std::abs(zv));
    samples.push_back({Eigen::Vector3d(x), zv});
  }
  REQUIRE(scale > 0);
  for (auto& [x, zv] : samples) REQUIRE(zf.eval(x) == Catch::Approx(zv).margin(1e-3 * scale));
}
