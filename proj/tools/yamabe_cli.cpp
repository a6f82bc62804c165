// Command-line front end: configuration ingestion, pipeline orchestration,
// verification reports, and plot-data emission (CSV/JSON only; no plotting).
//
// Subcommands:
//   delaunay  orbit and period tables for the radial profile family
//   balance   translation parameters R and displacements a for a point set
//   approx    approximate-solution error term and boundary-matching moments
//   linear    boundary-response diagnostics and manufactured-solution checks
//   solve     full nonlinear pipeline (approximate solution -> Picard)
//   verify    the full verification suite (one line per criterion)
//   report    verification suite + aggregate JSON and Markdown reports
//
// Exit code 0 iff every invoked check passes.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "acceptance_suite.hpp"
#include "yamabe/nonlinear.hpp"
#include "yamabe/presets.hpp"

using namespace yamabe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
  int dim = 3;
  double eps = 1e-2;
  int lmax = 8;
  int tgrid_per_period = 1024;
  double tol_energy = 1e-9;
  double tol_linear = 1e-9;
  int max_iter = 25;
  std::string out;
  std::string preset_name = "triangle-N3";
  long seed = 1;
  std::string config_path;
  std::string emit;
  std::vector<std::vector<double>> points;
  std::vector<double> q;
};

void add_common_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON configuration document")
      ->check(CLI::ExistingFile);
  cmd->add_option("--dim", o.dim, "ambient dimension N >= 3");
  cmd->add_option("--eps", o.eps, "necksize parameter");
  cmd->add_option("--lmax", o.lmax, "spherical-harmonic truncation degree");
  cmd->add_option("--tgrid-per-period", o.tgrid_per_period, "radial grid nodes per orbit period");
  cmd->add_option("--tol-energy", o.tol_energy, "orbit energy-drift tolerance");
  cmd->add_option("--tol-linear", o.tol_linear, "linear-solve tolerance");
  cmd->add_option("--max-iter", o.max_iter, "Picard iteration cap");
  cmd->add_option("--out", o.out, "output directory for CSV/JSON artifacts");
  cmd->add_option("--preset", o.preset_name,
                  "point configuration: triangle-N3, square-N3, tetrahedron-N3, pair-N3");
  cmd->add_option("--seed", o.seed, "seed for any randomized diagnostic draws");
}

// config keys mirror the flags; flags given on the command line win
void apply_config(const CLI::App* cmd, Options& o) {
  if (o.config_path.empty()) return;
  std::ifstream in(o.config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CLI::ValidationError("--config", std::string("malformed JSON: ") + e.what());
  }
  auto overridden = [&](const char* flag) {
    const CLI::Option* op = cmd->get_option_no_throw(flag);
    return op && op->count() > 0;
  };
  auto load = [&](const char* key, const char* flag, auto& slot) {
    if (doc.contains(key) && !overridden(flag)) {
      try {
        slot = doc.at(key).get<std::decay_t<decltype(slot)>>();
      } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", std::string("key '") + key + "': " + e.what());
      }
    }
  };
  load("dim", "--dim", o.dim);
  load("eps", "--eps", o.eps);
  load("lmax", "--lmax", o.lmax);
  load("tgrid_per_period", "--tgrid-per-period", o.tgrid_per_period);
  load("tol_energy", "--tol-energy", o.tol_energy);
  load("tol_linear", "--tol-linear", o.tol_linear);
  load("max_iter", "--max-iter", o.max_iter);
  load("out", "--out", o.out);
  load("preset", "--preset", o.preset_name);
  load("seed", "--seed", o.seed);
  load("points", "", o.points);
  load("q", "", o.q);
}

Configuration build_configuration(const Options& o) {
  if (!o.points.empty()) {
    std::vector<Eigen::VectorXd> pts;
    for (const auto& p : o.points) {
      if ((int)p.size() != o.dim)
        throw CLI::ValidationError("--config", "each point must have 'dim' coordinates");
      pts.push_back(Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
    }
    Eigen::VectorXd q = Eigen::VectorXd::Ones((int)pts.size());
    if (!o.q.empty()) {
      if (o.q.size() != pts.size())
        throw CLI::ValidationError("--config", "'q' must have one entry per point");
      q = Eigen::Map<const Eigen::VectorXd>(o.q.data(), o.q.size());
    }
    Configuration c = make_configuration(o.dim, std::move(pts), q, o.eps);
    check_geometry(c);
    return c;
  }
  return preset(o.preset_name, o.eps);
}

std::ofstream open_artifact(const Options& o, const std::string& name) {
  fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  std::ofstream f(dir / name);
  f.precision(17);
  return f;
}

void write_json(const Options& o, const std::string& name, const json& doc) {
  auto f = open_artifact(o, name);
  f << doc.dump(2) << "\n";
  std::cout << "wrote " << (o.out.empty() ? name : o.out + "/" + name) << "\n";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool check_line(bool ok, const std::string& what) {
  std::cout << (ok ? "PASS " : "FAIL ") << what << "\n";
  return ok;
}

// ---------------------------------------------------------------- delaunay

int run_delaunay(const Options& o) {
  DelaunayOrbit orb = integrate_orbit({o.dim, o.eps}, 5, o.tgrid_per_period);
  bool ok = check_line(
      orb.energy_drift <= o.tol_energy,
      "energy drift over 5 periods: " + num(orb.energy_drift) +
          " (tol-energy " + num(o.tol_energy) + ")");
  std::cout << "period T_eps = " << orb.period << " at N = " << o.dim << ", eps = " << o.eps
            << "\n";
  if (!o.emit.empty()) {
    orb.export_csv(o.emit);
    std::cout << "wrote " << o.emit << "\n";
  } else if (!o.out.empty()) {
    orb.export_csv((fs::path(o.out.empty() ? "." : o.out) / "orbit.csv").string());
    std::cout << "wrote " << o.out << "/orbit.csv\n";
  }
  if (!o.out.empty()) {
    auto f = open_artifact(o, "periods.csv");
    f << "eps,T_eps\n";
    double lo = o.eps / 100, hi = 0.9 * eps_cyl(o.dim);
    for (int k = 0; k < 10; ++k) {
      double e = lo * std::pow(hi / lo, k / 9.0);
      f << e << "," << period({o.dim, e}) << "\n";
    }
    std::cout << "wrote " << o.out << "/periods.csv\n";
  }
  return ok ? 0 : 1;
}

// ----------------------------------------------------------------- balance

int run_balance(const Options& o) {
  Configuration c = build_configuration(o);
  double res = balancing_residual(c.points, c.q, c.R, c.dim);
  for (int i = 0; i < c.n(); ++i)
    std::cout << "point " << i << ": R = " << c.R[i] << ", a = " << c.a[i].transpose() << "\n";
  bool ok = check_line(res <= 1e-12,
                       "balancing closure residual: " + num(res) + " (tol 1e-12)");
  if (!o.out.empty()) {
    auto f = open_artifact(o, "balance.csv");
    f << "i,R";
    for (int d = 0; d < c.dim; ++d) f << ",a" << d;
    f << "\n";
    for (int i = 0; i < c.n(); ++i) {
      f << i << "," << c.R[i];
      for (int d = 0; d < c.dim; ++d) f << "," << c.a[i][d];
      f << "\n";
    }
    std::cout << "wrote " << o.out << "/balance.csv\n";
  }
  return ok ? 0 : 1;
}

// ------------------------------------------------------------------ approx

int run_approx(const Options& o) {
  Configuration c = build_configuration(o);
  ApproxSolution sol = make_approx(c, 6, o.tgrid_per_period);
  HarmonicBasis B(std::min(o.lmax, 4));
  json moments = json::object();
  double worst = 0;
  for (int i = 0; i < c.n(); ++i)
    for (int j = 0; j < B.n_modes() && j < 4; ++j) {
      Moments m = matching_moments(sol, B, i, j);
      moments["i=" + std::to_string(i) + ",j=" + std::to_string(j) +
              ",eps=" + std::to_string(c.eps)] = {{"dirichlet", m.dirichlet},
                                                  {"neumann", m.neumann}};
      worst = std::max(worst, std::abs(m.dirichlet));
    }
  double bound = std::pow(c.eps, 1.0 + 8.0 / (c.dim * c.dim - 4.0));
  bool ok = check_line(worst <= 100 * bound,
                       "max low-mode Dirichlet moment: " + num(worst) +
                           " (balanced scaling bound 100*eps^{1+8/(N^2-4)} = " +
                           num(100 * bound) + ")");
  if (!o.out.empty()) {
    write_json(o, "moments.json", moments);
    auto basis = std::make_shared<HarmonicBasis>(o.lmax);
    FieldGrids g = default_grids(sol);
    WeightedField zf = zeta_field(sol, basis, g);
    auto f = open_artifact(o, "zeta.csv");
    f << "point,mode,r,value\n";
    for (int i = 0; i < c.n(); ++i)
      for (int j = 0; j < basis->n_modes(); ++j)
        for (int k = 0; k < g.nt; k += 4)
          f << i << "," << j << "," << std::exp(-k * g.dt) << "," << zf.ball[i](j, k) << "\n";
    std::cout << "wrote " << o.out << "/zeta.csv\n";
  }
  return ok ? 0 : 1;
}

// ------------------------------------------------------------------ linear

int run_linear(const Options& o) {
  using verification::detail_ns::manufactured_source;
  using verification::detail_ns::w_true;
  DelaunayOrbit orb = integrate_orbit({3, o.eps}, 5, o.tgrid_per_period);
  BallModel m;
  m.orb = &orb;
  m.R = 2.0;
  m.dim = 3;
  m.g.dt = orb.period / o.tgrid_per_period;
  m.g.nt = (int)std::ceil((std::log(m.R) + 3 * orb.period + 10) / m.g.dt) + 1;
  m.g.ds = 0.02;
  m.g.ns = 8;
  Eigen::VectorXd V = m.potential_grid();

  // boundary-response table
  std::cout << "interior boundary response at R = 2, eps = " << o.eps << ":\n";
  std::vector<std::pair<int, double>> dtn;
  for (int l = 0; l <= o.lmax; ++l) {
    double v = interior_dtn(m, l, l * (l + 1.0));
    dtn.push_back({l, v});
    std::cout << "  l = " << l << ": " << v << "\n";
  }
  if (!o.out.empty()) {
    auto f = open_artifact(o, "dtn.csv");
    f << "l,lambda,dtn\n";
    for (auto& [l, v] : dtn) f << l << "," << l * (l + 1.0) << "," << v << "\n";
    std::cout << "wrote " << o.out << "/dtn.csv\n";
  }

  // manufactured per-mode solves
  double wmax = 0;
  for (int k = 0; k < m.g.nt; ++k) wmax = std::max(wmax, std::abs(w_true(k * m.g.dt)));
  double err = 0;
  for (int l : {0, 1}) {
    LowModePair P = low_mode_pair(m, l);
    ModeSolution s = solve_mode_low(m, P, manufactured_source(m, V, l * (l + 1.0)), 0.0);
    for (int k = 0; k < m.g.nt; ++k) err = std::max(err, std::abs(s.w[k] - w_true(k * m.g.dt)));
  }
  for (int l : {2, 5, 8}) {
    ModeSolution s =
        solve_mode_high(m, V, l * (l + 1.0), manufactured_source(m, V, l * (l + 1.0)), 0.0);
    for (int k = 0; k < m.g.nt; ++k) err = std::max(err, std::abs(s.w[k] - w_true(k * m.g.dt)));
  }
  bool ok = check_line(err / wmax <= 1e-6,
                       "manufactured per-mode solve rel err: " + num(err / wmax) +
                           " (tol 1e-6)");
  return ok ? 0 : 1;
}

// ------------------------------------------------------------------- solve

int run_solve(const Options& o) {
  Configuration c = build_configuration(o);
  ApproxSolution sol = make_approx(c, 6, o.tgrid_per_period);
  auto basis = std::make_shared<HarmonicBasis>(o.lmax);
  FieldGrids g = default_grids(sol);
  GluedSystem GS = make_glued_system(sol, basis, g);
  PicardOptions opt;
  opt.max_iter = o.max_iter;
  opt.lin_tol = o.tol_linear;
  ExactSolution es = picard_solve(sol, GS, opt);

  bool ok = true;
  ok &= check_line(es.converged, "Picard converged in " + std::to_string(es.iterations) +
                                     " steps (max " + std::to_string(o.max_iter) + ")");
  ok &= check_line(es.residual_norm <= 1e-3 * es.zeta_norm,
                   "residual " + num(es.residual_norm) + " <= 1e-3 * ||zeta|| = " +
                       num(1e-3 * es.zeta_norm));
  ok &= check_line(es.contraction < 1.0,
                   "contraction factor " + num(es.contraction) + " (tol < 1)");
  ok &= check_line(es.min_u > 0, "solution positivity: min u = " + num(es.min_u));

  if (!o.out.empty()) {
    json doc;
    doc["config"] = {{"dim", c.dim}, {"eps", c.eps}, {"lmax", o.lmax},
                     {"preset", o.points.empty() ? o.preset_name : "custom"}};
    doc["parameters"] = json::array();
    for (int i = 0; i < c.n(); ++i) {
      json p;
      p["R"] = c.R[i];
      p["R_shift"] = es.shift.S[i];
      p["a"] = std::vector<double>(c.a[i].data(), c.a[i].data() + c.a[i].size());
      Eigen::VectorXd al = es.shift.alpha.row(i);
      p["a_shift"] = std::vector<double>(al.data(), al.data() + al.size());
      doc["parameters"].push_back(p);
    }
    doc["norms"] = {{"zeta", es.zeta_norm},      {"w", es.w_norm},
                    {"residual", es.residual_norm}, {"first_step", es.first_step_norm},
                    {"contraction", es.contraction}, {"min_u", es.min_u}};
    doc["trace"] = {{"residual", es.residual_trace}, {"step", es.step_trace}};
    doc["converged"] = es.converged;
    write_json(o, "solution.json", doc);

    auto f = open_artifact(o, "fields.csv");
    f << "region,mode,t,value\n";
    for (int i = 0; i < c.n(); ++i)
      for (int j = 0; j < basis->n_modes(); ++j)
        for (int k = 0; k < g.nt; k += 4)
          f << "ball" << i << "," << j << "," << k * g.dt << "," << es.w.ball[i](j, k) << "\n";
    for (int i = 0; i < c.n(); ++i)
      for (int j = 0; j < basis->n_modes(); ++j)
        for (int k = 0; k < g.ns; k += 4)
          f << "ext" << i << "," << j << "," << k * g.ds << "," << es.w.ext[i](j, k) << "\n";
    std::cout << "wrote " << o.out << "/fields.csv\n";
  }
  return ok ? 0 : 1;
}

// ---------------------------------------------------------- verify / report

int run_verify(const Options& o, bool with_report) {
  auto results = verification::run_all();
  int failures = verification::failure_count(results);
  if (with_report || !o.out.empty()) {
    json doc = json::array();
    for (const auto& r : results)
      doc.push_back({{"criterion", r.id}, {"pass", r.ok}, {"detail", r.detail}});
    write_json(o, "report.json", doc);
    auto f = open_artifact(o, "report.md");
    f << "# Verification report\n\n";
    for (const auto& r : results)
      f << "- " << (r.ok ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.detail << "\n";
    f << "\n" << (failures == 0 ? "All" : "Not all") << " criteria passed ("
      << (int)results.size() - failures << "/" << results.size() << ").\n";
    std::cout << "wrote " << (o.out.empty() ? "report.md" : o.out + "/report.md") << "\n";
  }
  std::cout << (failures == 0 ? "OK" : "FAILED") << ": " << (int)results.size() - failures
            << " of " << results.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constant-scalar-curvature gluing pipeline"};
  app.require_subcommand(1);
  Options o;

  CLI::App* cmd_delaunay = app.add_subcommand("delaunay", "orbit and period tables");
  cmd_delaunay->add_option("--emit", o.emit, "orbit CSV output path");
  CLI::App* cmd_balance = app.add_subcommand("balance", "translation and displacement solve");
  CLI::App* cmd_approx = app.add_subcommand("approx", "error term and matching moments");
  CLI::App* cmd_linear = app.add_subcommand("linear", "boundary-response diagnostics");
  CLI::App* cmd_solve = app.add_subcommand("solve", "full nonlinear pipeline");
  CLI::App* cmd_verify = app.add_subcommand("verify", "verification suite");
  CLI::App* cmd_report = app.add_subcommand("report", "verification suite + reports");
  for (CLI::App* c : {cmd_delaunay, cmd_balance, cmd_approx, cmd_linear, cmd_solve, cmd_verify,
                      cmd_report})
    add_common_flags(c, o);

  CLI11_PARSE(app, argc, argv);
  CLI::App* cmd = app.get_subcommands().front();

  try {
    apply_config(cmd, o);
    if (cmd == cmd_delaunay) return run_delaunay(o);
    if (cmd == cmd_balance) return run_balance(o);
    if (cmd == cmd_approx) return run_approx(o);
    if (cmd == cmd_linear) return run_linear(o);
    if (cmd == cmd_solve) return run_solve(o);
    if (cmd == cmd_verify) return run_verify(o, false);
    if (cmd == cmd_report) return run_verify(o, true);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error [" << cmd->get_name() << "]: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
