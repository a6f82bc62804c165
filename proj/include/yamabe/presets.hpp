// Canonical test configurations (all in R^3 with unit necksize ratios).
#pragma once

#include <stdexcept>
#include <string>

#include "yamabe/balance.hpp"
#include "yamabe/core.hpp"

namespace yamabe {

inline Configuration preset(const std::string& name, double eps = 1e-2) {
  auto P3 = [](double x, double y, double z) {
    Eigen::VectorXd p(3);
    p << x, y, z;
    return p;
  };
  std::vector<Eigen::VectorXd> pts;
  double d = 4.0;  // common edge length: unit balls well separated, R_i > 1
  if (name == "triangle-N3") {
    double rc = d / std::sqrt(3.0);
    for (int k = 0; k < 3; ++k) {
      double th = PI / 2 + 2 * PI * k / 3;
      pts.push_back(P3(rc * std::cos(th), rc * std::sin(th), 0));
    }
  } else if (name == "square-N3") {
    double h = d / 2;
    pts = {P3(h, h, 0), P3(-h, h, 0), P3(-h, -h, 0), P3(h, -h, 0)};
  } else if (name == "tetrahedron-N3") {
    double s = d / (2 * std::sqrt(2.0));
    pts = {P3(s, s, s), P3(s, -s, -s), P3(-s, s, -s), P3(-s, -s, s)};
  } else if (name == "pair-N3") {
    pts = {P3(-d / 2, 0, 0), P3(d / 2, 0, 0)};
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  Eigen::VectorXd q = Eigen::VectorXd::Ones((int)pts.size());
  Configuration c = make_configuration(3, std::move(pts), q, eps);
  check_geometry(c);
  return c;
}

}  // namespace yamabe
