#pragma once

// Chart builders and finite-difference oracles shared by the unit tests.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "metharm/manifold.hpp"
#include "metharm/parser.hpp"

namespace testsupport {

using namespace metharm;

inline ManifoldPtr diag_chart(const std::string& name, std::vector<std::string> coords,
                              const std::vector<std::string>& diag, std::vector<Interval> box) {
  int n = static_cast<int>(coords.size());
  ExprMatrix g(n);
  for (int i = 0; i < n; ++i) g(i, i) = parse(diag[static_cast<std::size_t>(i)], coords);
  return std::make_shared<ChartedManifold>(name, coords, g, box);
}

inline ExprMatrix parse_matrix(const std::vector<std::vector<std::string>>& rows, const std::vector<std::string>& coords) {
  int n = static_cast<int>(rows.size());
  ExprMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = parse(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], coords);
  return m;
}

inline ManifoldPtr flat_plane() { return diag_chart("plane", {"x", "y"}, {"1", "1"}, {{-1, 1}, {-1, 1}}); }
inline ManifoldPtr unit_sphere() {
  return diag_chart("sphere", {"u", "v"}, {"1", "sin(u)^2"}, {{0.3, M_PI - 0.3}, {0, 2 * M_PI}});
}
inline ManifoldPtr polar_plane() { return diag_chart("polar", {"r", "t"}, {"1", "r^2"}, {{0.5, 3}, {0, 2 * M_PI}}); }
inline ManifoldPtr lorentz_plane() { return diag_chart("lorentz", {"x", "y"}, {"1", "-1"}, {{-1, 1}, {-1, 1}}); }
inline ManifoldPtr sphere_product() {
  return diag_chart("S2xS2", {"u", "v", "w", "z"}, {"1", "sin(u)^2", "4", "4*sin(w)^2"},
                    {{0.3, M_PI - 0.3}, {0, 2 * M_PI}, {0.3, M_PI - 0.3}, {0, 2 * M_PI}});
}
// A non-diagonal metric with non-constant curvature for generic checks.
inline ManifoldPtr warped_plane() {
  std::vector<std::string> c{"x", "y"};
  ExprMatrix g = parse_matrix({{"2 + sin(x)*cos(y)", "x*y/4"}, {"x*y/4", "1 + x^2/2"}}, c);
  return std::make_shared<ChartedManifold>("warped", c, g, std::vector<Interval>{{-1, 1}, {-1, 1}});
}

inline Point pt(std::initializer_list<double> v) {
  Point p{Eigen::VectorXd(static_cast<Eigen::Index>(v.size()))};
  int k = 0;
  for (double c : v) p.coords(k++) = c;
  return p;
}

/// Central difference of a point function along coordinate k.
template <typename F>
auto central(F&& f, const Point& x, int k, double h = 1e-5) {
  Point a = x, b = x;
  a.coords(k) += h;
  b.coords(k) -= h;
  using R = std::decay_t<decltype(f(x))>;
  R r = (f(a) - f(b)) / (2 * h);
  return r;
}

/// Christoffel symbols from finite differences of the numeric metric only.
inline std::vector<Eigen::MatrixXd> fd_christoffel(const ChartedManifold& m, const Point& x) {
  int n = m.dim();
  auto g = [&](const Point& y) -> Eigen::MatrixXd { return metric_at(m, y); };
  std::vector<Eigen::MatrixXd> dg;
  for (int l = 0; l < n; ++l) dg.push_back(central(g, x, l));
  Eigen::MatrixXd gi = g(x).inverse();
  std::vector<Eigen::MatrixXd> gam(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l)
          gam[static_cast<std::size_t>(k)](i, j) +=
              0.5 * gi(k, l) * (dg[static_cast<std::size_t>(i)](j, l) + dg[static_cast<std::size_t>(j)](i, l) - dg[static_cast<std::size_t>(l)](i, j));
  return gam;
}

}  // namespace testsupport

namespace testsupport {

inline ExprMatrix golden_diag(int n_phi, int n) {
  ExprMatrix j(n);
  for (int i = 0; i < n; ++i) j(i, i) = i < n_phi ? Expr(kGoldenRatio) : Expr(1.0 - kGoldenRatio);
  return j;
}

/// Golden structure rotated by the angle x on the flat plane.
inline ExprMatrix twisted_golden() {
  return parse_matrix({{"phi*cos(x)^2 + (1-phi)*sin(x)^2", "(2*phi-1)*sin(x)*cos(x)"},
                       {"(2*phi-1)*sin(x)*cos(x)", "phi*sin(x)^2 + (1-phi)*cos(x)^2"}},
                      {"x", "y"});
}

}  // namespace testsupport

#include "metharm/metallic.hpp"

namespace testsupport {

inline MetallicStructure structure(const std::string& name, ManifoldPtr m, double p, double q, ExprMatrix j) {
  return MetallicStructure{name, std::move(m), p, q, std::move(j)};
}

inline MetallicStructure f1() { return structure("F1", flat_plane(), 1, 1, golden_diag(1, 2)); }
inline MetallicStructure f2() { return structure("F2", sphere_product(), 1, 1, golden_diag(2, 4)); }
inline MetallicStructure f3() { return structure("F3", flat_plane(), 1, 1, twisted_golden()); }
inline MetallicStructure f4() {
  return structure("F4", lorentz_plane(), 0, -1, parse_matrix({{"0", "1"}, {"-1", "0"}}, {"x", "y"}));
}

/// Golden structure on the unit sphere patch, rotated by the angle u in the
/// orthonormal frame (d_u, d_v / sin u). Curved and not parallel.
inline MetallicStructure twisted_sphere() {
  std::vector<std::string> c{"u", "v"};
  ExprMatrix j = parse_matrix({{"phi*cos(u)^2 + (1-phi)*sin(u)^2", "(2*phi-1)*sin(u)*cos(u)*sin(u)"},
                               {"(2*phi-1)*sin(u)*cos(u)/sin(u)", "phi*sin(u)^2 + (1-phi)*cos(u)^2"}},
                              c);
  return structure("twisted-sphere", unit_sphere(), 1, 1, j);
}

}  // namespace testsupport
