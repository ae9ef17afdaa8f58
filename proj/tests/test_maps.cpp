#include <gtest/gtest.h>

#include <random>

#include "metharm/maps.hpp"
#include "support.hpp"

using namespace metharm;
using namespace testsupport;

namespace {

constexpr double kTheta = 0.5;

Expr var(const std::string& n) { return Expr::variable(n); }

MapGeometry map_geometry(const std::string& name, ManifoldPtr src, ManifoldPtr tgt, std::vector<Expr> comps) {
  return MapGeometry(SmoothMap{name, src, tgt, std::move(comps)}, std::make_shared<GeometryCache>(src),
                     std::make_shared<GeometryCache>(tgt));
}

MetallicMap identity_map(MetallicStructure s) {
  std::vector<Expr> comps;
  for (int k = 0; k < s.host->dim(); ++k) comps.push_back(Expr::variable(s.host->var(k)));
  return MetallicMap(map_geometry("identity", s.host, s.host, comps), s, s);
}

ManifoldPtr rotated_plane() { return diag_chart("rotated", {"a", "b"}, {"1", "1"}, {{-1.5, 1.5}, {-1.5, 1.5}}); }

/// F3 carried by the rotation R(theta): Jbar(y) = R J(R^T y) R^T.
MetallicMap rotation_map() {
  MetallicStructure s = f3();
  ManifoldPtr tgt = rotated_plane();
  double c = std::cos(kTheta), sn = std::sin(kTheta);
  std::unordered_map<int, Expr> back{{s.host->var(0), Expr(c) * var("a") + Expr(sn) * var("b")},
                                     {s.host->var(1), Expr(-sn) * var("a") + Expr(c) * var("b")}};
  ExprMatrix j(2);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) j(i, k) = substitute(s.J(i, k), back);
  ExprMatrix r(2);
  r(0, 0) = Expr(c), r(0, 1) = Expr(-sn), r(1, 0) = Expr(sn), r(1, 1) = Expr(c);
  ExprMatrix rt(2);
  rt(0, 0) = Expr(c), rt(0, 1) = Expr(sn), rt(1, 0) = Expr(-sn), rt(1, 1) = Expr(c);
  MetallicStructure t = structure("F3-rotated", tgt, 1, 1, r * j * rt);
  std::vector<Expr> comps{Expr(c) * var("x") - Expr(sn) * var("y"), Expr(sn) * var("x") + Expr(c) * var("y")};
  return MetallicMap(map_geometry("rotation", s.host, tgt, comps), s, t);
}

/// Rotation of the sphere patch about its axis; the twisted structure depends on u only.
MetallicMap sphere_rotation() {
  MetallicStructure s = twisted_sphere();
  return MetallicMap(map_geometry("spin", s.host, s.host, {var("u"), var("v") + Expr(0.3)}), s, s);
}

ManifoldPtr torus() { return diag_chart("torus", {"x", "y"}, {"1", "1"}, {{0, 2 * M_PI}, {0, 2 * M_PI}}); }

MetallicMap torus_swap() {
  ManifoldPtr t = torus();
  MetallicStructure s = structure("T-golden", t, 1, 1, golden_diag(1, 2));
  ExprMatrix jb(2);
  jb(0, 0) = Expr(1.0 - kGoldenRatio), jb(1, 1) = Expr(kGoldenRatio);
  MetallicStructure tb = structure("T-golden-swapped", t, 1, 1, jb);
  return MetallicMap(map_geometry("swap", t, t, {var("y"), var("x")}), s, tb);
}

/// Finite-difference oracle for the coordinate tension.
Eigen::VectorXd fd_tension(const MapGeometry& mg, const Point& x) {
  const ChartedManifold& m = *mg.map().source;
  int n = m.dim(), tm = mg.target_dim();
  double h = 1e-4;
  auto phi = [&](const Point& y) -> Eigen::VectorXd { return mg.image(y).coords; };
  std::vector<Eigen::MatrixXd> gs = fd_christoffel(m, x);
  std::vector<Eigen::MatrixXd> gt = fd_christoffel(*mg.map().target, mg.image(x));
  Eigen::MatrixXd d(tm, n);
  for (int i = 0; i < n; ++i) d.col(i) = central(phi, x, i);
  Eigen::MatrixXd gi = metric_at(m, x).inverse();
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(tm);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Point pp = x, pm = x, mp = x, mmm = x;
      pp.coords(i) += h, pp.coords(j) += h;
      pm.coords(i) += h, pm.coords(j) -= h;
      mp.coords(i) -= h, mp.coords(j) += h;
      mmm.coords(i) -= h, mmm.coords(j) -= h;
      Eigen::VectorXd hij = (phi(pp) - phi(pm) - phi(mp) + phi(mmm)) / (4 * h * h);
      for (int k = 0; k < n; ++k) hij -= gs[static_cast<std::size_t>(k)](i, j) * d.col(k);
      for (int g = 0; g < tm; ++g) hij(g) += d.col(i).dot(gt[static_cast<std::size_t>(g)] * d.col(j));
      tau += gi(i, j) * hij;
    }
  return tau;
}

}  // namespace

TEST(Pushforward, Examples) {
  ManifoldPtr p = flat_plane();
  MapGeometry lin = map_geometry("lin", p, p, {var("x") + var("y"), var("x") - var("y")});
  Eigen::VectorXd v = lin.pushforward(pt({0.1, 0.2}), Eigen::Vector2d(1, 0));
  EXPECT_EQ(v, Eigen::Vector2d(1, 1));
  MapGeometry id = map_geometry("id", p, p, {var("x"), var("y")});
  EXPECT_EQ(id.pushforward(pt({0.3, 0.4}), Eigen::Vector2d(2, -1)), Eigen::Vector2d(2, -1));
  MapGeometry cst = map_geometry("const", p, p, {Expr(0.2), Expr(-0.1)});
  EXPECT_EQ(cst.pushforward(pt({0.3, 0.4}), Eigen::Vector2d(2, -1)).norm(), 0.0);
}

TEST(Pushforward, MatchesFiniteDifferences) {
  ManifoldPtr s = unit_sphere();
  MapGeometry mg = map_geometry("wobble", s, s, {var("u") + Expr(0.1) * sin(var("v")), var("v") + Expr(0.2) * var("u")});
  for (const Point& x : sample_points(*s, 10, 3)) {
    auto phi = [&](const Point& y) -> Eigen::VectorXd { return mg.image(y).coords; };
    Eigen::MatrixXd d = mg.jacobian_at(x);
    for (int i = 0; i < 2; ++i) EXPECT_LT((d.col(i) - central(phi, x, i)).norm(), 1e-8);
  }
}

TEST(Isometry, Checks) {
  MetallicMap id = identity_map(f1());
  std::vector<Point> pts = sample_points(*id.source().host, 10, 4);
  EXPECT_EQ(check_isometry(id.geometry(), pts).residual, 0.0);
  EXPECT_EQ(id.check_metallic_map(pts).residual, 0.0);

  MetallicMap rot = rotation_map();
  std::vector<Point> rp = sample_points(*rot.source().host, 10, 5);
  EXPECT_LT(check_isometry(rot.geometry(), rp).residual, 1e-12);
  EXPECT_LT(rot.check_metallic_map(rp).residual, 1e-12);

  ManifoldPtr p = flat_plane();
  MapGeometry stretch = map_geometry("stretch", p, diag_chart("wide", {"a", "b"}, {"1", "1"}, {{-2, 2}, {-1, 1}}),
                                     {Expr(2.0) * var("x"), var("y")});
  EXPECT_NEAR(check_isometry(stretch, {pt({0, 0})}).residual, 3.0, 1e-14);
}

TEST(Tension, Examples) {
  ManifoldPtr p = flat_plane();
  MapGeometry lin = map_geometry("lin", p, p, {var("x") + var("y"), var("x") - var("y")});
  EXPECT_LT(lin.tension(pt({0.2, 0.3})).norm(), 1e-12);
  MapGeometry sq = map_geometry("square", p, p, {var("x") * var("x"), var("y")});
  Eigen::VectorXd t = sq.tension(pt({1, 0}));
  EXPECT_NEAR(t(0), 2.0, 1e-14);
  EXPECT_NEAR(t(1), 0.0, 1e-14);
  EXPECT_FALSE(harmonicity(sq, {pt({1, 0})}, 1e-8).harmonic);
  EXPECT_TRUE(harmonicity(lin, sample_points(*p, 10, 6), 1e-12).harmonic);
  MetallicMap id = identity_map(f2());
  EXPECT_LT(id.geometry().tension(pt({1.0, 0.5, 1.2, 2.0})).norm(), 1e-12);
}

TEST(Tension, DualPathsAndFiniteDifferences) {
  ManifoldPtr s = unit_sphere();
  ManifoldPtr polar = polar_plane();
  std::vector<MapGeometry> maps{
      map_geometry("wobble", s, s, {var("u") + Expr(0.1) * sin(var("v")), var("v") + Expr(0.2) * var("u")}),
      map_geometry("polar", polar, flat_plane(), {var("r") * cos(var("t")) * Expr(0.3), var("r") * sin(var("t")) * Expr(0.3)}),
      map_geometry("into-sphere", flat_plane(), s, {Expr(1.5) + Expr(0.3) * var("x") * var("y"), var("x") + var("y")})};
  for (const MapGeometry& mg : maps)
    for (const Point& x : mg.admissible(sample_points(*mg.map().source, 10, 7))) {
      Eigen::VectorXd a = mg.tension(x);
      EXPECT_LT((a - mg.tension_frame(x)).norm(), 1e-8) << mg.map().name;
      EXPECT_LT((a - mg.tension_frame(x, 5)).norm(), 1e-8) << mg.map().name;
      EXPECT_LT((a - fd_tension(mg, x)).norm(), 1e-5 * (1.0 + a.norm())) << mg.map().name;
    }
}

TEST(Isometry, IdentityOfTheTensionWithJ) {
  for (MetallicMap m : {identity_map(f3()), rotation_map(), sphere_rotation(), torus_swap()}) {
    for (const Point& x : m.geometry().admissible(sample_points(*m.source().host, 8, 8)))
      EXPECT_LT(m.isometry_identity_residual(x), 1e-8) << m.geometry().map().name;
  }
  ManifoldPtr p = flat_plane();
  MapGeometry sq = map_geometry("square", p, p, {var("x") * var("x"), var("y")});
  MetallicMap bad(sq, f1(), f1());
  EXPECT_THROW(bad.isometry_identity_residual(pt({0.3, 0.1})), PreconditionError);
}

TEST(Isometry, CorollaryTransfer) {
  for (MetallicMap m : {identity_map(f3()), rotation_map(), sphere_rotation()}) {
    for (const Point& x : m.geometry().admissible(sample_points(*m.source().host, 6, 9))) {
      MetallicMap::TransferProbe p = m.corollary_transfer(x, 1e-9);
      EXPECT_TRUE(p.hypothesis_met) << m.geometry().map().name << " " << p.hypothesis;
      EXPECT_TRUE(p.conclusion_holds);
    }
  }
}

TEST(Triviality, DifferentParametersForceScalarStructures) {
  MetallicStructure a = structure("scalar", flat_plane(), 2, -0.75, parse_matrix({{"1.5", "0"}, {"0", "1.5"}}, {"x", "y"}));
  MetallicStructure b = structure("scalar-bar", flat_plane(), 1, 0.75, parse_matrix({{"1.5", "0"}, {"0", "1.5"}}, {"x", "y"}));
  EXPECT_EQ(triviality_check(a, b, {pt({0, 0})}).kind, TrivialityVerdict::Kind::trivial_confirmed);
}

TEST(Lift, Examples) {
  MetallicMap id = identity_map(f1());
  GeneralizedSection s{Eigen::Vector2d(0.3, -1), Eigen::Vector2d(2, 0.5)};
  GeneralizedSection r = id.lift(pt({0.1, 0.1}), s);
  EXPECT_EQ((r - s).max_abs(), 0.0);

  ManifoldPtr p = flat_plane();
  MetallicMap lin(map_geometry("lin", p, diag_chart("big", {"a", "b"}, {"1", "1"}, {{-2, 2}, {-2, 2}}),
                               {var("x") + var("y"), var("x") - var("y")}),
                  f1(), f1());
  GeneralizedSection u = lin.lift(pt({0, 0}), GeneralizedSection{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)});
  // (A^T)^{-1} e_1 with A = [[1,1],[1,-1]]
  EXPECT_NEAR(u.alpha(0), 0.5, 1e-15);
  EXPECT_NEAR(u.alpha(1), 0.5, 1e-15);

  MetallicMap sq(map_geometry("square", p, p, {var("x") * var("x"), var("y")}), f1(), f1());
  EXPECT_THROW(sq.lift(pt({0, 0.2}), s), SingularJacobianError);
}

TEST(Lift, CommutesWithGeneralizedStructureForMetallicMaps) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (MetallicMap m : {identity_map(f3()), rotation_map(), sphere_rotation(), torus_swap()}) {
    for (const Point& x : m.geometry().admissible(sample_points(*m.source().host, 8, 10))) {
      GeneralizedSection s{Eigen::Vector2d(nd(rng), nd(rng)), Eigen::Vector2d(nd(rng), nd(rng))};
      EXPECT_LT(m.lift_commutation_residual(x, s), 1e-9);
    }
  }
}

TEST(TensionHat, Decomposition) {
  for (MetallicMap m : {identity_map(f1()), identity_map(f3()), rotation_map(), sphere_rotation(), torus_swap()}) {
    for (const Point& x : m.geometry().admissible(sample_points(*m.source().host, 6, 11))) {
      MetallicMap::TensionHat t = m.tension_hat_decomposition(x);
      EXPECT_LT(t.vector_residual(), 1e-8) << m.geometry().map().name;
      EXPECT_LT(t.covector_residual(), 1e-8) << m.geometry().map().name;
    }
  }
  MetallicMap sw = torus_swap();
  MetallicMap::HatHarmonicity h = sw.hat_harmonicity(pt({1, 2}));
  EXPECT_LT(h.tension_hat, 1e-12);
  EXPECT_LT(h.twisted_sum, 1e-12);
  EXPECT_TRUE(h.consistent(1e-10));
}

TEST(TensionHat, RequiresIsometry) {
  ManifoldPtr p = flat_plane();
  MetallicMap sq(map_geometry("square", p, p, {var("x") * var("x"), var("y")}), f1(), f1());
  EXPECT_THROW(sq.tension_hat_decomposition(pt({0.3, 0.2})), PreconditionError);
}

TEST(TensionHat, JHatIdentity) {
  for (MetallicMap m : {identity_map(f1()), identity_map(f3()), rotation_map(), sphere_rotation(), torus_swap()}) {
    for (const Point& x : m.geometry().admissible(sample_points(*m.source().host, 6, 12))) {
      MetallicMap::JHatTension r = m.jhat_tension_identity(x);
      EXPECT_LT(r.vector_residual(), 1e-7) << m.geometry().map().name;
      EXPECT_LT(r.covector_residual(), 1e-7) << m.geometry().map().name;
    }
  }
}
