#include <gtest/gtest.h>

#include <random>

#include "metharm/genbundle.hpp"
#include "support.hpp"

using namespace metharm;
using namespace testsupport;

namespace {

struct Fixture {
  MetallicStructure s;
  GeometryPtr geo;
  EndoFormsPtr forms;
  GeneralizedGeometry gg;
  explicit Fixture(MetallicStructure st)
      : s(std::move(st)),
        geo(std::make_shared<GeometryCache>(s.host)),
        forms(std::make_shared<EndoForms>(geo, s.J)),
        gg(s, geo, forms) {}
};

Eigen::VectorXd random_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

GeneralizedSection random_section(std::mt19937_64& rng, int n) { return {random_vec(rng, n), random_vec(rng, n)}; }

GeneralizedSection sec(std::initializer_list<double> x, std::initializer_list<double> a) {
  return {pt(x).coords, pt(a).coords};
}

Eigen::MatrixXd j_at(const MetallicStructure& s, const Point& x) {
  Evaluator ev(s.host->binding(x));
  return evaluate(ev, s.J);
}

}  // namespace

TEST(GHat, Examples) {
  Fixture a(f1());
  Point o = pt({0.1, -0.2});
  EXPECT_NEAR(a.gg.g_hat(o, sec({1, 0}, {0, 0}), sec({1, 0}, {0, 0})), 1.0, 1e-15);
  // no vector part, so the J terms vanish
  EXPECT_NEAR(a.gg.g_hat(o, sec({0, 0}, {1, 0}), sec({0, 0}, {1, 0})), 1.0, 1e-15);
  // d_x against dx: p/d
  EXPECT_NEAR(a.gg.g_hat(o, sec({1, 0}, {0, 0}), sec({0, 0}, {1, 0})), (1.0 - 2.0 * kGoldenRatio) / 5.0, 1e-14);
}

TEST(GHat, TildeFormAgrees) {
  std::mt19937_64 rng(3);
  for (auto st : {f1(), f2(), f3(), f4()}) {
    Fixture a(st);
    int n = a.s.host->dim();
    for (const Point& x : sample_points(*a.s.host, 20, 5)) {
      LocalGeometry at(*a.geo, x);
      Eigen::MatrixXd j = j_at(a.s, x);
      GeneralizedSection u = random_section(rng, n), v = random_section(rng, n);
      EXPECT_NEAR(a.gg.g_hat(at, j, u, v), a.gg.g_hat_tilde_form(at, j, u, v), 1e-12) << st.name;
    }
  }
}

// g^(xi_i, xi_j) = (1 + 1/sqrt(p^2+4q))/2 delta_ij: the cross terms carry sqrt|d|/d.
TEST(GHat, XiFrameGram) {
  for (auto st : {f1(), f2(), f3()}) {
    Fixture a(st);
    double expected = 0.5 * (1.0 + 1.0 / std::sqrt(a.s.discriminant()));
    for (const Point& x : sample_points(*a.s.host, 20, 8)) {
      LocalGeometry at(*a.geo, x);
      Eigen::MatrixXd j = j_at(a.s, x);
      GeneralizedFrame xi = a.gg.frame(at, j, orthonormal_frame(*a.s.host, x, 4));
      Eigen::MatrixXd gm = a.gg.xi_gram(at, j, xi);
      Eigen::MatrixXd want = expected * Eigen::MatrixXd::Identity(xi.size(), xi.size());
      EXPECT_LT((gm - want).cwiseAbs().maxCoeff(), 1e-12) << st.name;
      EXPECT_NEAR(a.gg.xi_orthonormality_residual(at, j, xi), 1.0 - expected, 1e-12);
    }
  }
  // unit discriminant: p = 1, q = 0, J a projector
  MetallicStructure proj = structure("projector", flat_plane(), 1, 0, parse_matrix({{"1", "0"}, {"0", "0"}}, {"x", "y"}));
  Fixture b(proj);
  LocalGeometry at(*b.geo, pt({0, 0}));
  Eigen::MatrixXd j = j_at(b.s, pt({0, 0}));
  EXPECT_LT(b.gg.xi_orthonormality_residual(at, j, b.gg.frame(at, j, orthonormal_frame(*b.s.host, pt({0, 0}), 7))), 1e-14);
}

TEST(JHat, BlockAction) {
  Fixture a(f1());
  GeneralizedSection r = a.gg.j_hat(pt({0, 0}), sec({1, 0}, {0, 0}));
  EXPECT_NEAR(r.X(0), kGoldenRatio, 1e-15);
  EXPECT_NEAR(r.X(1), 0.0, 1e-15);
  EXPECT_NEAR(r.alpha(0), 1.0, 1e-15);
  EXPECT_NEAR(r.alpha(1), 0.0, 1e-15);
  EXPECT_EQ(a.gg.j_hat(pt({0, 0}), GeneralizedSection::zero(2)).max_abs(), 0.0);
}

TEST(JHat, PolynomialAndSymmetry) {
  std::mt19937_64 rng(11);
  for (auto st : {f1(), f2(), f3(), f4()}) {
    Fixture a(st);
    int n = a.s.host->dim();
    for (const Point& x : sample_points(*a.s.host, 20, 9)) {
      LocalGeometry at(*a.geo, x);
      Eigen::MatrixXd j = j_at(a.s, x);
      GeneralizedSection u = random_section(rng, n), v = random_section(rng, n);
      GeneralizedSection ju = a.gg.j_hat(at, j, u);
      GeneralizedSection poly = a.gg.j_hat(at, j, ju) - a.s.p * ju - a.s.q * u;
      EXPECT_LT(poly.max_abs(), 1e-10) << st.name;
      EXPECT_NEAR(a.gg.g_hat(at, j, ju, v), a.gg.g_hat(at, j, u, a.gg.j_hat(at, j, v)), 1e-10) << st.name;
      Eigen::VectorXd m = a.gg.j_hat_matrix(at, j) * u.stacked();
      EXPECT_LT((m - ju.stacked()).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(NablaHat, Examples) {
  Fixture a(f1());
  GeneralizedField c = GeneralizedField::constant(sec({1, 2}, {3, 4}));
  EXPECT_EQ(a.gg.nabla_hat(pt({0.2, 0.1}), sec({1, -1}, {0, 0}), c).max_abs(), 0.0);

  Fixture p(structure("polar", polar_plane(), 1, 1, golden_diag(1, 2)));
  GeneralizedField dt = GeneralizedField::constant(sec({0, 1}, {0, 0}));
  GeneralizedSection r = p.gg.nabla_hat(pt({2, 0.3}), sec({0, 1}, {0, 0}), dt);
  EXPECT_NEAR(r.X(0), -2.0, 1e-14);
  EXPECT_NEAR(r.X(1), 0.0, 1e-14);
  EXPECT_EQ(r.alpha.norm(), 0.0);
  // a pure covector direction is dropped
  GeneralizedField varying{VectorField{Expr::variable("r"), Expr(1.0)}, CovectorField{Expr::variable("t"), Expr(0.0)}};
  EXPECT_EQ(p.gg.nabla_hat(pt({2, 0.3}), sec({0, 0}, {1, 5}), varying).max_abs(), 0.0);
}

TEST(GenBundle, RequiresRiemannianProductType) {
  Fixture a(f4());
  EXPECT_THROW(a.gg.require_riemannian(pt({0.1, 0.2})), SignatureError);
  MetallicStructure deg = f1();
  deg.q = -0.25;
  auto geo = std::make_shared<GeometryCache>(deg.host);
  EXPECT_THROW(GeneralizedGeometry(deg, geo, std::make_shared<EndoForms>(geo, deg.J)), DiscriminantError);
}

TEST(DJHat, ClosedMatchesDirect) {
  std::mt19937_64 rng(21);
  for (auto st : {f1(), f2(), f3()}) {
    Fixture a(st);
    int n = a.s.host->dim();
    for (const Point& x : sample_points(*a.s.host, 10, 12)) {
      MetallicJet jet(a.s, *a.forms, x);
      GeneralizedSection u = random_section(rng, n), v = random_section(rng, n);
      GeneralizedSection diff = a.gg.d_jhat(jet, u, v) - a.gg.d_jhat_direct(x, u, v);
      EXPECT_LT(diff.max_abs(), 1e-8) << st.name;
    }
  }
}

TEST(DJHat, VanishesExactlyWhenParallel) {
  std::mt19937_64 rng(23);
  for (auto st : {f1(), f2()}) {
    Fixture a(st);
    int n = a.s.host->dim();
    for (const Point& x : sample_points(*a.s.host, 10, 13))
      EXPECT_LT(a.gg.d_jhat_direct(x, random_section(rng, n), random_section(rng, n)).max_abs(), 1e-9) << st.name;
  }
  Fixture c(f3());
  Point o = pt({0, 0});
  EXPECT_GT(c.gg.d_jhat_direct(o, sec({1, 0}, {0, 0}), sec({0, 1}, {0, 0})).max_abs(), 1e-3);
}

TEST(DeltaJHat, ClosedMatchesDirect) {
  for (auto st : {f1(), f2(), f3()}) {
    Fixture a(st);
    for (const Point& x : sample_points(*a.s.host, 10, 14)) {
      MetallicJet jet(a.s, *a.forms, x);
      GeneralizedSection closed = a.gg.delta_jhat(jet, orthonormal_frame(*a.s.host, x, 2));
      EXPECT_LT((closed - a.gg.delta_jhat_direct(x)).max_abs(), 1e-8) << st.name;
      if (st.name != "F3") EXPECT_LT(closed.max_abs(), 1e-9);
    }
  }
}

TEST(DeltaJHat, TildeTraceIsFrameIndependent) {
  Fixture a(f3());
  for (const Point& x : sample_points(*a.s.host, 5, 15)) {
    MetallicJet jet(a.s, *a.forms, x);
    GeneralizedSection d1 = a.gg.delta_jhat(jet, orthonormal_frame(*a.s.host, x, 1));
    GeneralizedSection d2 = a.gg.delta_jhat(jet, orthonormal_frame(*a.s.host, x, 99));
    EXPECT_LT((d1 - d2).max_abs(), 1e-12);
    Eigen::VectorXd v = jet.local()(a.gg.tilde_trace_field());
    EXPECT_LT((0.25 * jet.local().flat(v) - d1.alpha).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SecondOrder, ClosedMatchesDirect) {
  std::mt19937_64 rng(31);
  for (auto st : {f1(), f2(), f3()}) {
    Fixture a(st);
    int n = a.s.host->dim();
    std::vector<Point> pts = sample_points(*a.s.host, 6, 16);
    RoughLaplacian rough(a.geo, a.s.J, pts.front());
    for (const Point& x : pts) {
      MetallicJet jet(a.s, *a.forms, x);
      Frame f = orthonormal_frame(*a.s.host, x, 3);
      GeneralizedSection s = random_section(rng, n);
      GeneralizedSection dd = a.gg.ddelta_jhat(jet, s), dd_direct = a.gg.ddelta_jhat_direct(x, s);
      GeneralizedSection de = a.gg.deltad_jhat(jet, rough, s), de_direct = a.gg.deltad_jhat_direct(x, s);
      EXPECT_LT((dd - dd_direct).max_abs(), 1e-7) << st.name << " d delta";
      EXPECT_LT((de - de_direct).max_abs(), 1e-7) << st.name << " delta d";
      GeneralizedSection lap = a.gg.laplace_jhat(jet, f, s);
      EXPECT_LT((lap - (dd_direct + de_direct)).max_abs(), 1e-7) << st.name << " laplacian";
      if (st.name != "F3") EXPECT_LT(lap.max_abs(), 1e-7);
    }
  }
}

TEST(SecondOrder, F3AtOrigin) {
  Fixture a(f3());
  Point o = pt({0, 0});
  MetallicJet jet(a.s, *a.forms, o);
  Frame f = orthonormal_frame(*a.s.host, o);
  for (const GeneralizedSection& s : {sec({1, 0}, {1, 0}), sec({1, 0}, {0, 1})}) {
    GeneralizedSection sum = a.gg.ddelta_jhat_direct(o, s) + a.gg.deltad_jhat_direct(o, s);
    EXPECT_LT((a.gg.laplace_jhat(jet, f, s) - sum).max_abs(), 1e-7);
  }
}

TEST(JStar, WeitzenbockOnParallelFixtures) {
  std::mt19937_64 rng(41);
  for (auto st : {f1(), f2(), f3()}) {
    Fixture a(st);
    int n = a.s.host->dim();
    std::vector<Point> pts = sample_points(*a.s.host, 8, 17);
    RoughLaplacian rough(a.geo, a.s.J, pts.front());
    for (const Point& x : pts) {
      MetallicJet jet(a.s, *a.forms, x);
      Frame f = orthonormal_frame(*a.s.host, x);
      Eigen::VectorXd al = random_vec(rng, n);
      Eigen::VectorXd lhs = a.gg.laplace_jstar(jet, al);
      Eigen::VectorXd rhs = -a.gg.nabla2_jstar(rough, x, al) - a.gg.curvature_jstar(jet, f, al);
      EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-7) << st.name;
    }
  }
}

TEST(JStar, CurvatureTermSignOnCurvedNonParallelStructure) {
  Fixture a(twisted_sphere());
  std::vector<Point> pts = sample_points(*a.s.host, 5, 18);
  RoughLaplacian rough(a.geo, a.s.J, pts.front());
  for (const Point& x : pts) {
    MetallicJet jet(a.s, *a.forms, x);
    Frame f = orthonormal_frame(*a.s.host, x);
    Eigen::VectorXd al = Eigen::Vector2d(0.3, -1.1);
    Eigen::VectorXd lhs = a.gg.laplace_jstar(jet, al);
    Eigen::VectorXd curv = a.gg.curvature_jstar(jet, f, al);
    Eigen::VectorXd lap2 = a.gg.nabla2_jstar(rough, x, al);
    ASSERT_GT(curv.norm(), 1e-2);
    EXPECT_LT((lhs - (-lap2 + curv)).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_GT((lhs - (-lap2 - curv)).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(Harmonicity, Conditions) {
  std::mt19937_64 rng(51);
  for (auto st : {f1(), f2()}) {
    Fixture a(st);
    int n = a.s.host->dim();
    for (const Point& x : sample_points(*a.s.host, 5, 19)) {
      MetallicJet jet(a.s, *a.forms, x);
      HarmonicityConditions c =
          jhat_harmonicity_conditions(a.gg, jet, orthonormal_frame(*a.s.host, x), random_vec(rng, n));
      EXPECT_LT(c.laplacian, 1e-7);
      EXPECT_LT(c.curvature, 1e-7);
      EXPECT_LT(c.condition3, 1e-7);
    }
  }
  Fixture c(f3());
  Point o = pt({0.2, 0.3});
  MetallicJet jet(c.s, *c.forms, o);
  Frame f = orthonormal_frame(*c.s.host, o);
  HarmonicityConditions h = jhat_harmonicity_conditions(c.gg, jet, f, Eigen::Vector2d(1, 0));
  EXPECT_GT(h.laplacian, 1e-3);
  EXPECT_GT(c.gg.laplace_jhat(jet, f, sec({1, 0}, {0, 1})).max_abs(), 1e-3);
}

TEST(Gram, SignatureDiagnostics) {
  Fixture a(f1());
  LocalGeometry at(*a.geo, pt({0, 0}));
  Eigen::MatrixXd gm = a.gg.gram(at, j_at(a.s, pt({0, 0})));
  EXPECT_LT((gm - gm.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(signature_of(gm).positive + signature_of(gm).negative, 4);
}

// On a curved host with non-parallel J the displayed Delta J^ differs from
// d delta + delta d by exactly twice the curvature term in the covector part.
TEST(SecondOrder, CurvatureTermOnTwistedSphere) {
  Fixture a(twisted_sphere());
  std::vector<Point> pts = sample_points(*a.s.host, 4, 20);
  for (const Point& x : pts) {
    MetallicJet jet(a.s, *a.forms, x);
    Frame f = orthonormal_frame(*a.s.host, x);
    GeneralizedSection s = sec({0.4, -0.7}, {1.2, 0.5});
    GeneralizedSection sum = a.gg.ddelta_jhat_direct(x, s) + a.gg.deltad_jhat_direct(x, s);
    GeneralizedSection lap = a.gg.laplace_jhat(jet, f, s);
    Eigen::VectorXd curv = a.gg.curvature_jstar(jet, f, s.alpha);
    ASSERT_GT(curv.norm(), 1e-2);
    EXPECT_LT((lap.X - sum.X).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT((lap.alpha - sum.alpha + 0.5 * curv).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT((a.gg.laplace_jhat_consistent(jet, f, s) - sum).max_abs(), 1e-7);
  }
}
