// Acceptance run: one pass/fail line per criterion, using the formulas and
// tolerances exactly as stated. Exits nonzero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "metharm/bundled.hpp"
#include "metharm/genbundle.hpp"
#include "metharm/hodge.hpp"
#include "metharm/maps.hpp"
#include "metharm/suites.hpp"

#ifndef METHARM_VERIFY_PATH
#error "METHARM_VERIFY_PATH must name the verify executable"
#endif

using namespace metharm;

namespace {

struct Fx {
  MetallicStructure s;
  GeometryPtr geo;
  EndoFormsPtr forms;
  explicit Fx(const MetallicStructure& st)
      : s(st), geo(std::make_shared<GeometryCache>(s.host)), forms(std::make_shared<EndoForms>(geo, s.J)) {}
};

Fx fixture(const std::string& file) { return Fx(load_bundled(file).structures.front()); }

std::vector<Fx>& fixtures() {
  static std::vector<Fx> all{fixture("f1_flat_golden"), fixture("f2_sphere_product"), fixture("f3_twisted_golden"),
                             fixture("f4_norden_lorentz")};
  return all;
}
Fx& F(int i) { return fixtures()[static_cast<std::size_t>(i - 1)]; }

Eigen::VectorXd normal_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}
GeneralizedSection normal_section(std::mt19937_64& rng, int n) { return {normal_vec(rng, n), normal_vec(rng, n)}; }
double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }
std::string sci(double v) { return format_double(v); }

/// Accumulates named maxima against their bounds.
class Criterion {
 public:
  void check(const std::string& what, double value, double bound) {
    bool ok = std::isfinite(value) && value < bound;
    pass_ = pass_ && ok;
    parts_.push_back(what + " " + sci(value) + (ok ? " < " : " NOT < ") + sci(bound));
  }
  void require(const std::string& what, bool ok) {
    pass_ = pass_ && ok;
    parts_.push_back(what + (ok ? " yes" : " NO"));
  }
  bool report(int n, const std::string& title) const {
    std::cout << "criterion " << n << ": " << (pass_ ? "PASS" : "FAIL") << "  " << title << "\n";
    for (const std::string& p : parts_) std::cout << "    " << p << "\n";
    std::cout.flush();
    return pass_;
  }

 private:
  bool pass_ = true;
  std::vector<std::string> parts_;
};

bool criterion1() {
  Criterion c;
  for (int i = 1; i <= 4; ++i) {
    const MetallicStructure& s = F(i).s;
    std::vector<Point> pts = sample_points(*s.host, 200, 42);
    MetallicCheck mc = check_metallic(s, pts);
    c.check(s.name + " g-symmetry", mc.symmetry, 1e-10);
    c.check(s.name + " J^2 - pJ - qI", mc.polynomial, 1e-10);
    int n = s.host->dim();
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    auto square = [&](AssociatedKind k, double sign) {
      ExprMatrix a = associated_structure(s, k);
      double worst = 0.0;
      for (const Point& x : pts) {
        Evaluator ev(s.host->binding(x));
        Eigen::MatrixXd m = evaluate(ev, a);
        worst = std::max(worst, max_abs(m * m - sign * id));
      }
      return worst;
    };
    if (s.is_product_type()) c.check(s.name + " J_p^2 - I", square(AssociatedKind::product, 1.0), 1e-10);
    if (s.is_norden_type()) c.check(s.name + " J_c^2 + I", square(AssociatedKind::norden, -1.0), 1e-10);
    double sign = s.discriminant() / std::abs(s.discriminant());
    c.check(s.name + " J~^2 - sign I", square(AssociatedKind::tilde, sign), 1e-10);
  }
  return c.report(1, "algebraic invariants on F1-F4, 200 samples");
}

bool criterion2() {
  Criterion c;
  std::mt19937_64 rng(2);
  for (int i = 1; i <= 3; ++i) {
    Fx& f = F(i);
    double r1 = 0.0, r2 = 0.0, inv = 0.0;
    std::vector<Point> pts = sample_points(*f.s.host, 200, 42);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      MetallicJet jet(f.s, *f.forms, pts[k]);
      Frame e = orthonormal_frame(jet.local().g());
      Frame rot = orthonormal_frame(jet.local().g(), 1000 + k);
      for (int t = 0; t < 5; ++t) {
        Eigen::VectorXd x = normal_vec(rng, f.s.host->dim());
        TraceLemmaTerms a = trace_lemma_terms(jet, e, x), b = trace_lemma_terms(jet, rot, x);
        r1 = std::max({r1, lemma_trace_residual_1(a), lemma_trace_residual_1(b)});
        r2 = std::max({r2, lemma_trace_residual_2(a, f.s.p), lemma_trace_residual_2(b, f.s.p)});
        inv = std::max({inv, std::abs(a.lhs1 - b.lhs1), std::abs(a.lhs2 - b.lhs2), std::abs(a.trace_term - b.trace_term)});
      }
    }
    c.check(f.s.name + " trace identity against E_i", r1, 1e-8);
    c.check(f.s.name + " trace identity against JE_i", r2, 1e-8);
    c.check(f.s.name + " frame rotation change", inv, 1e-9);
  }
  return c.report(2, "frame trace identities on F1-F3, 200 samples x 5 X");
}

bool criterion3() {
  Criterion c;
  std::mt19937_64 rng(3);
  for (int i = 1; i <= 3; ++i) {
    Fx& f = F(i);
    double worst = 0.0;
    for (int pair = 0; pair < 4; ++pair) {
      VectorField a = detail::random_field(rng, *f.s.host), b = detail::random_field(rng, *f.s.host);
      for (const Point& x : sample_points(*f.s.host, 25, 42 + static_cast<std::uint64_t>(pair)))
        worst = std::max(worst, lemma_nijenhuis_residual(f.s, *f.forms, x, a, b));
    }
    c.check(f.s.name + " (dJ)(JX,Y)+(dJ)(X,JY)-p(dJ)(X,Y)-N_J(X,Y)", worst, 1e-8);
  }
  return c.report(3, "Nijenhuis identity on F1-F3 with random vector fields");
}

bool criterion4() {
  Criterion c;
  Fx& f2 = F(2);
  double dj = 0.0, delta = 0.0;
  for (const Point& x : sample_points(*f2.s.host, 200, 42)) {
    MetallicJet jet(f2.s, *f2.forms, x);
    Frame e = orthonormal_frame(jet.local().g());
    dj = std::max(dj, jet.d_norm(e));
    delta = std::max(delta, jet.vector_norm(e, jet.codiff()));
  }
  c.check("F2 max |dJ|", dj, 1e-9);
  c.check("F2 max |delta J|", delta, 1e-8);
  std::mt19937_64 rng(4);
  for (int i = 1; i <= 3; ++i) {
    Fx& f = F(i);
    double step = 0.0;
    for (const Point& x : sample_points(*f.s.host, 200, 42)) {
      MetallicJet jet(f.s, *f.forms, x);
      Frame e = orthonormal_frame(jet.local().g());
      for (int t = 0; t < 5; ++t)
        step = std::max(step, proof_step_residual(trace_lemma_terms(jet, e, normal_vec(rng, f.s.host->dim())), f.s.p));
    }
    c.check(f.s.name + " g(JX - p/2 X, delta J) step", step, 1e-8);
  }
  return c.report(4, "dJ = 0 implies delta J = 0");
}

bool criterion5() {
  Criterion c;
  for (int i = 1; i <= 3; ++i) {
    Fx& f = F(i);
    std::vector<Point> pts = sample_points(*f.s.host, 50, 42);
    RoughLaplacian rough(f.geo, f.s.J, pts.front());
    double worst = 0.0, s_size = 0.0;
    for (const Point& x : pts) {
      MetallicJet jet(f.s, *f.forms, x);
      Frame e = orthonormal_frame(jet.local().g());
      Eigen::MatrixXd sm = weitzenbock_S_matrix(jet.local(), jet.J(), e);
      worst = std::max(worst, max_abs(jet.laplacian() - (-rough.at(x) - sm)));
      s_size = std::max(s_size, max_abs(sm));
    }
    c.check(f.s.name + " |Delta J - (-nabla^2 J - S)| (max |S| = " + sci(s_size) + ")", worst, 1e-7);
  }
  return c.report(5, "Weitzenboeck formula Delta T = -nabla^2 T - S on F1-F3, 50 samples");
}

bool criterion6() {
  Criterion c;
  Fx& f2 = F(2);
  std::vector<Point> pts = sample_points(*f2.s.host, 50, 42);
  RoughLaplacian rough(f2.geo, f2.s.J, pts.front());
  double stated = 0.0, pairing = 0.0, lap = 0.0;
  for (const Point& x : pts) {
    MetallicJet jet(f2.s, *f2.forms, x);
    BochnerReport b = bochner_report(jet, rough, orthonormal_frame(jet.local().g()));
    stated = std::max(stated, b.residual_stated());
    pairing = std::max(pairing, std::abs(b.pairing));
    lap = std::max(lap, b.laplacian_norm);
  }
  c.check("F2 harmonic: max |Delta J|", lap, 1e-7);
  c.check("F2 |nabla J|^2 - [sum R(E_i,E_j,JE_i,JE_j) + p tr(J Q) - q scal]", stated, 1e-7);
  c.check("F2 <Delta J, J>", pairing, 1e-7);
  return c.report(6, "Bochner formula and <Delta J, J> on F2");
}

bool criterion7() {
  Criterion c;
  std::mt19937_64 rng(7);
  for (int i = 1; i <= 3; ++i) {
    Fx& f = F(i);
    GeneralizedGeometry gg(f.s, f.geo, f.forms);
    int n = f.s.host->dim();
    std::vector<Point> pts = sample_points(*f.s.host, 20, 42);
    RoughLaplacian rough(f.geo, f.s.J, pts.front());
    double dj = 0.0, delta = 0.0, dd = 0.0, de = 0.0, js = 0.0, lap = 0.0, xi = 0.0;
    for (const Point& x : pts) {
      MetallicJet jet(f.s, *f.forms, x);
      Frame e = orthonormal_frame(jet.local().g());
      GeneralizedSection u = normal_section(rng, n), v = normal_section(rng, n);
      dj = std::max(dj, (gg.d_jhat(jet, u, v) - gg.d_jhat_direct(x, u, v)).max_abs());
      delta = std::max(delta, (gg.delta_jhat(jet, e) - gg.delta_jhat_direct(x)).max_abs());
      GeneralizedSection ddd = gg.ddelta_jhat_direct(x, u), ded = gg.deltad_jhat_direct(x, u);
      dd = std::max(dd, (4.0 * gg.ddelta_jhat(jet, u) - 4.0 * ddd).max_abs());
      de = std::max(de, (4.0 * gg.deltad_jhat(jet, rough, u) - 4.0 * ded).max_abs());
      Eigen::VectorXd lj = gg.laplace_jstar(jet, u.alpha);
      Eigen::VectorXd stated = -gg.nabla2_jstar(rough, x, u.alpha) - gg.curvature_jstar(jet, e, u.alpha);
      js = std::max(js, max_abs(lj - stated));
      lap = std::max(lap, (4.0 * gg.laplace_jhat(jet, e, u) - 4.0 * (ddd + ded)).max_abs());
      xi = std::max(xi, gg.xi_orthonormality_residual(jet.local(), jet.J(), gg.frame(jet.local(), jet.J(), e)));
    }
    c.check(f.s.name + " dJ^ closed vs direct", dj, 1e-7);
    c.check(f.s.name + " delta J^ closed vs direct", delta, 1e-7);
    c.check(f.s.name + " 4 d delta J^ closed vs direct", dd, 1e-7);
    c.check(f.s.name + " 4 delta d J^ closed vs direct", de, 1e-7);
    c.check(f.s.name + " Delta J* = -nabla^2 J* - S-term", js, 1e-7);
    c.check(f.s.name + " 4 Delta J^ closed vs direct", lap, 1e-7);
    c.check(f.s.name + " |g^(xi_i,xi_j) - delta_ij|", xi, 1e-10);
  }
  auto closed_vs_parallel = [&](Fx& f, double& djmax, double& nabla) {
    GeneralizedGeometry gg(f.s, f.geo, f.forms);
    int n = f.s.host->dim();
    djmax = nabla = 0.0;
    for (const Point& x : sample_points(*f.s.host, 50, 42)) {
      MetallicJet jet(f.s, *f.forms, x);
      djmax = std::max(djmax, gg.d_jhat_direct(x, normal_section(rng, n), normal_section(rng, n)).max_abs());
      nabla = std::max(nabla, jet.nabla_norm(orthonormal_frame(jet.local().g())));
    }
  };
  double dj2, nab2, dj3, nab3;
  closed_vs_parallel(F(2), dj2, nab2);
  closed_vs_parallel(F(3), dj3, nab3);
  c.check("F2 locally metallic: max |nabla J|", nab2, 1e-9);
  c.check("F2 max |dJ^|", dj2, 1e-8);
  c.require("F3 witnesses |nabla J| > 1e-3 (" + sci(nab3) + ")", nab3 > 1e-3);
  c.require("F3 has dJ^ != 0 (" + sci(dj3) + ")", dj3 > 1e-3);
  return c.report(7, "generalized closed formulas, xi frame and dJ^ = 0 iff locally metallic");
}

bool criterion8() {
  Criterion c;
  Manifest m = load_bundled("maps_flat");
  for (const MapSpec& spec : m.maps) {
    const MetallicStructure& s = *m.structure(spec.source);
    const MetallicStructure& t = *m.structure(spec.target);
    MapGeometry mg(SmoothMap{spec.name, s.host, t.host, spec.components}, std::make_shared<GeometryCache>(s.host),
                   std::make_shared<GeometryCache>(t.host));
    std::vector<Point> pts = mg.admissible(sample_points(*s.host, 50, 42));
    double tau = 0.0;
    for (const Point& x : pts) tau = std::max(tau, max_abs(mg.tension(x)));
    c.check(spec.name + " |tau|", tau, 1e-12);
    if (spec.name == "shear") continue;
    MetallicMap mm(mg, s, t);
    double iso = 0.0, hat = 0.0, jhat = 0.0;
    for (const Point& x : pts) {
      iso = std::max(iso, mm.isometry_identity_residual(x));
      hat = std::max(hat, mm.tension_hat_decomposition(x).residual());
      jhat = std::max(jhat, mm.jhat_tension_identity_residual(x));
    }
    c.check(spec.name + " isometry identity", iso, 1e-8);
    c.check(spec.name + " tau(Phi^) decomposition", hat, 1e-7);
    c.check(spec.name + " Jbar^ tau(Phi^) identity", jhat, 1e-7);
  }
  return c.report(8, "maps: isometry identity, lifted tension and vanishing tension of affine maps");
}

/// Expressions whose first and second derivatives the engine uses.
std::vector<std::pair<const ChartedManifold*, Expr>> derivative_pool() {
  std::vector<std::pair<const ChartedManifold*, Expr>> pool;
  auto add = [&](const ChartedManifold* m, const Expr& e) {
    if (!e.is_constant()) pool.emplace_back(m, e);
  };
  for (Fx& f : fixtures()) {
    const ChartedManifold* m = f.s.host.get();
    int n = m->dim();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        add(m, m->metric()(i, j));
        add(m, m->inverse_metric()(i, j));
        add(m, f.s.J(i, j));
      }
    for (const Expr& e : f.geo->christoffel().data()) add(m, e);
    for (const Expr& e : f.forms->nabla().data()) add(m, e);
    for (const VectorField& v : orthonormal_frame_field(*m, sample_points(*m, 1, 42).front()).vectors)
      for (const Expr& e : v) add(m, e);
  }
  Manifest maps = load_bundled("maps_flat");
  for (const MetallicStructure& s : maps.structures)
    for (int i = 0; i < s.J.size(); ++i)
      for (int j = 0; j < s.J.size(); ++j) add(s.host.get(), s.J(i, j));
  static std::vector<ManifoldPtr> keep;
  keep.insert(keep.end(), maps.manifolds.begin(), maps.manifolds.end());
  for (const MapSpec& spec : maps.maps)
    for (const Expr& e : spec.components) add(maps.structure(spec.source)->host.get(), e);
  return pool;
}

double fd(const ChartedManifold& m, const Expr& e, const Point& x, int k, double h) {
  Point a = x, b = x;
  a.coords(k) += h;
  b.coords(k) -= h;
  Evaluator ea(m.binding(a)), eb(m.binding(b));
  return (ea(e) - eb(e)) / (2.0 * h);
}

bool criterion9() {
  Criterion c;
  auto pool = derivative_pool();
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  double first = 0.0, second = 0.0;
  const int probes = 1000;
  for (int p = 0; p < probes; ++p) {
    const auto& [m, e] = pool[pick(rng)];
    Point x = sample_points(*m, 1, rng()).front();
    std::uniform_int_distribution<int> coord(0, m->dim() - 1);
    int k = coord(rng), l = coord(rng);
    Evaluator ev(m->binding(x));
    Expr dk = diff(e, m->var(k));
    double sym1 = ev(dk), num1 = fd(*m, e, x, k, 1e-5);
    first = std::max(first, std::abs(sym1 - num1) / std::max(1.0, std::abs(num1)));
    double sym2 = ev(diff(dk, m->var(l))), num2 = fd(*m, dk, x, l, 1e-5);
    second = std::max(second, std::abs(sym2 - num2) / std::max(1.0, std::abs(num2)));
  }
  c.check("first derivatives, 1000 probes, relative error", first, 1e-6);
  c.check("second derivatives, 1000 probes, relative error", second, 1e-6);

  double codiff = 0.0;
  for (Fx& f : fixtures())
    for (const Point& x : sample_points(*f.s.host, 50, 42)) {
      MetallicJet jet(f.s, *f.forms, x);
      for (std::uint64_t seed : {0ull, 5ull}) {
        Frame e = seed ? orthonormal_frame(jet.local().g(), seed) : orthonormal_frame(jet.local().g());
        codiff = std::max(codiff, max_abs(jet.codiff() - jet.codiff_frame(e)));
      }
    }
  c.check("delta J: coordinate trace vs frame sum on F1-F4", codiff, 1e-8);

  double tension = 0.0;
  Manifest maps = load_bundled("maps_flat");
  for (const MapSpec& spec : maps.maps) {
    const MetallicStructure& s = *maps.structure(spec.source);
    const MetallicStructure& t = *maps.structure(spec.target);
    MapGeometry mg(SmoothMap{spec.name, s.host, t.host, spec.components}, std::make_shared<GeometryCache>(s.host),
                   std::make_shared<GeometryCache>(t.host));
    for (const Point& x : mg.admissible(sample_points(*s.host, 50, 42)))
      tension = std::max(tension, max_abs(mg.tension(x) - mg.tension_frame(x, 3)));
  }
  c.check("tau: coordinate trace vs frame sum on all maps", tension, 1e-8);
  return c.report(9, "derivatives against finite differences and dual-path delta, tau");
}

int run_verify(const std::string& args) {
  std::string cmd = std::string("\"") + METHARM_VERIFY_PATH + "\" " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool criterion10() {
  Criterion c;
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / ("metharm_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  int all = run_verify("--all-fixtures --report \"" + (dir / "all.txt").string() + "\"");
  c.require("all-fixtures default run exits 0 (got " + std::to_string(all) + ")", all == 0);

  std::string text = *bundled_text("f1_flat_golden.yaml");
  std::string from = R"(J: [["phi", "0"], ["0", "1 - phi"]])";
  text.replace(text.find(from), from.size(), R"(J: [["1", "0"], ["0", "2"]])");
  std::ofstream(dir / "f1_corrupt.yaml") << text;
  fs::path report = dir / "corrupt.json";
  int bad = run_verify("\"" + (dir / "f1_corrupt.yaml").string() + "\" --suite algebraic --format json --report \"" +
                       report.string() + "\"");
  c.require("corrupted J = diag(1,2) exits 1 (got " + std::to_string(bad) + ")", bad == 1);
  std::string body = read_file(report).value_or("");
  bool named = false;
  try {
    nlohmann::json doc = nlohmann::json::parse(body);
    for (const auto& r : doc["records"])
      named = named || (r["id"] == "metallic.polynomial" && r["status"] == "fail");
  } catch (const nlohmann::json::exception&) {
    named = false;
  }
  c.require("report names metallic.polynomial as failed", named);
  fs::remove_all(dir);
  return c.report(10, "CLI exit codes and failure reporting");
}

}  // namespace

int main() {
  bool (*criteria[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                          criterion6, criterion7, criterion8, criterion9, criterion10};
  int passed = 0;
  for (int i = 0; i < 10; ++i) {
    try {
      passed += criteria[i]() ? 1 : 0;
    } catch (const std::exception& e) {
      std::cout << "criterion " << i + 1 << ": FAIL  error: " << e.what() << "\n";
    }
  }
  std::cout << "acceptance: done, " << passed << "/10 criteria passed\n";
  return passed == 10 ? 0 : 1;
}
