#pragma once

// Suite orchestration: runs every registered identity on the structures and
// maps of a manifest and collects the results into a Report.

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "metharm/genbundle.hpp"
#include "metharm/hodge.hpp"
#include "metharm/manifest.hpp"
#include "metharm/maps.hpp"
#include "metharm/metallic.hpp"
#include "metharm/report.hpp"

namespace metharm {

struct Identity {
  std::string id;
  std::string suite;
  std::string statement;
};

inline const std::vector<Identity>& identities() {
  static const std::vector<Identity> list{
      {"metallic.symmetry", "algebraic", "g(JX,Y) = g(X,JY)"},
      {"metallic.polynomial", "algebraic", "J^2 = pJ + qI"},
      {"associated.product_square", "algebraic", "J_p^2 = I for J_p = (2J - pI)/sqrt(p^2+4q)"},
      {"associated.norden_square", "algebraic", "J_c^2 = -I for J_c = (2J - pI)/sqrt(-p^2-4q)"},
      {"associated.tilde_square", "algebraic", "J~^2 = sign(p^2+4q) I"},

      {"lemma.trace_dj", "frame_lemmas", "sum g((dJ)(X,E_i),E_i) = sum g((nabla_X J)E_i,E_i) + g(X, delta J)"},
      {"lemma.trace_dj_j", "frame_lemmas",
       "sum g((dJ)(X,E_i),JE_i) = p/2 sum g((nabla_X J)E_i,E_i) + p g(X, delta J) - g(JX, delta J)"},
      {"lemma.frame_invariance", "frame_lemmas", "trace sums are independent of the orthonormal frame"},
      {"proof.pairing_step", "frame_lemmas",
       "g(JX - p/2 X, delta J) = p/2 sum g((dJ)(X,E_i),E_i) - sum g((dJ)(X,E_i),JE_i)"},
      {"lemma.nijenhuis", "frame_lemmas", "(dJ)(JX,Y) + (dJ)(X,JY) - p (dJ)(X,Y) = N_J(X,Y)"},
      {"prop.dj_implies_deltaj", "frame_lemmas", "dJ = 0 implies delta J = 0"},
      {"equiv.nearly_kaehler", "frame_lemmas",
       "nabla J = 0 iff dJ = 0 and (nabla_X J)Y = -(nabla_Y J)X"},
      {"codiff.dual_path", "frame_lemmas", "delta J by coordinate trace = -sum eps_i (nabla_{E_i} J)E_i"},

      {"weitzenbock.formula", "weitzenbock", "Delta J = -nabla^2 J + sum (R(E_i,X)J)E_i"},
      {"harmonic.transfer", "weitzenbock", "Delta J_p = (2/sqrt|p^2+4q|) Delta J"},
      {"bochner.formula", "weitzenbock",
       "Delta J = 0 implies |nabla J|^2 = sum R(E_i,E_j,JE_i,JE_j) + p trace(J Q) + q scal"},
      {"remark.laplacian_pairing", "weitzenbock", "nabla J = 0 implies <Delta J, J> = 0"},

      {"ghat.tilde_form", "generalized", "g^ in terms of J~ agrees with its definition"},
      {"jhat.symmetric", "generalized", "g^(J^ s, t) = g^(s, J^ t)"},
      {"jhat.polynomial", "generalized", "J^^2 = pJ^ + qI"},
      {"ghat.xi_orthogonal", "generalized", "g^(xi_i, xi_j) = (1 + 1/sqrt(p^2+4q))/2 delta_ij"},
      {"djhat.closed_form", "generalized", "(dJ^)(s,t) closed form = nabla^-exterior derivative"},
      {"deltajhat.closed_form", "generalized", "delta J^ closed form = -sum (nabla^_{xi_i} J^) xi_i"},
      {"ddeltajhat.closed_form", "generalized", "d delta J^ closed form = direct second derivative"},
      {"deltadjhat.closed_form", "generalized", "delta d J^ closed form = direct second derivative"},
      {"laplacejstar.weitzenbock", "generalized",
       "Delta J* = -nabla^2 J* + (sum (R(E_i, .)J)E_i)^flat"},
      {"laplacejhat.closed_form", "generalized", "Delta J^ closed form = (d delta + delta d) J^"},
      {"djhat.iff_locally_metallic", "generalized", "dJ^ = 0 iff nabla J = 0"},
      {"jhat.harmonicity_corollary", "generalized",
       "Delta J^ = 0 iff Delta J = 0, sum (R(E_i,X)J)E_i = 0 and the J~-twisted curvature condition"},

      {"map.tension_dual_path", "maps", "tau by coordinate trace = sum eps_i (nabla^Phi_{E_i} Phi_* E_i - Phi_* nabla_{E_i} E_i)"},
      {"map.isometry_identity", "maps",
       "Jbar tau + Phi_*(delta J) - delta Jbar = sum [nablabar_{Phi_* E_i} Phi_*(JE_i) - Phi_*(nabla_{E_i} JE_i)]"},
      {"map.corollary_transfer", "maps",
       "Phi_*((nabla_{E_i}J)E_i) = (nablabar_{Phi_*E_i}Jbar)(Phi_*E_i) implies delta Jbar = Phi_*(delta J)"},
      {"map.triviality", "maps", "metallic isometry with p != pbar forces J = ((qbar-q)/(p-pbar)) I"},
      {"map.lift_commutes", "maps", "Jbar^ Phi^ = Phi^ J^"},
      {"map.tension_hat_decomposition", "maps",
       "tau(Phi^) = tau/4 + (p/(4 sqrt d)) tau^flat - (1/(2 sqrt d)) (J-twisted sum)^flat"},
      {"map.hat_harmonicity", "maps", "tau(Phi^) = 0 iff tau = 0 and the J-twisted sum vanishes"},
      {"map.jhat_tension_identity", "maps", "Jbar^ tau(Phi^) equals its expansion in delta J, delta Jbar and tau"},
  };
  return list;
}

inline const Identity& identity(const std::string& id) {
  for (const Identity& i : identities())
    if (i.id == id) return i;
  throw Error("unregistered identity '" + id + "'");
}

struct CoverageEntry {
  std::string topic;
  std::vector<std::string> ids;
};

/// Every mathematical statement the engine verifies, with the records that check it.
inline const std::vector<CoverageEntry>& coverage() {
  static const std::vector<CoverageEntry> table{
      {"metallic pseudo-Riemannian structure: J g-symmetric with J^2 = pJ + qI", {"metallic.symmetry", "metallic.polynomial"}},
      {"associated almost product and Norden structures", {"associated.product_square", "associated.norden_square"}},
      {"the involution-type structure J~ and its square", {"associated.tilde_square"}},
      {"codifferential of J in trace and frame form", {"codiff.dual_path"}},
      {"harmonic metallic structures transfer to associated structures", {"harmonic.transfer"}},
      {"trace identity for dJ against an orthonormal frame", {"lemma.trace_dj", "lemma.frame_invariance"}},
      {"trace identity for dJ against the J-image of the frame", {"lemma.trace_dj_j", "lemma.frame_invariance"}},
      {"closed metallic structures are coclosed", {"prop.dj_implies_deltaj", "proof.pairing_step"}},
      {"dJ and the Nijenhuis tensor", {"lemma.nijenhuis"}},
      {"nearly Kaehler condition and local metallicity", {"equiv.nearly_kaehler"}},
      {"Weitzenboeck formula for endomorphism-valued forms", {"weitzenbock.formula"}},
      {"Bochner formula for harmonic metallic structures", {"bochner.formula"}},
      {"pairing of the Laplacian with J for parallel J", {"remark.laplacian_pairing"}},
      {"generalized metric on TM + T*M", {"ghat.tilde_form", "ghat.xi_orthogonal"}},
      {"generalized metallic structure J^", {"jhat.symmetric", "jhat.polynomial"}},
      {"exterior derivative of J^", {"djhat.closed_form"}},
      {"codifferential of J^", {"deltajhat.closed_form"}},
      {"second-order terms d delta J^ and delta d J^", {"ddeltajhat.closed_form", "deltadjhat.closed_form"}},
      {"Weitzenboeck formula for the dual endomorphism J*", {"laplacejstar.weitzenbock"}},
      {"Hodge Laplacian of J^", {"laplacejhat.closed_form"}},
      {"closedness of J^ and local metallicity", {"djhat.iff_locally_metallic"}},
      {"harmonicity of J^", {"jhat.harmonicity_corollary"}},
      {"tension field of a smooth map", {"map.tension_dual_path"}},
      {"tension identity for metallic isometries", {"map.isometry_identity"}},
      {"transfer of delta J along metallic isometries", {"map.corollary_transfer"}},
      {"metallic isometries between different metallic means", {"map.triviality"}},
      {"generalized lift of a metallic map", {"map.lift_commutes"}},
      {"tension of the generalized lift", {"map.tension_hat_decomposition", "map.hat_harmonicity"}},
      {"J^-twisted tension of the generalized lift", {"map.jhat_tension_identity"}},
  };
  return table;
}

struct SuiteOptions {
  std::vector<std::string> suites;
  int samples = 200;
  std::uint64_t seed = 42;
  double tol = 1e-8;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Recorder {
 public:
  Recorder(Report& r, std::string suite, std::string fixture)
      : r_(&r), suite_(std::move(suite)), fixture_(std::move(fixture)) {}

  void measure(const std::string& id, int samples, double residual, double tol) {
    r_->records.push_back(metharm::measured(id, identity(id).statement, suite_, fixture_, samples, residual, tol));
  }
  /// Equivalences: residual 0 when both sides agree, 1 otherwise.
  void logical(const std::string& id, int samples, bool holds) { measure(id, samples, holds ? 0.0 : 1.0, 0.0); }
  void skip(const std::string& id, const std::string& reason) {
    r_->records.push_back(metharm::skipped(id, identity(id).statement, suite_, fixture_, reason));
  }
  void skip_all(const std::vector<std::string>& ids, const std::string& reason) {
    for (const std::string& id : ids) skip(id, reason);
  }
  void diag(const std::string& id, double value, const std::string& note) {
    r_->diagnostics.push_back({id, fixture_, value, note});
  }
  /// Runs one identity; precondition failures become skips and other errors fail the record.
  void guard(const std::string& id, const std::function<void()>& body) {
    try {
      body();
    } catch (const PreconditionError& e) {
      skip(id, std::string("hypothesis not met: ") + e.what());
    } catch (const SignatureError& e) {
      skip(id, e.what());
    } catch (const Error& e) {
      Record rec = metharm::measured(id, identity(id).statement, suite_, fixture_, 0,
                                     std::numeric_limits<double>::quiet_NaN(), 0.0);
      rec.reason = e.what();
      r_->records.push_back(rec);
    }
  }

 private:
  Report* r_;
  std::string suite_;
  std::string fixture_;
};

inline Eigen::VectorXd normal_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

inline GeneralizedSection normal_section(std::mt19937_64& rng, int n) { return {normal_vec(rng, n), normal_vec(rng, n)}; }

/// Random smooth vector field: affine part plus a quadratic and a trigonometric term.
inline VectorField random_field(std::mt19937_64& rng, const ChartedManifold& m) {
  int n = m.dim();
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  std::uniform_int_distribution<int> k(0, n - 1);
  VectorField v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Expr a = m.var(k(rng)), b = m.var(k(rng)), d = m.var(k(rng));
    v[static_cast<std::size_t>(i)] = Expr(c(rng)) + Expr(c(rng)) * a + Expr(c(rng)) * b * d + Expr(c(rng)) * sin(d);
  }
  return v;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline bool riemannian_at(const ChartedManifold& m, const std::vector<Point>& pts) {
  for (const Point& x : pts)
    if (!signature(m, x).riemannian()) return false;
  return true;
}

struct Tolerances {
  double base, algebraic, second, tilde;
  explicit Tolerances(double t) : base(t), algebraic(1e-2 * t), second(10.0 * t), tilde(1e-4 * t) {}
};

struct StructureContext {
  MetallicStructure s;
  GeometryPtr geo;
  EndoFormsPtr forms;
  std::uint64_t seed;
  explicit StructureContext(const MetallicStructure& st, std::uint64_t base_seed)
      : s(st),
        geo(std::make_shared<GeometryCache>(s.host)),
        forms(std::make_shared<EndoForms>(geo, s.J)),
        seed(base_seed) {}
  std::vector<Point> points(int count) const { return sample_points(*s.host, count, seed); }
  std::mt19937_64 rng(const std::string& suite) const { return std::mt19937_64(seed ^ fnv1a(s.name + "/" + suite)); }
};

inline void algebraic_suite(Report& r, const StructureContext& c, int samples, const Tolerances& tol) {
  Recorder rec(r, "algebraic", c.s.name);
  const MetallicStructure& s = c.s;
  std::vector<Point> pts = c.points(samples);
  int n = s.host->dim();
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  MetallicCheck mc = check_metallic(s, pts);
  rec.measure("metallic.symmetry", mc.samples, mc.symmetry, tol.algebraic);
  rec.measure("metallic.polynomial", mc.samples, mc.polynomial, tol.algebraic);

  auto square_residual = [&](AssociatedKind kind, double sign) {
    ExprMatrix a = associated_structure(s, kind);
    double worst = 0.0;
    for (const Point& x : pts) {
      Evaluator ev(s.host->binding(x));
      Eigen::MatrixXd m = evaluate(ev, a);
      worst = std::max(worst, max_abs(m * m - sign * id));
    }
    return worst;
  };
  if (s.is_product_type())
    rec.measure("associated.product_square", samples, square_residual(AssociatedKind::product, 1.0), tol.algebraic);
  else
    rec.skip("associated.product_square", "requires p²+4q>0");
  if (s.is_norden_type())
    rec.measure("associated.norden_square", samples, square_residual(AssociatedKind::norden, -1.0), tol.algebraic);
  else
    rec.skip("associated.norden_square", "requires p²+4q<0");
  if (s.is_nondegenerate())
    rec.measure("associated.tilde_square", samples,
                square_residual(AssociatedKind::tilde, s.discriminant() > 0 ? 1.0 : -1.0), tol.algebraic);
  else
    rec.skip("associated.tilde_square", "requires p²+4q≠0");
}

inline void frame_lemmas_suite(Report& r, const StructureContext& c, int samples, const Tolerances& tol) {
  Recorder rec(r, "frame_lemmas", c.s.name);
  const MetallicStructure& s = c.s;
  std::vector<Point> pts = c.points(samples);
  std::mt19937_64 rng = c.rng("frame_lemmas");
  int n = s.host->dim();
  bool riem = riemannian_at(*s.host, pts);

  double l1 = 0.0, l2 = 0.0, inv = 0.0, step = 0.0, dual = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    MetallicJet jet(s, *c.forms, pts[k]);
    Frame f = orthonormal_frame(jet.local().g());
    Frame fr = orthonormal_frame(jet.local().g(), c.seed + k + 1);
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd x = normal_vec(rng, n);
      TraceLemmaTerms a = trace_lemma_terms(jet, f, x), b = trace_lemma_terms(jet, fr, x);
      l1 = std::max(l1, lemma_trace_residual_1(a));
      l2 = std::max(l2, lemma_trace_residual_2(a, s.p));
      inv = std::max({inv, std::abs(a.lhs1 - b.lhs1), std::abs(a.lhs2 - b.lhs2)});
      step = std::max(step, proof_step_residual(a, s.p));
    }
    dual = std::max(dual, max_abs(jet.codiff() - jet.codiff_frame(fr)));
  }
  int probes = static_cast<int>(pts.size()) * 5;
  if (riem) {
    rec.measure("lemma.trace_dj", probes, l1, tol.base);
    rec.measure("lemma.trace_dj_j", probes, l2, tol.base);
    rec.measure("lemma.frame_invariance", probes, inv, 0.1 * tol.base);
    rec.measure("proof.pairing_step", probes, step, tol.base);
  } else {
    rec.skip_all({"lemma.trace_dj", "lemma.trace_dj_j", "lemma.frame_invariance", "proof.pairing_step"},
                 "requires Riemannian metric");
    rec.diag("lemma.trace_dj", l1, "eps-weighted frame sum, not asserted in indefinite signature");
    rec.diag("lemma.trace_dj_j", l2, "eps-weighted frame sum, not asserted in indefinite signature");
  }
  rec.measure("codiff.dual_path", static_cast<int>(pts.size()), dual, tol.base);

  rec.guard("lemma.nijenhuis", [&] {
    int m = std::min(samples, 50);
    std::vector<std::pair<VectorField, VectorField>> fields;
    for (int i = 0; i < 3; ++i) fields.emplace_back(random_field(rng, *s.host), random_field(rng, *s.host));
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
      for (const auto& [a, b] : fields)
        worst = std::max(worst, lemma_nijenhuis_residual(s, *c.forms, pts[static_cast<std::size_t>(i)], a, b));
    rec.measure("lemma.nijenhuis", m * 3, worst, tol.base);
  });

  rec.guard("prop.dj_implies_deltaj", [&] {
    DeltaProbe p = dj_implies_deltaj_probe(s, *c.forms, pts, 0.1 * tol.base, {});
    rec.diag("prop.dj_implies_deltaj", p.max_d, "max |dJ|");
    if (!p.hypothesis_met)
      rec.skip("prop.dj_implies_deltaj", "hypothesis not met: max |dJ| = " + format_double(p.max_d));
    else
      rec.measure("prop.dj_implies_deltaj", static_cast<int>(pts.size()), p.max_delta, tol.base);
  });

  rec.guard("equiv.nearly_kaehler", [&] {
    NearlyKaehlerProbe p = nearly_kaehler_probe(s, *c.forms, pts);
    rec.diag("equiv.nearly_kaehler", p.max_nabla, "max |nabla J|");
    rec.logical("equiv.nearly_kaehler", static_cast<int>(pts.size()), p.equivalent(tol.base));
  });
}

inline void weitzenbock_suite(Report& r, const StructureContext& c, int samples, const Tolerances& tol) {
  Recorder rec(r, "weitzenbock", c.s.name);
  const MetallicStructure& s = c.s;
  int m = std::min(samples, 50);
  std::vector<Point> pts = c.points(m);
  bool riem = riemannian_at(*s.host, pts);

  RoughLaplacian rough(c.geo, s.J, pts.front());
  rec.guard("weitzenbock.formula", [&] {
    double consistent = 0.0, stated = 0.0;
    for (const Point& x : pts) {
      MetallicJet jet(s, *c.forms, x);
      Frame f = orthonormal_frame(jet.local().g());
      Eigen::MatrixXd lap = jet.laplacian(), n2 = rough.at(x);
      Eigen::MatrixXd sm = weitzenbock_S_matrix(jet.local(), jet.J(), f);
      consistent = std::max(consistent, max_abs(lap - (-n2 + sm)));
      stated = std::max(stated, max_abs(lap - (-n2 - sm)));
    }
    rec.measure("weitzenbock.formula", m, consistent, tol.second);
    rec.diag("weitzenbock.formula", stated, "residual of Delta J = -nabla^2 J - S");
  });

  if (s.is_nondegenerate()) {
    rec.guard("harmonic.transfer", [&] {
      AssociatedKind kind = s.is_product_type() ? AssociatedKind::product : AssociatedKind::norden;
      EndoForms assoc(c.geo, associated_structure(s, kind));
      double scale = 2.0 / std::sqrt(std::abs(s.discriminant()));
      double worst = 0.0;
      for (const Point& x : pts) {
        LocalGeometry at(*c.geo, x);
        worst = std::max(worst, max_abs(at(assoc.laplacian()) - scale * at(c.forms->laplacian())));
      }
      rec.measure("harmonic.transfer", m, worst, tol.second);
    });
  } else {
    rec.skip("harmonic.transfer", "requires p²+4q≠0");
  }

  if (!riem) {
    rec.skip_all({"bochner.formula", "remark.laplacian_pairing"}, "requires Riemannian metric");
    return;
  }
  double lap = 0.0, nab = 0.0, consistent = 0.0, stated = 0.0, pairing = 0.0;
  for (const Point& x : pts) {
    MetallicJet jet(s, *c.forms, x);
    Frame f = orthonormal_frame(jet.local().g());
    BochnerReport b = bochner_report(jet, rough, f);
    lap = std::max(lap, b.laplacian_norm);
    nab = std::max(nab, jet.nabla_norm(f));
    consistent = std::max(consistent, b.residual_consistent());
    stated = std::max(stated, b.residual_stated());
    pairing = std::max(pairing, std::abs(b.pairing));
  }
  if (lap < tol.second) {
    rec.measure("bochner.formula", m, consistent, tol.second);
    rec.diag("bochner.formula", stated, "residual with -q scal in place of +q scal");
  } else {
    rec.skip("bochner.formula", "hypothesis not met: max |Delta J| = " + format_double(lap));
  }
  if (nab < tol.base)
    rec.measure("remark.laplacian_pairing", m, pairing, tol.second);
  else
    rec.skip("remark.laplacian_pairing", "hypothesis not met: max |nabla J| = " + format_double(nab));
}

inline const std::vector<std::string>& generalized_ids() {
  static const std::vector<std::string> ids{
      "ghat.tilde_form",        "jhat.symmetric",           "jhat.polynomial",         "ghat.xi_orthogonal",
      "djhat.closed_form",      "deltajhat.closed_form",    "ddeltajhat.closed_form",  "deltadjhat.closed_form",
      "laplacejstar.weitzenbock", "laplacejhat.closed_form", "djhat.iff_locally_metallic", "jhat.harmonicity_corollary"};
  return ids;
}

inline void generalized_suite(Report& r, const StructureContext& c, int samples, const Tolerances& tol) {
  Recorder rec(r, "generalized", c.s.name);
  const MetallicStructure& s = c.s;
  int m1 = std::min(samples, 50), m2 = std::min(samples, 20);
  std::vector<Point> pts = c.points(m1);
  std::vector<Point> pts2(pts.begin(), pts.begin() + m2);
  std::mt19937_64 rng = c.rng("generalized");
  int n = s.host->dim();

  if (!s.is_nondegenerate()) {
    rec.skip_all(generalized_ids(), "requires Riemannian metric, p²+4q>0");
    return;
  }
  GeneralizedGeometry gg(s, c.geo, c.forms);
  {
    LocalGeometry at(*c.geo, pts.front());
    Signature sig = signature_of(gg.gram(at, at(s.J)));
    rec.diag("ghat.gram_signature", sig.positive,
             "positive eigenvalues of the generalized Gram matrix; negative = " + std::to_string(sig.negative));
  }
  if (!s.is_product_type() || !riemannian_at(*s.host, pts)) {
    rec.skip_all(generalized_ids(), "requires Riemannian metric, p²+4q>0");
    return;
  }

  double tilde = 0.0, sym = 0.0, poly = 0.0, orth = 0.0, unit = 0.0, dj = 0.0, delta = 0.0, nab = 0.0, djmax = 0.0;
  for (const Point& x : pts) {
    MetallicJet jet(s, *c.forms, x);
    LocalGeometry& at = jet.local();
    const Eigen::MatrixXd& j = jet.J();
    Frame f = orthonormal_frame(at.g(), c.seed);
    GeneralizedSection u = normal_section(rng, n), v = normal_section(rng, n);
    tilde = std::max(tilde, std::abs(gg.g_hat(at, j, u, v) - gg.g_hat_tilde_form(at, j, u, v)));
    GeneralizedSection ju = gg.j_hat(at, j, u);
    sym = std::max(sym, std::abs(gg.g_hat(at, j, ju, v) - gg.g_hat(at, j, u, gg.j_hat(at, j, v))));
    poly = std::max(poly, (gg.j_hat(at, j, ju) - s.p * ju - s.q * u).max_abs());
    GeneralizedFrame xi = gg.frame(at, j, f);
    orth = std::max(orth, gg.xi_orthogonality_residual(at, j, xi));
    unit = std::max(unit, gg.xi_orthonormality_residual(at, j, xi));
    GeneralizedSection direct = gg.d_jhat_direct(x, u, v);
    dj = std::max(dj, (gg.d_jhat(jet, u, v) - direct).max_abs());
    djmax = std::max(djmax, direct.max_abs());
    delta = std::max(delta, (gg.delta_jhat(jet, f) - gg.delta_jhat_direct(x)).max_abs());
    nab = std::max(nab, jet.nabla_norm(f));
  }
  rec.measure("ghat.tilde_form", m1, tilde, tol.tilde);
  rec.measure("jhat.symmetric", m1, sym, tol.algebraic);
  rec.measure("jhat.polynomial", m1, poly, tol.algebraic);
  rec.measure("ghat.xi_orthogonal", m1, orth, tol.algebraic);
  rec.diag("ghat.xi_orthogonal", unit, "max |g^(xi_i,xi_j) - delta_ij|");
  rec.measure("djhat.closed_form", m1, dj, tol.base);
  rec.measure("deltajhat.closed_form", m1, delta, tol.base);
  rec.diag("djhat.iff_locally_metallic", djmax, "max |dJ^| on random sections");
  rec.diag("djhat.iff_locally_metallic", nab, "max |nabla J|");
  rec.logical("djhat.iff_locally_metallic", m1, (djmax < tol.base) == (nab < tol.base));

  rec.guard("ddeltajhat.closed_form", [&] {
    RoughLaplacian rough(c.geo, s.J, pts.front());
    double dd = 0.0, de = 0.0, js = 0.0, js_stated = 0.0, lap = 0.0, lap_stated = 0.0, direct_max = 0.0;
    bool conditions_vanish = true;
    for (const Point& x : pts2) {
      MetallicJet jet(s, *c.forms, x);
      Frame f = orthonormal_frame(jet.local().g(), c.seed);
      GeneralizedSection sec = normal_section(rng, n);
      GeneralizedSection dd_direct = gg.ddelta_jhat_direct(x, sec), de_direct = gg.deltad_jhat_direct(x, sec);
      dd = std::max(dd, (gg.ddelta_jhat(jet, sec) - dd_direct).max_abs());
      de = std::max(de, (gg.deltad_jhat(jet, rough, sec) - de_direct).max_abs());
      Eigen::VectorXd lj = gg.laplace_jstar(jet, sec.alpha), n2 = gg.nabla2_jstar(rough, x, sec.alpha);
      Eigen::VectorXd curv = gg.curvature_jstar(jet, f, sec.alpha);
      js = std::max(js, max_abs(lj - (-n2 + curv)));
      js_stated = std::max(js_stated, max_abs(lj - (-n2 - curv)));
      GeneralizedSection sum = dd_direct + de_direct;
      lap = std::max(lap, (gg.laplace_jhat_consistent(jet, f, sec) - sum).max_abs());
      lap_stated = std::max(lap_stated, (gg.laplace_jhat(jet, f, sec) - sum).max_abs());
      direct_max = std::max(direct_max, sum.max_abs());
      HarmonicityConditions h = jhat_harmonicity_conditions(gg, jet, f, normal_vec(rng, n));
      conditions_vanish = conditions_vanish && h.laplacian < tol.second && h.curvature < tol.second &&
                          h.condition3 < tol.second;
    }
    rec.measure("ddeltajhat.closed_form", m2, dd, tol.second);
    rec.measure("deltadjhat.closed_form", m2, de, tol.second);
    rec.measure("laplacejstar.weitzenbock", m2, js, tol.second);
    rec.diag("laplacejstar.weitzenbock", js_stated, "residual with the curvature term subtracted");
    rec.measure("laplacejhat.closed_form", m2, lap, tol.second);
    rec.diag("laplacejhat.closed_form", lap_stated, "residual of the covector part without the curvature correction");
    rec.diag("jhat.harmonicity_corollary", direct_max, "max |(d delta + delta d) J^ s|");
    rec.logical("jhat.harmonicity_corollary", m2, conditions_vanish == (direct_max < tol.second));
  });
}

inline const std::vector<std::string>& map_ids() {
  static const std::vector<std::string> ids{"map.tension_dual_path", "map.isometry_identity", "map.corollary_transfer",
                                            "map.triviality",        "map.lift_commutes",     "map.tension_hat_decomposition",
                                            "map.hat_harmonicity",   "map.jhat_tension_identity"};
  return ids;
}

inline void maps_suite(Report& r, const Manifest& man, const MapSpec& spec, int samples, std::uint64_t seed,
                       const Tolerances& tol) {
  Recorder rec(r, "maps", spec.name);
  const MetallicStructure& s = *man.structure(spec.source);
  const MetallicStructure& t = *man.structure(spec.target);
  MapGeometry mg(SmoothMap{spec.name, s.host, t.host, spec.components}, std::make_shared<GeometryCache>(s.host),
                 std::make_shared<GeometryCache>(t.host));
  int rejected = 0;
  std::vector<Point> pts = mg.admissible(sample_points(*s.host, std::min(samples, 50), seed), &rejected);
  if (rejected > 0) rec.diag("map.rejected_samples", rejected, "samples whose image leaves the target box");
  if (pts.empty()) {
    rec.skip_all(map_ids(), "no sample maps into the target box");
    return;
  }
  int m = static_cast<int>(pts.size());
  std::mt19937_64 rng(seed ^ fnv1a(spec.name + "/maps"));
  MetallicMap mm(mg, s, t);
  const MapGeometry& g = mm.geometry();

  bool riem = riemannian_at(*s.host, pts);
  for (const Point& x : pts) riem = riem && signature(*t.host, g.image(x)).riemannian();
  double iso = 0.0, met = 0.0, tau = 0.0;
  for (const Point& x : pts) {
    iso = std::max(iso, isometry_residual(g, x));
    if (g.source_dim() == g.target_dim()) met = std::max(met, mm.metallic_map_residual(x));
    tau = std::max(tau, max_abs(g.tension(x)));
  }
  bool square = g.source_dim() == g.target_dim();
  bool is_iso = iso <= 1e-8, is_metallic = square && met <= 1e-8;
  rec.diag("map.isometry_residual", iso, "max |Phi* gbar - g|");
  if (square) rec.diag("map.metallic_residual", met, "max |Phi_* J - Jbar Phi_*|");
  rec.diag("map.max_tension", tau, "max |tau|");

  rec.guard("map.tension_dual_path", [&] {
    if (!riem) {
      rec.skip("map.tension_dual_path", "requires Riemannian metric");
      return;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      worst = std::max(worst, max_abs(g.tension(pts[k]) - g.tension_frame(pts[k], seed + k)));
    rec.measure("map.tension_dual_path", m, worst, tol.base);
  });

  const std::string not_metallic_isometry = "hypothesis not met: not a metallic isometry";
  const std::string not_isometry = "hypothesis not met: not an isometry";
  if (is_iso && is_metallic && riem) {
    rec.guard("map.isometry_identity", [&] {
      double worst = 0.0;
      for (const Point& x : pts) worst = std::max(worst, mm.isometry_identity_residual(x));
      rec.measure("map.isometry_identity", m, worst, tol.base);
    });
    rec.guard("map.corollary_transfer", [&] {
      double worst = 0.0;
      int met_count = 0;
      for (const Point& x : pts) {
        MetallicMap::TransferProbe p = mm.corollary_transfer(x, tol.base);
        if (!p.hypothesis_met) continue;
        ++met_count;
        worst = std::max(worst, p.conclusion);
      }
      if (met_count == 0)
        rec.skip("map.corollary_transfer", "hypothesis not met at any sample");
      else
        rec.measure("map.corollary_transfer", met_count, worst, tol.base);
    });
    rec.guard("map.triviality", [&] {
      TrivialityVerdict v = triviality_check(s, t, pts, tol.algebraic);
      rec.measure("map.triviality", m, v.residual, tol.algebraic);
      rec.diag("map.triviality", v.residual, v.message);
    });
  } else {
    rec.skip_all({"map.isometry_identity", "map.corollary_transfer", "map.triviality"}, not_metallic_isometry);
  }

  if (is_metallic) {
    rec.guard("map.lift_commutes", [&] {
      double worst = 0.0;
      for (const Point& x : pts)
        worst = std::max(worst, mm.lift_commutation_residual(x, normal_section(rng, g.source_dim())));
      rec.measure("map.lift_commutes", m, worst, tol.base);
    });
  } else {
    rec.skip("map.lift_commutes", "hypothesis not met: not a metallic map");
  }

  bool hat_ok = riem && s.is_product_type();
  if (is_iso && hat_ok) {
    rec.guard("map.tension_hat_decomposition", [&] {
      double vec = 0.0, cov = 0.0;
      for (const Point& x : pts) {
        MetallicMap::TensionHat th = mm.tension_hat_decomposition(x);
        vec = std::max(vec, th.vector_residual());
        cov = std::max(cov, th.covector_residual());
      }
      rec.measure("map.tension_hat_decomposition", m, std::max(vec, cov), tol.second);
      rec.diag("map.tension_hat_decomposition", vec, "vector component residual");
      rec.diag("map.tension_hat_decomposition", cov, "covector component residual");
    });
    rec.guard("map.hat_harmonicity", [&] {
      bool consistent = true;
      for (const Point& x : pts) consistent = consistent && mm.hat_harmonicity(x).consistent(tol.second);
      rec.logical("map.hat_harmonicity", m, consistent);
    });
  } else {
    std::string why = !hat_ok ? "requires Riemannian metric, p²+4q>0" : not_isometry;
    rec.skip_all({"map.tension_hat_decomposition", "map.hat_harmonicity"}, why);
  }

  if (is_iso && is_metallic && hat_ok && s.p == t.p && s.q == t.q) {
    rec.guard("map.jhat_tension_identity", [&] {
      double worst = 0.0;
      for (const Point& x : pts) worst = std::max(worst, mm.jhat_tension_identity_residual(x));
      rec.measure("map.jhat_tension_identity", m, worst, tol.second);
    });
  } else {
    rec.skip("map.jhat_tension_identity", !hat_ok ? "requires Riemannian metric, p²+4q>0"
                                                  : "hypothesis not met: not a metallic isometry with equal p, q");
  }
}

}  // namespace detail

/// Deterministic for a fixed manifest and options.
inline Report run_suites(const Manifest& m, const SuiteOptions& o) {
  auto start = std::chrono::steady_clock::now();
  Report r;
  r.run.seed = o.seed;
  r.run.samples = o.samples;
  r.run.tol = o.tol;
  r.run.suites = o.suites;
  r.run.manifests = {m.origin};
  detail::Tolerances tol(o.tol);
  auto wants = [&](const std::string& s) { return std::find(o.suites.begin(), o.suites.end(), s) != o.suites.end(); };

  bool object_suites = wants("algebraic") || wants("frame_lemmas") || wants("weitzenbock") || wants("generalized");
  if (object_suites) {
    for (const MetallicStructure& s : m.structures) {
      detail::StructureContext c(s, o.seed);
      if (wants("algebraic")) detail::algebraic_suite(r, c, o.samples, tol);
      if (wants("frame_lemmas")) detail::frame_lemmas_suite(r, c, o.samples, tol);
      if (wants("weitzenbock")) detail::weitzenbock_suite(r, c, o.samples, tol);
      if (wants("generalized")) detail::generalized_suite(r, c, o.samples, tol);
    }
  }
  if (m.structures.empty())
    for (const char* suite : {"algebraic", "frame_lemmas", "weitzenbock", "generalized"})
      if (wants(suite)) {
        const Identity* first = nullptr;
        for (const Identity& i : identities())
          if (!first && i.suite == suite) first = &i;
        detail::Recorder(r, suite, "-").skip(first->id, "manifest declares no structures");
      }
  if (wants("maps")) {
    for (const MapSpec& spec : m.maps) detail::maps_suite(r, m, spec, o.samples, o.seed, tol);
    if (m.maps.empty()) detail::Recorder(r, "maps", "-").skip("map.tension_dual_path", "manifest declares no maps");
  }

  r.run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline SuiteOptions options_from(const VerifyConfig& c) { return {c.suites, c.samples, c.seed, c.tol}; }

}  // namespace metharm
