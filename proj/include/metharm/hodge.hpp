#pragma once

// d, delta and the Hodge-Laplace operator on TM-valued forms of degree <= 2,
// the rough Laplacian, the Weitzenboeck curvature term, and the frame-sum
// identities for metallic structures built on them.
//
//   (dT)(X)   = nabla_X T                          degree 0
//   (dT)(X,Y) = (nabla_X T)Y - (nabla_Y T)X        degree 1
//   (delta T)(X_1..) = -sum_i eps_i (nabla_{E_i} T)(E_i, X_1..)
//   Delta = d delta + delta d
//
// Tensor slot layout: a degree-1 form T is "ud" with T^i_b; a degree-2 form w
// is "udd" with w(d_b, d_c) = w^i_bc d_i. Covariant derivatives put the
// derivative slot first.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metharm/connection.hpp"
#include "metharm/errors.hpp"
#include "metharm/metallic.hpp"
#include "metharm/tensor.hpp"

namespace metharm {

struct TBValuedForm {
  int degree = 1;
  Tensor components;

  static TBValuedForm vector(const VectorField& v) { return {0, tensor_from_vector(v)}; }
  static TBValuedForm endomorphism(const ExprMatrix& t) { return {1, tensor_from_endo(t)}; }
  static TBValuedForm two_form(Tensor w) {
    if (w.variance() != "udd") throw UnsupportedDegreeError("a 2-form needs slot layout udd");
    return {2, std::move(w)};
  }
};

inline void require_riemannian(const ChartedManifold& m, const Point& x) {
  if (!signature(m, x).riemannian())
    throw SignatureError("manifold '" + m.name() + "': frame-sum identity requires a Riemannian metric");
}

inline Eigen::MatrixXd directional(const NumTensor& nabla_t, const Eigen::VectorXd& x) {
  return as_matrix(contract_front(nabla_t, x));
}

namespace detail {

// (dT)^i_bc from (nabla T)_(b, i, c).
inline Tensor exterior_of_endo(const Tensor& nabla_t) {
  int n = nabla_t.dim();
  Tensor w(n, "udd");
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        if (b != c) w.at({i, b, c}) = nabla_t.at({b, i, c}) - nabla_t.at({c, i, b});
  return w;
}

// -g^{ab} t_(a, i, b, ...) : contracts the derivative slot with the next lower slot.
inline Tensor metric_trace(const Tensor& t, const ExprMatrix& gi) {
  int n = t.dim();
  std::string var = t.variance();
  // slots: a (d), i (u), b (d), rest
  std::string rest = "u" + var.substr(3);
  Tensor r(n, rest);
  std::size_t rcount = r.data().size();
  for (std::size_t flat = 0; flat < rcount; ++flat) {
    std::vector<int> ridx = r.index_of(flat);
    std::vector<Expr> terms;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (gi(a, b).is_zero()) continue;
        std::vector<int> idx{a, ridx[0], b};
        idx.insert(idx.end(), ridx.begin() + 1, ridx.end());
        const Expr& c = t.at(idx);
        if (c.is_zero()) continue;
        terms.push_back(gi(a, b) * c);
      }
    r.data()[flat] = -add(terms);
  }
  return r;
}

}  // namespace detail

/// Symbolic d / delta / Delta pipeline for one (1,1)-tensor field viewed as a
/// TM-valued 1-form. Pieces are built on first use.
class EndoForms {
 public:
  EndoForms(GeometryPtr geo, ExprMatrix t) : geo_(std::move(geo)), t_(std::move(t)) {}

  const GeometryCache& geometry() const { return *geo_; }
  const ExprMatrix& field() const { return t_; }

  /// (a, i, b) = (nabla_a T)^i_b
  const Tensor& nabla() const {
    if (!nabla_) nabla_ = geo_->covariant_derivative(tensor_from_endo(t_));
    return *nabla_;
  }
  /// (a, b, i, c) = (nabla^2_{a,b} T)^i_c
  const Tensor& nabla2() const {
    if (!nabla2_) nabla2_ = geo_->covariant_derivative(nabla());
    return *nabla2_;
  }
  const Tensor& d() const {
    if (!d_) d_ = detail::exterior_of_endo(nabla());
    return *d_;
  }
  const VectorField& codiff() const {
    if (!codiff_) {
      Tensor tr = detail::metric_trace(nabla(), geo_->manifold().inverse_metric());
      codiff_ = tr.data();
    }
    return *codiff_;
  }
  /// (delta d T)^i_c
  const ExprMatrix& codiff_d() const {
    if (!codiff_d_) {
      Tensor nw = geo_->covariant_derivative(d());
      Tensor tr = detail::metric_trace(nw, geo_->manifold().inverse_metric());
      codiff_d_ = as_endo(tr);
    }
    return *codiff_d_;
  }
  /// (d delta T)^i_c = (nabla_c delta T)^i
  const ExprMatrix& d_codiff() const {
    if (!d_codiff_) {
      Tensor nv = geo_->covariant_derivative(tensor_from_vector(codiff()));
      int n = t_.size();
      ExprMatrix m(n);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < n; ++c) m(i, c) = nv.at({c, i});
      d_codiff_ = m;
    }
    return *d_codiff_;
  }
  const ExprMatrix& laplacian() const {
    if (!laplacian_) laplacian_ = d_codiff() + codiff_d();
    return *laplacian_;
  }

 private:
  static ExprMatrix as_endo(const Tensor& t) {
    ExprMatrix m(t.dim());
    for (int i = 0; i < t.dim(); ++i)
      for (int j = 0; j < t.dim(); ++j) m(i, j) = t.at({i, j});
    return m;
  }

  GeometryPtr geo_;
  ExprMatrix t_;
  mutable std::optional<Tensor> nabla_, nabla2_, d_;
  mutable std::optional<VectorField> codiff_;
  mutable std::optional<ExprMatrix> codiff_d_, d_codiff_, laplacian_;
};

using EndoFormsPtr = std::shared_ptr<const EndoForms>;

// ---------------------------------------------------------------------------
// Pointwise operators on TBValuedForm.

/// dform for degree 0 (args = {X}) and degree 1 (args = {X, Y}).
inline Eigen::VectorXd dform(const GeometryCache& geo, const TBValuedForm& t, const Point& x,
                             const std::vector<Eigen::VectorXd>& args) {
  if (t.degree == 2) throw UnsupportedDegreeError("d is implemented for degrees 0 and 1 only");
  if (static_cast<int>(args.size()) != t.degree + 1)
    throw PreconditionError("dform of degree " + std::to_string(t.degree) + " takes " +
                            std::to_string(t.degree + 1) + " arguments");
  LocalGeometry at(geo, x);
  NumTensor nt = at(geo.covariant_derivative(t.components));
  if (t.degree == 0) return as_vector(contract_front(nt, args[0]));
  return directional(nt, args[0]) * args[1] - directional(nt, args[1]) * args[0];
}

namespace detail {

// Applies a numeric form (slot layout u d...) to its vector arguments.
inline Eigen::VectorXd apply_form(const NumTensor& w, const std::vector<Eigen::VectorXd>& args) {
  int n = w.dim();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (std::size_t flat = 0; flat < w.data().size(); ++flat) {
    std::vector<int> idx = w.index_of(flat);
    double c = w.data()[flat];
    for (std::size_t s = 1; s < idx.size(); ++s) c *= args[s - 1](idx[s]);
    r(idx[0]) += c;
  }
  return r;
}

inline void require_codiff_degree(const TBValuedForm& t, std::size_t nargs) {
  if (t.degree == 0) throw UnsupportedDegreeError("delta is defined for degrees 1 and 2");
  if (static_cast<int>(nargs) != t.degree - 1) throw PreconditionError("codiff argument count mismatch");
}

}  // namespace detail

/// Coordinate trace path: -g^{ab} (nabla_a T)(d_b, args...).
inline Eigen::VectorXd codiff(const GeometryCache& geo, const TBValuedForm& t, const Point& x,
                              const std::vector<Eigen::VectorXd>& args = {}) {
  detail::require_codiff_degree(t, args.size());
  LocalGeometry at(geo, x);
  Tensor tr = detail::metric_trace(geo.covariant_derivative(t.components), geo.manifold().inverse_metric());
  return detail::apply_form(at(tr), args);
}

/// Frame-sum path: -sum eps_i (nabla_{E_i} T)(E_i, args...).
inline Eigen::VectorXd codiff_frame(const GeometryCache& geo, const TBValuedForm& t, const Point& x,
                                    const Frame& f, const std::vector<Eigen::VectorXd>& args = {}) {
  detail::require_codiff_degree(t, args.size());
  LocalGeometry at(geo, x);
  NumTensor nt = at(geo.covariant_derivative(t.components));
  Eigen::VectorXd r = Eigen::VectorXd::Zero(geo.dim());
  for (int i = 0; i < f.size(); ++i) {
    NumTensor di = contract_front(nt, f[i]);
    std::vector<Eigen::VectorXd> full{f[i]};
    full.insert(full.end(), args.begin(), args.end());
    r -= f.signs[static_cast<std::size_t>(i)] * detail::apply_form(di, full);
  }
  return r;
}

inline Eigen::VectorXd laplacian(const EndoForms& forms, const Point& x, const Eigen::VectorXd& v) {
  LocalGeometry at(forms.geometry(), x);
  return at(forms.laplacian()) * v;
}

/// sum eps_i (R(E_i, X) T) E_i.
inline Eigen::VectorXd weitzenbock_S(LocalGeometry& at, const Eigen::MatrixXd& t, const Frame& f,
                                     const Eigen::VectorXd& x) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(at.dim());
  for (int i = 0; i < f.size(); ++i) r += f.signs[static_cast<std::size_t>(i)] * at.riemann_on_endo(f[i], x, t, f[i]);
  return r;
}

inline Eigen::MatrixXd weitzenbock_S_matrix(LocalGeometry& at, const Eigen::MatrixXd& t, const Frame& f) {
  int n = at.dim();
  Eigen::MatrixXd s(n, n);
  for (int c = 0; c < n; ++c) s.col(c) = weitzenbock_S(at, t, f, Eigen::VectorXd::Unit(n, c));
  return s;
}

/// Rough Laplacian sum eps_i (nabla_{E_i} nabla_{E_i} T - nabla_{nabla_{E_i} E_i} T), built
/// literally from a symbolic orthonormal frame field.
class RoughLaplacian {
 public:
  RoughLaplacian(GeometryPtr geo, const ExprMatrix& t, const Point& reference,
                 std::optional<std::uint64_t> rotation_seed = std::nullopt)
      : geo_(std::move(geo)) {
    FrameField f = orthonormal_frame_field(geo_->manifold(), reference, rotation_seed);
    int n = t.size();
    field_ = ExprMatrix(n);
    for (int i = 0; i < f.size(); ++i) {
      const VectorField& e = f.vectors[static_cast<std::size_t>(i)];
      ExprMatrix term = geo_->nabla_endo(e, geo_->nabla_endo(e, t)) - geo_->nabla_endo(geo_->nabla(e, e), t);
      field_ = field_ + (f.signs[static_cast<std::size_t>(i)] > 0 ? term : Expr(-1.0) * term);
    }
  }
  const ExprMatrix& field() const { return field_; }
  Eigen::MatrixXd at(const Point& x) const {
    Evaluator ev(geo_->manifold().binding(x));
    return evaluate(ev, field_);
  }

 private:
  GeometryPtr geo_;
  ExprMatrix field_;
};

inline Eigen::VectorXd nabla2(const RoughLaplacian& rough, const Point& x, const Eigen::VectorXd& v) {
  return rough.at(x) * v;
}

// ---------------------------------------------------------------------------
// Pointwise jet of a metallic structure.

/// Numeric values of J and its derived objects at one point.
class MetallicJet {
 public:
  MetallicJet(const MetallicStructure& s, const EndoForms& forms, const Point& x)
      : s_(&s), forms_(&forms), at_(forms.geometry(), x) {
    j_ = at_(s.J);
    nabla_ = at_(forms.nabla());
  }

  LocalGeometry& local() { return at_; }
  const MetallicStructure& structure() const { return *s_; }
  const Eigen::MatrixXd& J() const { return j_; }
  const NumTensor& nabla_tensor() const { return nabla_; }
  Eigen::MatrixXd nabla(const Eigen::VectorXd& x) const { return directional(nabla_, x); }
  /// (dJ)(X, Y)
  Eigen::VectorXd d(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return nabla(x) * y - nabla(y) * x; }
  const Eigen::VectorXd& codiff() {
    if (!codiff_) codiff_ = at_(forms_->codiff());
    return *codiff_;
  }
  Eigen::VectorXd codiff_frame(const Frame& f) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(j_.rows());
    for (int i = 0; i < f.size(); ++i) r -= f.signs[static_cast<std::size_t>(i)] * nabla(f[i]) * f[i];
    return r;
  }
  const Eigen::MatrixXd& laplacian() {
    if (!lap_) lap_ = at_(forms_->laplacian());
    return *lap_;
  }
  const Eigen::MatrixXd& d_codiff() {
    if (!dcod_) dcod_ = at_(forms_->d_codiff());
    return *dcod_;
  }
  const Eigen::MatrixXd& codiff_d() {
    if (!codd_) codd_ = at_(forms_->codiff_d());
    return *codd_;
  }
  const NumTensor& nabla2_tensor() {
    if (!nabla2_) nabla2_ = at_(forms_->nabla2());
    return *nabla2_;
  }
  /// nabla^2_{X,Y} J
  Eigen::MatrixXd nabla2(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return as_matrix(contract_front(contract_front(nabla2_tensor(), x), y));
  }

  /// sqrt(sum_ij eps_i eps_j |(dJ)(E_i,E_j)|^2) with the frame norm of the values.
  double d_norm(const Frame& f) const {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i)
      for (int k = 0; k < f.size(); ++k) s += frame_norm2(f, d(f[i], f[k]));
    return std::sqrt(s);
  }
  double nabla_norm(const Frame& f) const {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i)
      for (int k = 0; k < f.size(); ++k) s += frame_norm2(f, nabla(f[i]) * f[k]);
    return std::sqrt(s);
  }
  double symmetric_part_norm(const Frame& f) const {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i)
      for (int k = 0; k < f.size(); ++k) s += frame_norm2(f, nabla(f[i]) * f[k] + nabla(f[k]) * f[i]);
    return std::sqrt(s);
  }
  double vector_norm(const Frame& f, const Eigen::VectorXd& v) const { return std::sqrt(frame_norm2(f, v)); }

 private:
  double frame_norm2(const Frame& f, const Eigen::VectorXd& v) const {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) {
      double c = at_.inner(v, f[i]);
      s += c * c;
    }
    return s;
  }

  const MetallicStructure* s_;
  const EndoForms* forms_;
  LocalGeometry at_;
  Eigen::MatrixXd j_;
  NumTensor nabla_;
  std::optional<NumTensor> nabla2_;
  std::optional<Eigen::VectorXd> codiff_;
  std::optional<Eigen::MatrixXd> lap_, dcod_, codd_;
};

// ---------------------------------------------------------------------------
// Frame-sum identities.

struct TraceLemmaTerms {
  double lhs1 = 0.0;       // sum eps_i g((dJ)(X,E_i), E_i)
  double lhs2 = 0.0;       // sum eps_i g((dJ)(X,E_i), J E_i)
  double trace_term = 0.0; // sum eps_i g((nabla_X J)E_i, E_i)
  double x_delta = 0.0;    // g(X, delta J)
  double jx_delta = 0.0;   // g(JX, delta J)
};

inline TraceLemmaTerms trace_lemma_terms(MetallicJet& jet, const Frame& f, const Eigen::VectorXd& x) {
  LocalGeometry& at = jet.local();
  TraceLemmaTerms t;
  Eigen::MatrixXd nx = jet.nabla(x);
  for (int i = 0; i < f.size(); ++i) {
    double eps = f.signs[static_cast<std::size_t>(i)];
    Eigen::VectorXd dxe = jet.d(x, f[i]);
    t.lhs1 += eps * at.inner(dxe, f[i]);
    t.lhs2 += eps * at.inner(dxe, jet.J() * f[i]);
    t.trace_term += eps * at.inner(nx * f[i], f[i]);
  }
  const Eigen::VectorXd& dj = jet.codiff();
  t.x_delta = at.inner(x, dj);
  t.jx_delta = at.inner(jet.J() * x, dj);
  return t;
}

inline double lemma_trace_residual_1(const TraceLemmaTerms& t) { return std::abs(t.lhs1 - (t.trace_term + t.x_delta)); }

inline double lemma_trace_residual_2(const TraceLemmaTerms& t, double p) {
  return std::abs(t.lhs2 - (0.5 * p * t.trace_term + p * t.x_delta - t.jx_delta));
}

/// g(JX - p/2 X, delta J) against p/2 * lhs1 - lhs2.
inline double proof_step_residual(const TraceLemmaTerms& t, double p) {
  return std::abs((t.jx_delta - 0.5 * p * t.x_delta) - (0.5 * p * t.lhs1 - t.lhs2));
}

inline double lemma_trace_residual_1(MetallicJet& jet, const Frame& f, const Eigen::VectorXd& x) {
  require_riemannian(*jet.structure().host, jet.local().point());
  return lemma_trace_residual_1(trace_lemma_terms(jet, f, x));
}

inline double lemma_trace_residual_2(MetallicJet& jet, const Frame& f, const Eigen::VectorXd& x) {
  require_riemannian(*jet.structure().host, jet.local().point());
  return lemma_trace_residual_2(trace_lemma_terms(jet, f, x), jet.structure().p);
}

/// |(dJ)(JX,Y) + (dJ)(X,JY) - p (dJ)(X,Y) - N_J(X,Y)| for Expr fields X, Y.
inline double lemma_nijenhuis_residual(const MetallicStructure& s, const EndoForms& forms, const Point& x,
                                       const VectorField& a, const VectorField& b) {
  MetallicJet jet(s, forms, x);
  Evaluator ev(s.host->binding(x));
  Eigen::VectorXd av = evaluate(ev, a), bv = evaluate(ev, b);
  const Eigen::MatrixXd& j = jet.J();
  Eigen::VectorXd lhs = jet.d(j * av, bv) + jet.d(av, j * bv) - s.p * jet.d(av, bv);
  Eigen::VectorXd rhs = nijenhuis(forms.geometry(), s, x, a, b);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

struct DeltaProbe {
  double max_d = 0.0;
  double max_delta = 0.0;
  double max_proof_step = 0.0;
  bool hypothesis_met = false;
  bool conclusion_holds = false;
};

/// Measures dJ and delta J over samples; the implication is checked only when
/// max |dJ| < tol. The proof-step identity is checked everywhere.
inline DeltaProbe dj_implies_deltaj_probe(const MetallicStructure& s, const EndoForms& forms,
                                          const std::vector<Point>& points, double tol,
                                          const std::vector<Eigen::VectorXd>& directions) {
  s.require_nondegenerate();
  DeltaProbe r;
  for (const Point& x : points) {
    MetallicJet jet(s, forms, x);
    Frame f = orthonormal_frame(jet.local().g());
    r.max_d = std::max(r.max_d, jet.d_norm(f));
    r.max_delta = std::max(r.max_delta, jet.vector_norm(f, jet.codiff()));
    if (signature_of(jet.local().g()).riemannian())
      for (const Eigen::VectorXd& v : directions)
        r.max_proof_step = std::max(r.max_proof_step, proof_step_residual(trace_lemma_terms(jet, f, v), s.p));
  }
  r.hypothesis_met = r.max_d < tol;
  r.conclusion_holds = r.max_delta < 10.0 * tol;
  return r;
}

struct NearlyKaehlerProbe {
  double max_nabla = 0.0;
  double max_d = 0.0;
  double max_symmetric = 0.0;
  bool parallel(double tol) const { return max_nabla < tol; }
  bool closed_and_antisymmetric(double tol) const { return max_d < tol && max_symmetric < tol; }
  bool equivalent(double tol) const { return parallel(tol) == closed_and_antisymmetric(tol); }
};

inline NearlyKaehlerProbe nearly_kaehler_probe(const MetallicStructure& s, const EndoForms& forms,
                                               const std::vector<Point>& points) {
  NearlyKaehlerProbe r;
  for (const Point& x : points) {
    MetallicJet jet(s, forms, x);
    Frame f = orthonormal_frame(jet.local().g());
    r.max_nabla = std::max(r.max_nabla, jet.nabla_norm(f));
    r.max_d = std::max(r.max_d, jet.d_norm(f));
    r.max_symmetric = std::max(r.max_symmetric, jet.symmetric_part_norm(f));
  }
  return r;
}

struct BochnerReport {
  double lhs = 0.0;         // |nabla J|^2
  double curv = 0.0;        // sum R(E_i,E_j,JE_i,JE_j)
  double trace_term = 0.0;  // p trace(J Q)
  double scal_term = 0.0;   // q scal
  double pairing = 0.0;     // <Delta J, J>
  double laplacian_norm = 0.0;
  double rough_pairing = 0.0;  // <nabla^2 J, J>
  double s_pairing = 0.0;      // <S, J>

  /// lhs - (curv + trace_term - scal_term), the form with opposite signs on the two Ricci terms.
  double residual_stated() const { return std::abs(lhs - (curv + trace_term - scal_term)); }
  /// lhs - (curv + trace_term + scal_term), the form obtained with one sign convention throughout.
  double residual_consistent() const { return std::abs(lhs - (curv + trace_term + scal_term)); }
};

inline BochnerReport bochner_report(MetallicJet& jet, const RoughLaplacian& rough, const Frame& f) {
  const MetallicStructure& s = jet.structure();
  LocalGeometry& at = jet.local();
  require_riemannian(*s.host, at.point());
  const Eigen::MatrixXd& j = jet.J();
  BochnerReport r;
  int n = f.size();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      Eigen::VectorXd v = jet.nabla(f[i]) * f[k];
      r.lhs += at.inner(v, v);
      r.curv += at.riemann4(f[i], f[k], j * f[i], j * f[k]);
    }
  r.trace_term = s.p * (j * at.ricci_operator()).trace();
  r.scal_term = s.q * at.scal();
  const Eigen::MatrixXd& lap = jet.laplacian();
  Eigen::MatrixXd n2 = rough.at(at.point());
  Eigen::MatrixXd sm = weitzenbock_S_matrix(at, j, f);
  for (int k = 0; k < n; ++k) {
    r.pairing += at.inner(lap * f[k], j * f[k]);
    r.rough_pairing += at.inner(n2 * f[k], j * f[k]);
    r.s_pairing += at.inner(sm * f[k], j * f[k]);
    Eigen::VectorXd lv = lap * f[k];
    r.laplacian_norm += at.inner(lv, lv);
  }
  r.laplacian_norm = std::sqrt(std::abs(r.laplacian_norm));
  return r;
}

}  // namespace metharm
