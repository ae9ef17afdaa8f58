#pragma once

// The generalized tangent bundle TM + T*M of a metallic manifold with the
// induced metric g^, endomorphism J^ and connection nabla^, and the d, delta,
// Delta of J^ in two forms: directly from the definitions on symbolic
// generalized fields, and from the closed expressions in terms of J.
//
//   J^(X + a)        = JX + (flat X - J* a + p a)
//   nabla^_{X+a}(Y+b) = nabla_X Y + nabla_X b
//   xi_i             = (J~ E_i + flat E_i) / 2
//
// The codifferential sums over the n sections xi_i.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "metharm/connection.hpp"
#include "metharm/hodge.hpp"
#include "metharm/metallic.hpp"

namespace metharm {

struct GeneralizedSection {
  Eigen::VectorXd X;
  Eigen::VectorXd alpha;

  static GeneralizedSection zero(int n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)}; }
  static GeneralizedSection from_stacked(const Eigen::VectorXd& v) {
    Eigen::Index n = v.size() / 2;
    return {v.head(n), v.tail(n)};
  }
  Eigen::VectorXd stacked() const {
    Eigen::VectorXd v(X.size() + alpha.size());
    v << X, alpha;
    return v;
  }
  double max_abs() const { return std::max(X.cwiseAbs().maxCoeff(), alpha.cwiseAbs().maxCoeff()); }

  friend GeneralizedSection operator+(const GeneralizedSection& a, const GeneralizedSection& b) {
    return {a.X + b.X, a.alpha + b.alpha};
  }
  friend GeneralizedSection operator-(const GeneralizedSection& a, const GeneralizedSection& b) {
    return {a.X - b.X, a.alpha - b.alpha};
  }
  friend GeneralizedSection operator*(double s, const GeneralizedSection& a) { return {s * a.X, s * a.alpha}; }
};

/// A generalized section with expression components.
struct GeneralizedField {
  VectorField X;
  CovectorField alpha;

  static GeneralizedField constant(const GeneralizedSection& s) { return {constant_field(s.X), constant_field(s.alpha)}; }
  friend GeneralizedField operator+(const GeneralizedField& a, const GeneralizedField& b) {
    return {a.X + b.X, a.alpha + b.alpha};
  }
  friend GeneralizedField operator-(const GeneralizedField& a, const GeneralizedField& b) {
    return {a.X - b.X, a.alpha - b.alpha};
  }
  friend GeneralizedField operator*(const Expr& s, const GeneralizedField& a) { return {s * a.X, s * a.alpha}; }
};

inline GeneralizedSection evaluate(Evaluator& ev, const GeneralizedField& f) {
  return {evaluate(ev, f.X), evaluate(ev, f.alpha)};
}

/// n sections xi_i = (J~ E_i + flat E_i)/2 at one point.
struct GeneralizedFrame {
  std::vector<GeneralizedSection> xi;
  int size() const { return static_cast<int>(xi.size()); }
};

class GeneralizedGeometry {
 public:
  GeneralizedGeometry(MetallicStructure s, GeometryPtr geo, EndoFormsPtr forms,
                      std::optional<std::uint64_t> rotation_seed = std::nullopt)
      : s_(std::move(s)), geo_(std::move(geo)), forms_(std::move(forms)), seed_(rotation_seed) {
    s_.require_nondegenerate();
    jt_ = associated_structure(s_, AssociatedKind::tilde);
    n_ = s_.host->dim();
  }

  const MetallicStructure& structure() const { return s_; }
  const GeometryCache& geometry() const { return *geo_; }
  const EndoForms& forms() const { return *forms_; }
  const ExprMatrix& tilde() const { return jt_; }
  int dim() const { return n_; }

  /// Raises unless g is Riemannian at x and p^2+4q > 0.
  void require_riemannian(const Point& x) const {
    if (!signature(*s_.host, x).riemannian() || !s_.is_product_type())
      throw SignatureError("requires Riemannian metric, p^2+4q>0");
  }

  // ---- pointwise algebra -------------------------------------------------

  double g_hat(const Point& x, const GeneralizedSection& a, const GeneralizedSection& b) const {
    LocalGeometry at(*geo_, x);
    return g_hat(at, evaluate(at.evaluator(), s_.J), a, b);
  }
  double g_hat(LocalGeometry& at, const Eigen::MatrixXd& j, const GeneralizedSection& a,
               const GeneralizedSection& b) const {
    double d = s_.discriminant();
    return at.inner(a.X, b.X) + at.inner(at.sharp(a.alpha), at.sharp(b.alpha)) +
           (s_.p * (a.alpha.dot(b.X) + b.alpha.dot(a.X)) - 2.0 * (a.alpha.dot(j * b.X) + b.alpha.dot(j * a.X))) / d;
  }
  /// The same metric written with J~.
  double g_hat_tilde_form(LocalGeometry& at, const Eigen::MatrixXd& j, const GeneralizedSection& a,
                          const GeneralizedSection& b) const {
    double d = s_.discriminant();
    Eigen::MatrixXd jt = tilde_at(j, s_.p, s_.q);
    return at.inner(a.X, b.X) + at.inner(at.sharp(a.alpha), at.sharp(b.alpha)) +
           std::sqrt(std::abs(d)) / d * (a.alpha.dot(jt * b.X) + b.alpha.dot(jt * a.X));
  }

  GeneralizedSection j_hat(LocalGeometry& at, const Eigen::MatrixXd& j, const GeneralizedSection& s) const {
    return {j * s.X, at.flat(s.X) - j.transpose() * s.alpha + s_.p * s.alpha};
  }
  GeneralizedSection j_hat(const Point& x, const GeneralizedSection& s) const {
    LocalGeometry at(*geo_, x);
    return j_hat(at, evaluate(at.evaluator(), s_.J), s);
  }
  /// 2n x 2n matrix of J^ on stacked (X, alpha).
  Eigen::MatrixXd j_hat_matrix(LocalGeometry& at, const Eigen::MatrixXd& j) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n_, 2 * n_);
    m.topLeftCorner(n_, n_) = j;
    m.bottomLeftCorner(n_, n_) = at.g();
    m.bottomRightCorner(n_, n_) = -j.transpose() + s_.p * Eigen::MatrixXd::Identity(n_, n_);
    return m;
  }
  /// Gram matrix of g^ on the basis d_1..d_n, dx^1..dx^n.
  Eigen::MatrixXd gram(LocalGeometry& at, const Eigen::MatrixXd& j) const {
    Eigen::MatrixXd m(2 * n_, 2 * n_);
    for (int a = 0; a < 2 * n_; ++a)
      for (int b = 0; b < 2 * n_; ++b)
        m(a, b) = g_hat(at, j, GeneralizedSection::from_stacked(Eigen::VectorXd::Unit(2 * n_, a)),
                        GeneralizedSection::from_stacked(Eigen::VectorXd::Unit(2 * n_, b)));
    return m;
  }

  GeneralizedFrame frame(LocalGeometry& at, const Eigen::MatrixXd& j, const Frame& f) const {
    Eigen::MatrixXd jt = tilde_at(j, s_.p, s_.q);
    GeneralizedFrame r;
    for (int i = 0; i < f.size(); ++i) r.xi.push_back({0.5 * jt * f[i], 0.5 * at.flat(f[i])});
    return r;
  }

  Eigen::MatrixXd xi_gram(LocalGeometry& at, const Eigen::MatrixXd& j, const GeneralizedFrame& xi) const {
    Eigen::MatrixXd m(xi.size(), xi.size());
    for (int a = 0; a < xi.size(); ++a)
      for (int b = 0; b < xi.size(); ++b) m(a, b) = g_hat(at, j, xi.xi[a], xi.xi[b]);
    return m;
  }
  /// max |g^(xi_i, xi_j) - delta_ij|
  double xi_orthonormality_residual(LocalGeometry& at, const Eigen::MatrixXd& j, const GeneralizedFrame& xi) const {
    Eigen::MatrixXd m = xi_gram(at, j, xi);
    return (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
  }
  /// max |g^(xi_i, xi_j) - (1 + 1/sqrt(p^2+4q))/2 delta_ij|
  double xi_orthogonality_residual(LocalGeometry& at, const Eigen::MatrixXd& j, const GeneralizedFrame& xi) const {
    Eigen::MatrixXd m = xi_gram(at, j, xi);
    double c = 0.5 * (1.0 + 1.0 / std::sqrt(s_.discriminant()));
    return (m - c * Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
  }

  /// nabla^_{s1} s2 for a field s2; the covector part of s1 does not enter.
  GeneralizedSection nabla_hat(const Point& x, const GeneralizedSection& s1, const GeneralizedField& s2) const {
    Evaluator ev(s_.host->binding(x));
    return evaluate(ev, nabla_hat(constant_field(s1.X), s2));
  }

  // ---- symbolic calculus on generalized fields --------------------------

  GeneralizedField nabla_hat(const VectorField& x, const GeneralizedField& s) const {
    return {geo_->nabla(x, s.X), geo_->nabla_covector(x, s.alpha)};
  }
  GeneralizedField nabla_hat(const GeneralizedField& a, const GeneralizedField& s) const { return nabla_hat(a.X, s); }
  GeneralizedField j_hat(const GeneralizedField& s) const {
    CovectorField lower = s_.host->flat(s.X);
    CovectorField dual = apply_dual(s_.J, s.alpha);
    CovectorField out(lower.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = lower[k] - dual[k] + Expr(s_.p) * s.alpha[k];
    return {metharm::apply(s_.J, s.X), out};
  }
  /// (nabla^_a J^) s = nabla^_a (J^ s) - J^ (nabla^_a s)
  GeneralizedField nabla_j_hat(const GeneralizedField& a, const GeneralizedField& s) const {
    return nabla_hat(a, j_hat(s)) - j_hat(nabla_hat(a, s));
  }
  /// (dJ^)(s1, s2) = (nabla^_{s1} J^) s2 - (nabla^_{s2} J^) s1
  GeneralizedField d_j_hat_field(const GeneralizedField& s1, const GeneralizedField& s2) const {
    return nabla_j_hat(s1, s2) - nabla_j_hat(s2, s1);
  }
  /// Symbolic xi_i built from the symbolic orthonormal frame.
  const std::vector<GeneralizedField>& xi_fields(const Point& reference) const {
    if (!xi_) {
      FrameField f = orthonormal_frame_field(*s_.host, reference, seed_);
      std::vector<GeneralizedField> xs;
      for (const VectorField& e : f.vectors)
        xs.push_back({Expr(0.5) * metharm::apply(jt_, e), Expr(0.5) * s_.host->flat(e)});
      xi_ = xs;
    }
    return *xi_;
  }

  // ---- direct paths ------------------------------------------------------

  GeneralizedSection d_jhat_direct(const Point& x, const GeneralizedSection& a, const GeneralizedSection& b) const {
    Evaluator ev(s_.host->binding(x));
    return evaluate(ev, d_j_hat_field(GeneralizedField::constant(a), GeneralizedField::constant(b)));
  }

  /// -sum_i (nabla^_{xi_i} J^) xi_i as a field.
  const GeneralizedField& delta_jhat_field(const Point& reference) const {
    if (!delta_) {
      GeneralizedField acc{zero_field(n_), zero_field(n_)};
      for (const GeneralizedField& xi : xi_fields(reference)) acc = acc - nabla_j_hat(xi, xi);
      delta_ = acc;
    }
    return *delta_;
  }
  GeneralizedSection delta_jhat_direct(const Point& x) const {
    Evaluator ev(s_.host->binding(x));
    return evaluate(ev, delta_jhat_field(x));
  }

  /// (d delta J^)(s) = nabla^_s delta J^
  GeneralizedSection ddelta_jhat_direct(const Point& x, const GeneralizedSection& s) const {
    Evaluator ev(s_.host->binding(x));
    const std::vector<GeneralizedField>& cols = ddelta_basis(x);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * n_);
    Eigen::VectorXd st = s.stacked();
    for (int k = 0; k < 2 * n_; ++k)
      if (st(k) != 0.0) r += st(k) * evaluate(ev, cols[static_cast<std::size_t>(k)]).stacked();
    return GeneralizedSection::from_stacked(r);
  }

  /// (delta d J^)(s) = -sum_i (nabla^_{xi_i} dJ^)(xi_i, s)
  GeneralizedSection deltad_jhat_direct(const Point& x, const GeneralizedSection& s) const {
    Evaluator ev(s_.host->binding(x));
    const std::vector<GeneralizedField>& cols = deltad_basis(x);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * n_);
    Eigen::VectorXd st = s.stacked();
    for (int k = 0; k < 2 * n_; ++k)
      if (st(k) != 0.0) r += st(k) * evaluate(ev, cols[static_cast<std::size_t>(k)]).stacked();
    return GeneralizedSection::from_stacked(r);
  }

  GeneralizedSection laplace_jhat_direct(const Point& x, const GeneralizedSection& s) const {
    return ddelta_jhat_direct(x, s) + deltad_jhat_direct(x, s);
  }

  // ---- closed forms ------------------------------------------------------

  /// (dJ)(X,Y) + (nabla_Y J*) a - (nabla_X J*) b
  GeneralizedSection d_jhat(MetallicJet& jet, const GeneralizedSection& a, const GeneralizedSection& b) const {
    return {jet.d(a.X, b.X), jet.nabla(b.X).transpose() * a.alpha - jet.nabla(a.X).transpose() * b.alpha};
  }

  /// (delta J + flat sum_i (nabla_{J~E_i} J) E_i) / 4
  GeneralizedSection delta_jhat(MetallicJet& jet, const Frame& f) const {
    Eigen::MatrixXd jt = tilde_at(jet.J(), s_.p, s_.q);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < f.size(); ++i) v += jet.nabla(jt * f[i]) * f[i];
    return 0.25 * GeneralizedSection{jet.codiff(), jet.local().flat(v)};
  }

  /// sum_i (nabla_{J~E_i} J) E_i as a frame-free field: (nabla_a J)^k_b J~^a_c g^{cb}.
  const VectorField& tilde_trace_field() const {
    if (!tilde_trace_) {
      const Tensor& nj = forms_->nabla();
      const ExprMatrix& gi = s_.host->inverse_metric();
      VectorField v(static_cast<std::size_t>(n_));
      for (int k = 0; k < n_; ++k) {
        std::vector<Expr> terms;
        for (int a = 0; a < n_; ++a)
          for (int b = 0; b < n_; ++b) {
            const Expr& c = nj.at({a, k, b});
            if (c.is_zero()) continue;
            for (int cc = 0; cc < n_; ++cc) {
              if (jt_(a, cc).is_zero() || gi(cc, b).is_zero()) continue;
              terms.push_back(c * jt_(a, cc) * gi(cc, b));
            }
          }
        v[static_cast<std::size_t>(k)] = add(terms);
      }
      tilde_trace_ = v;
    }
    return *tilde_trace_;
  }

  /// 4 (d delta J^)(X + a) = (d delta J)(X) + flat(nabla_X sum_i (nabla_{J~E_i} J) E_i)
  GeneralizedSection ddelta_jhat(MetallicJet& jet, const GeneralizedSection& s) const {
    LocalGeometry& at = jet.local();
    Eigen::VectorXd dv = at(geo_->nabla(constant_field(s.X), tilde_trace_field()));
    return 0.25 * GeneralizedSection{jet.d_codiff() * s.X, at.flat(dv)};
  }

  /// (nabla^2 J*) a, with nabla^2 built from the frame-field rough Laplacian.
  Eigen::VectorXd nabla2_jstar(const RoughLaplacian& rough, const Point& x, const Eigen::VectorXd& a) const {
    return rough.at(x).transpose() * a;
  }
  /// (Delta J*) a = flat((Delta J)(sharp a))
  Eigen::VectorXd laplace_jstar(MetallicJet& jet, const Eigen::VectorXd& a) const {
    LocalGeometry& at = jet.local();
    return at.flat(jet.laplacian() * at.sharp(a));
  }
  /// flat(sum_i (R(E_i, sharp a) J) E_i)
  Eigen::VectorXd curvature_jstar(MetallicJet& jet, const Frame& f, const Eigen::VectorXd& a) const {
    LocalGeometry& at = jet.local();
    return at.flat(weitzenbock_S(at, jet.J(), f, at.sharp(a)));
  }

  /// 4 (delta d J^)(X + a) = (delta d J)(X) + (nabla^2 J*)(a)
  ///   + flat(sum_i [-nabla_{J~E_i}((nabla_X J)E_i) + (nabla_X J)(nabla_{J~E_i}E_i) + (nabla_{nabla_{J~E_i}X} J)E_i])
  /// with the bracket evaluated on the symbolic frame field and X extended constantly.
  GeneralizedSection deltad_jhat(MetallicJet& jet, const RoughLaplacian& rough, const GeneralizedSection& s) const {
    LocalGeometry& at = jet.local();
    const Point& x = at.point();
    Eigen::VectorXd bracket = Eigen::VectorXd::Zero(n_);
    const std::vector<VectorField>& cols = deltad_bracket_basis(x);
    for (int k = 0; k < n_; ++k)
      if (s.X(k) != 0.0) bracket += s.X(k) * at(cols[static_cast<std::size_t>(k)]);
    return 0.25 * GeneralizedSection{jet.codiff_d() * s.X,
                                     nabla2_jstar(rough, x, s.alpha) + at.flat(bracket)};
  }

  /// Orthonormal frame F_i normal at x to first order: F_i(y) = F_i - Gamma(x)(y - x, F_i).
  std::vector<VectorField> normal_frame_field(LocalGeometry& at, const Frame& f) const {
    const NumTensor& gm = at.christoffel();
    const Point& x = at.point();
    std::vector<VectorField> out;
    for (int i = 0; i < f.size(); ++i) {
      VectorField fi;
      for (int k = 0; k < n_; ++k) {
        std::vector<Expr> terms{Expr(f[i](k))};
        for (int a = 0; a < n_; ++a)
          for (int l = 0; l < n_; ++l) {
            double c = gm.at({k, a, l}) * f[i](l);
            if (c == 0.0) continue;
            terms.push_back(Expr(-c) * (Expr::variable(s_.host->var(a)) - Expr(x.coords(a))));
          }
        fi.push_back(add(terms));
      }
      out.push_back(fi);
    }
    return out;
  }

  /// E_i := J~ F_i for a frame F normal at x, and nabla_X E_i at x.
  struct NormalTildeFrame {
    Frame e;                                       // E_i at x
    std::vector<std::vector<Eigen::VectorXd>> de;  // de[i][k] = nabla_{d_k} E_i at x
  };
  NormalTildeFrame normal_tilde_frame(LocalGeometry& at, const Frame& f) const {
    std::vector<VectorField> fs = normal_frame_field(at, f);
    NormalTildeFrame r;
    r.e.vectors = Eigen::MatrixXd(n_, n_);
    r.e.signs = f.signs;
    for (int i = 0; i < n_; ++i) {
      VectorField ei = metharm::apply(jt_, fs[static_cast<std::size_t>(i)]);
      r.e.vectors.col(i) = at(ei);
      std::vector<Eigen::VectorXd> d;
      for (int k = 0; k < n_; ++k) d.push_back(at(geo_->nabla(coordinate_field(n_, k), ei)));
      r.de.push_back(d);
    }
    return r;
  }

  /// sum_i [(R(X, J~E_i) J) E_i + (nabla_{J~E_i} J)(nabla_X E_i)] with E_i = J~ F_i, F normal at x.
  Eigen::VectorXd condition3(MetallicJet& jet, const NormalTildeFrame& nf, const Eigen::VectorXd& v) const {
    LocalGeometry& at = jet.local();
    Eigen::MatrixXd jt = tilde_at(jet.J(), s_.p, s_.q);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < n_; ++i) {
      Eigen::VectorXd ei = nf.e[i];
      Eigen::VectorXd dxe = Eigen::VectorXd::Zero(n_);
      for (int k = 0; k < n_; ++k) dxe += v(k) * nf.de[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      r += at.riemann_on_endo(v, jt * ei, jet.J(), ei) + jet.nabla(jt * ei) * dxe;
    }
    return r;
  }

  /// 4 (Delta J^)(X + a) = (Delta J)(X) - (Delta J*)(a)
  ///   + flat(sum_i [(R(X, J~E_i) J)E_i - (R(E_i, sharp a) J)E_i + (nabla_{J~E_i} J)(nabla_X E_i)])
  GeneralizedSection laplace_jhat(MetallicJet& jet, const Frame& f, const GeneralizedSection& s) const {
    LocalGeometry& at = jet.local();
    NormalTildeFrame nf = normal_tilde_frame(at, f);
    Eigen::VectorXd cov = -laplace_jstar(jet, s.alpha) - curvature_jstar(jet, nf.e, s.alpha) +
                          at.flat(condition3(jet, nf, s.X));
    return 0.25 * GeneralizedSection{jet.laplacian() * s.X, cov};
  }

  /// The same with + on the (R(E_i, sharp a) J)E_i term, matching Delta J* = -nabla^2 J* + flat S(sharp a).
  GeneralizedSection laplace_jhat_consistent(MetallicJet& jet, const Frame& f, const GeneralizedSection& s) const {
    GeneralizedSection r = laplace_jhat(jet, f, s);
    r.alpha += 0.5 * curvature_jstar(jet, f, s.alpha);
    return r;
  }

 private:
  const std::vector<GeneralizedField>& ddelta_basis(const Point& reference) const {
    if (!ddelta_cols_) {
      const GeneralizedField& dj = delta_jhat_field(reference);
      std::vector<GeneralizedField> cols;
      for (int k = 0; k < 2 * n_; ++k) {
        GeneralizedField e = GeneralizedField::constant(GeneralizedSection::from_stacked(Eigen::VectorXd::Unit(2 * n_, k)));
        cols.push_back(nabla_hat(e, dj));
      }
      ddelta_cols_ = cols;
    }
    return *ddelta_cols_;
  }

  const std::vector<GeneralizedField>& deltad_basis(const Point& reference) const {
    if (!deltad_cols_) {
      const std::vector<GeneralizedField>& xs = xi_fields(reference);
      std::vector<GeneralizedField> cols;
      for (int k = 0; k < 2 * n_; ++k) {
        GeneralizedField e = GeneralizedField::constant(GeneralizedSection::from_stacked(Eigen::VectorXd::Unit(2 * n_, k)));
        GeneralizedField acc{zero_field(n_), zero_field(n_)};
        for (const GeneralizedField& xi : xs) {
          // (nabla^_xi dJ^)(xi, e) = nabla^_xi(dJ^(xi, e)) - dJ^(nabla^_xi xi, e) - dJ^(xi, nabla^_xi e)
          GeneralizedField term = nabla_hat(xi, d_j_hat_field(xi, e)) - d_j_hat_field(nabla_hat(xi, xi), e) -
                                  d_j_hat_field(xi, nabla_hat(xi, e));
          acc = acc - term;
        }
        cols.push_back(acc);
      }
      deltad_cols_ = cols;
    }
    return *deltad_cols_;
  }

  const std::vector<VectorField>& deltad_bracket_basis(const Point& reference) const {
    if (!bracket_cols_) {
      FrameField f = orthonormal_frame_field(*s_.host, reference, seed_);
      std::vector<VectorField> cols;
      for (int k = 0; k < n_; ++k) {
        VectorField xk = coordinate_field(n_, k);
        ExprMatrix nxj = geo_->nabla_endo(xk, s_.J);
        VectorField acc = zero_field(n_);
        for (const VectorField& e : f.vectors) {
          VectorField a = metharm::apply(jt_, e);
          acc = acc - geo_->nabla(a, metharm::apply(nxj, e)) + metharm::apply(nxj, geo_->nabla(a, e)) +
                metharm::apply(geo_->nabla_endo(geo_->nabla(a, xk), s_.J), e);
        }
        cols.push_back(acc);
      }
      bracket_cols_ = cols;
    }
    return *bracket_cols_;
  }

  MetallicStructure s_;
  GeometryPtr geo_;
  EndoFormsPtr forms_;
  std::optional<std::uint64_t> seed_;
  ExprMatrix jt_;
  int n_ = 0;
  mutable std::optional<std::vector<GeneralizedField>> xi_;
  mutable std::optional<GeneralizedField> delta_;
  mutable std::optional<VectorField> tilde_trace_;
  mutable std::optional<std::vector<GeneralizedField>> ddelta_cols_, deltad_cols_;
  mutable std::optional<std::vector<VectorField>> bracket_cols_;
};

struct HarmonicityConditions {
  double laplacian = 0.0;   // |Delta J|
  double curvature = 0.0;   // |sum_i (R(E_i, X) J) E_i|
  double condition3 = 0.0;  // |sum_i [(R(X, J~E_i) J) E_i + (nabla_{J~E_i} J)(nabla_X E_i)]|
};

inline HarmonicityConditions jhat_harmonicity_conditions(const GeneralizedGeometry& gg, MetallicJet& jet,
                                                         const Frame& f, const Eigen::VectorXd& v) {
  LocalGeometry& at = jet.local();
  gg.require_riemannian(at.point());
  HarmonicityConditions c;
  c.laplacian = jet.laplacian().norm();
  c.curvature = weitzenbock_S(at, jet.J(), f, v).norm();
  c.condition3 = gg.condition3(jet, gg.normal_tilde_frame(at, f), v).norm();
  return c;
}

}  // namespace metharm
