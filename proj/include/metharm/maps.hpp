#pragma once

// Smooth maps between charted manifolds and the identities relating the
// tension field of a map to the codifferentials of metallic structures on
// either side, including the lift to generalized tangent bundles
//
//   Phi^(X + a) = Phi_* X + (Phi^*)^{-1} a.
//
// Target objects are composed with Phi symbolically, so sections along Phi
// are expressions in the source coordinates. The pullback connection is
//   nabla^Phi_A W = A(W) + Gammabar o Phi (Phi_* A, W).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "metharm/connection.hpp"
#include "metharm/errors.hpp"
#include "metharm/genbundle.hpp"
#include "metharm/hodge.hpp"
#include "metharm/metallic.hpp"

namespace metharm {

inline constexpr double kSingularJacobian = 1e-12;

struct SmoothMap {
  std::string name;
  ManifoldPtr source;
  ManifoldPtr target;
  std::vector<Expr> components;  // Phi^gamma in source coordinates
};

/// A map together with the Levi-Civita data of both sides.
class MapGeometry {
 public:
  MapGeometry(SmoothMap phi, GeometryPtr source, GeometryPtr target)
      : phi_(std::move(phi)), src_(std::move(source)), tgt_(std::move(target)) {
    n_ = phi_.source->dim();
    m_ = phi_.target->dim();
    if (static_cast<int>(phi_.components.size()) != m_)
      throw PreconditionError("map '" + phi_.name + "' has " + std::to_string(phi_.components.size()) +
                              " components for a target of dimension " + std::to_string(m_));
    for (int g = 0; g < m_; ++g) by_[phi_.target->var(g)] = phi_.components[static_cast<std::size_t>(g)];
    jacobian_.assign(static_cast<std::size_t>(m_ * n_), Expr(0.0));
    for (int g = 0; g < m_; ++g)
      for (int i = 0; i < n_; ++i)
        jacobian_[static_cast<std::size_t>(g * n_ + i)] = diff(phi_.components[static_cast<std::size_t>(g)], phi_.source->var(i));
    gamma_bar_ = Tensor(m_, "udd");
    for (std::size_t k = 0; k < gamma_bar_.data().size(); ++k)
      gamma_bar_.data()[k] = compose(tgt_->christoffel().data()[k]);
  }

  const SmoothMap& map() const { return phi_; }
  const GeometryCache& source() const { return *src_; }
  const GeometryCache& target() const { return *tgt_; }
  const GeometryPtr& source_ptr() const { return src_; }
  const GeometryPtr& target_ptr() const { return tgt_; }
  int source_dim() const { return n_; }
  int target_dim() const { return m_; }

  /// Target expression composed with Phi.
  Expr compose(const Expr& e) const { return substitute(e, by_); }
  std::vector<Expr> compose(const std::vector<Expr>& v) const {
    std::vector<Expr> r;
    for (const Expr& e : v) r.push_back(compose(e));
    return r;
  }
  ExprMatrix compose(const ExprMatrix& m) const {
    ExprMatrix r(m.size());
    for (int i = 0; i < m.size(); ++i)
      for (int j = 0; j < m.size(); ++j) r(i, j) = compose(m(i, j));
    return r;
  }

  const Expr& jacobian(int g, int i) const { return jacobian_[static_cast<std::size_t>(g * n_ + i)]; }

  Point image(const Point& x) const {
    Evaluator ev(phi_.source->binding(x));
    return {evaluate(ev, phi_.components)};
  }
  bool image_in_box(const Point& x) const { return phi_.target->contains(image(x)); }

  /// Source samples whose image lies in the target box; `rejected` counts the others.
  std::vector<Point> admissible(const std::vector<Point>& pts, int* rejected = nullptr) const {
    std::vector<Point> out;
    int bad = 0;
    for (const Point& x : pts) {
      if (image_in_box(x))
        out.push_back(x);
      else
        ++bad;
    }
    if (rejected) *rejected = bad;
    return out;
  }

  Eigen::MatrixXd jacobian_at(const Point& x) const {
    Evaluator ev(phi_.source->binding(x));
    Eigen::MatrixXd d(m_, n_);
    for (int g = 0; g < m_; ++g)
      for (int i = 0; i < n_; ++i) d(g, i) = ev(jacobian(g, i));
    return d;
  }

  Eigen::VectorXd pushforward(const Point& x, const Eigen::VectorXd& v) const { return jacobian_at(x) * v; }

  /// (Phi^*)^{-1} a at x.
  Eigen::VectorXd inverse_pullback(const Point& x, const Eigen::VectorXd& a) const {
    Eigen::MatrixXd d = jacobian_at(x);
    if (d.rows() != d.cols() || std::abs(d.determinant()) < kSingularJacobian)
      throw SingularJacobianError("map '" + phi_.name + "' has a singular Jacobian at the sample point");
    return d.transpose().partialPivLu().solve(a);
  }

  // ---- sections along Phi --------------------------------------------------

  std::vector<Expr> push(const VectorField& a) const {
    std::vector<Expr> r;
    for (int g = 0; g < m_; ++g) {
      std::vector<Expr> terms;
      for (int i = 0; i < n_; ++i)
        if (!jacobian(g, i).is_zero() && !a[static_cast<std::size_t>(i)].is_zero())
          terms.push_back(jacobian(g, i) * a[static_cast<std::size_t>(i)]);
      r.push_back(add(terms));
    }
    return r;
  }

  /// Symbolic (Phi^*)^{-1} on covector fields; requires equal dimensions.
  CovectorField inverse_pullback(const CovectorField& a) const {
    if (!inv_t_) {
      if (n_ != m_) throw SingularJacobianError("map '" + phi_.name + "' is not between equal dimensions");
      ExprMatrix jt(n_);
      for (int g = 0; g < m_; ++g)
        for (int i = 0; i < n_; ++i) jt(i, g) = jacobian(g, i);
      inv_t_ = inverse(jt);
    }
    return metharm::apply(*inv_t_, a);
  }

  /// nabla^Phi_A W for W along Phi.
  std::vector<Expr> pull_nabla(const VectorField& a, const std::vector<Expr>& w) const {
    std::vector<Expr> pa = push(a);
    std::vector<Expr> r;
    for (int g = 0; g < m_; ++g) {
      std::vector<Expr> terms{src_->derivative(a, w[static_cast<std::size_t>(g)])};
      for (int al = 0; al < m_; ++al) {
        if (pa[static_cast<std::size_t>(al)].is_zero()) continue;
        for (int be = 0; be < m_; ++be) {
          const Expr& c = gamma_bar_.at({g, al, be});
          if (c.is_zero() || w[static_cast<std::size_t>(be)].is_zero()) continue;
          terms.push_back(c * pa[static_cast<std::size_t>(al)] * w[static_cast<std::size_t>(be)]);
        }
      }
      r.push_back(add(terms));
    }
    return r;
  }

  /// nabla^Phi_A theta for a covector theta along Phi.
  std::vector<Expr> pull_nabla_covector(const VectorField& a, const std::vector<Expr>& th) const {
    std::vector<Expr> pa = push(a);
    std::vector<Expr> r;
    for (int g = 0; g < m_; ++g) {
      std::vector<Expr> terms{src_->derivative(a, th[static_cast<std::size_t>(g)])};
      for (int al = 0; al < m_; ++al) {
        if (pa[static_cast<std::size_t>(al)].is_zero()) continue;
        for (int be = 0; be < m_; ++be) {
          const Expr& c = gamma_bar_.at({be, al, g});
          if (c.is_zero() || th[static_cast<std::size_t>(be)].is_zero()) continue;
          terms.push_back(-(c * pa[static_cast<std::size_t>(al)] * th[static_cast<std::size_t>(be)]));
        }
      }
      r.push_back(add(terms));
    }
    return r;
  }

  /// sum_i eps_i [nabla^Phi_{L E_i} Phi_*(M E_i) - Phi_*(nabla_{L E_i} M E_i)] over the symbolic frame.
  std::vector<Expr> frame_sum(const ExprMatrix& l, const ExprMatrix& mm, const Point& reference,
                              std::optional<std::uint64_t> seed = std::nullopt) const {
    FrameField f = orthonormal_frame_field(*phi_.source, reference, seed);
    std::vector<Expr> acc(static_cast<std::size_t>(m_), Expr(0.0));
    for (int i = 0; i < f.size(); ++i) {
      const VectorField& e = f.vectors[static_cast<std::size_t>(i)];
      VectorField le = metharm::apply(l, e), me = metharm::apply(mm, e);
      std::vector<Expr> term = pull_nabla(le, push(me));
      std::vector<Expr> corr = push(src_->nabla(le, me));
      double s = f.signs[static_cast<std::size_t>(i)];
      for (int g = 0; g < m_; ++g)
        acc[static_cast<std::size_t>(g)] =
            acc[static_cast<std::size_t>(g)] + Expr(s) * (term[static_cast<std::size_t>(g)] - corr[static_cast<std::size_t>(g)]);
    }
    return acc;
  }

  // ---- tension ---------------------------------------------------------------

  /// g^{ij}(d_i d_j Phi - Gamma^k_ij d_k Phi + Gammabar(d_i Phi, d_j Phi))
  const std::vector<Expr>& tension_field() const {
    if (!tension_) {
      const ExprMatrix& gi = phi_.source->inverse_metric();
      std::vector<Expr> t;
      for (int g = 0; g < m_; ++g) {
        std::vector<Expr> terms;
        for (int i = 0; i < n_; ++i)
          for (int j = 0; j < n_; ++j) {
            if (gi(i, j).is_zero()) continue;
            std::vector<Expr> h{diff(jacobian(g, j), phi_.source->var(i))};
            for (int k = 0; k < n_; ++k)
              if (!src_->gamma(k, i, j).is_zero()) h.push_back(-(src_->gamma(k, i, j) * jacobian(g, k)));
            for (int a = 0; a < m_; ++a)
              for (int b = 0; b < m_; ++b) {
                const Expr& c = gamma_bar_.at({g, a, b});
                if (!c.is_zero()) h.push_back(c * jacobian(a, i) * jacobian(b, j));
              }
            terms.push_back(gi(i, j) * add(h));
          }
        t.push_back(add(terms));
      }
      tension_ = t;
    }
    return *tension_;
  }

  Eigen::VectorXd tension(const Point& x) const {
    Evaluator ev(phi_.source->binding(x));
    return evaluate(ev, tension_field());
  }
  Eigen::VectorXd tension_frame(const Point& x, std::optional<std::uint64_t> seed = std::nullopt) const {
    Evaluator ev(phi_.source->binding(x));
    ExprMatrix id = ExprMatrix::identity(n_);
    return evaluate(ev, frame_sum(id, id, x, seed));
  }

  // ---- target data at the image --------------------------------------------

  Eigen::MatrixXd target_metric(const Point& x) const { return metric_at(*phi_.target, image(x)); }

 private:
  SmoothMap phi_;
  GeometryPtr src_, tgt_;
  int n_ = 0, m_ = 0;
  std::unordered_map<int, Expr> by_;
  std::vector<Expr> jacobian_;
  Tensor gamma_bar_;
  mutable std::optional<ExprMatrix> inv_t_;
  mutable std::optional<std::vector<Expr>> tension_;
};

struct MapCheck {
  double residual = 0.0;
  int samples = 0;
  bool passed(double tol) const { return residual <= tol; }
};

/// max |gbar(Phi_* X, Phi_* Y) - g(X, Y)| over coordinate vectors.
inline double isometry_residual(const MapGeometry& mg, const Point& x) {
  Eigen::MatrixXd d = mg.jacobian_at(x);
  Eigen::MatrixXd r = d.transpose() * mg.target_metric(x) * d - metric_at(*mg.map().source, x);
  return r.cwiseAbs().maxCoeff();
}

inline MapCheck check_isometry(const MapGeometry& mg, const std::vector<Point>& pts) {
  MapCheck c;
  for (const Point& x : pts) {
    c.residual = std::max(c.residual, isometry_residual(mg, x));
    ++c.samples;
  }
  return c;
}

struct HarmonicityVerdict {
  double max_tension = 0.0;
  int samples = 0;
  bool harmonic = false;
};

inline HarmonicityVerdict harmonicity(const MapGeometry& mg, const std::vector<Point>& pts, double tol) {
  HarmonicityVerdict v;
  for (const Point& x : pts) {
    v.max_tension = std::max(v.max_tension, mg.tension(x).cwiseAbs().maxCoeff());
    ++v.samples;
  }
  v.harmonic = v.max_tension <= tol;
  return v;
}

/// A map between metallic manifolds.
class MetallicMap {
 public:
  MetallicMap(MapGeometry mg, MetallicStructure s, MetallicStructure t)
      : mg_(std::move(mg)), s_(std::move(s)), t_(std::move(t)) {
    forms_ = std::make_shared<EndoForms>(mg_.source_ptr(), s_.J);
    forms_bar_ = std::make_shared<EndoForms>(mg_.target_ptr(), t_.J);
  }

  const MapGeometry& geometry() const { return mg_; }
  const MetallicStructure& source() const { return s_; }
  const MetallicStructure& target() const { return t_; }
  const EndoForms& source_forms() const { return *forms_; }
  const EndoForms& target_forms() const { return *forms_bar_; }
  const EndoFormsPtr& source_forms_ptr() const { return forms_; }

  Eigen::MatrixXd J(const Point& x) const { return evaluate_at(x, s_.J); }
  Eigen::MatrixXd Jbar(const Point& x) const { return metharm::evaluate(*target_eval(x), t_.J); }

  /// max |Phi_* J - Jbar Phi_*|
  double metallic_map_residual(const Point& x) const {
    Eigen::MatrixXd d = mg_.jacobian_at(x);
    return (d * J(x) - Jbar(x) * d).cwiseAbs().maxCoeff();
  }
  MapCheck check_metallic_map(const std::vector<Point>& pts) const {
    MapCheck c;
    for (const Point& x : pts) {
      c.residual = std::max(c.residual, metallic_map_residual(x));
      ++c.samples;
    }
    return c;
  }

  /// Raises unless Phi is an isometry (and a metallic map, if asked) at x within 1e-8.
  void require_isometry(const Point& x, bool metallic) const {
    double r = isometry_residual(mg_, x);
    if (r > 1e-8)
      throw PreconditionError("map '" + mg_.map().name + "' is not an isometry at the anchor (residual " +
                              std::to_string(r) + ")");
    if (metallic) {
      double m = metallic_map_residual(x);
      if (m > 1e-8)
        throw PreconditionError("map '" + mg_.map().name + "' is not a metallic map at the anchor (residual " +
                                std::to_string(m) + ")");
    }
    if (!signature(*s_.host, x).riemannian() || !signature(*t_.host, mg_.image(x)).riemannian())
      throw SignatureError("requires Riemannian metrics on source and target");
  }

  Eigen::VectorXd codiff_source(const Point& x) const { return evaluate_at(x, forms_->codiff()); }
  Eigen::VectorXd codiff_target(const Point& x) const {
    return metharm::evaluate(*target_eval(x), forms_bar_->codiff());
  }

  /// sum_i [nabla^Phi_{E_i} Phi_*(J E_i) - Phi_*(nabla_{E_i} J E_i)]
  Eigen::VectorXd sum_push_j(const Point& x) const {
    return evaluate_at(x, mg_.frame_sum(ExprMatrix::identity(s_.J.size()), s_.J, x));
  }
  /// sum_i [nabla^Phi_{J E_i} Phi_* E_i - Phi_*(nabla_{J E_i} E_i)]
  Eigen::VectorXd sum_j_direction(const Point& x) const {
    return evaluate_at(x, mg_.frame_sum(s_.J, ExprMatrix::identity(s_.J.size()), x));
  }

  struct IsometryIdentity {
    Eigen::VectorXd lhs, rhs;
    double residual() const { return (lhs - rhs).norm(); }
  };
  /// Jbar(tau) + Phi_*(delta J) - delta Jbar against the J-twisted frame sum.
  IsometryIdentity isometry_identity(const Point& x) const {
    require_isometry(x, true);
    IsometryIdentity r;
    r.lhs = Jbar(x) * mg_.tension(x) + mg_.pushforward(x, codiff_source(x)) - codiff_target(x);
    r.rhs = sum_push_j(x);
    return r;
  }
  double isometry_identity_residual(const Point& x) const { return isometry_identity(x).residual(); }

  struct TransferProbe {
    double hypothesis = 0.0;  // min over frames of max_i |Phi_*((nabla_{E_i} J)E_i) - (nablabar_{Phi_* E_i} Jbar)(Phi_* E_i)|
    double conclusion = 0.0;  // |delta Jbar - Phi_*(delta J)|
    bool hypothesis_met = false;
    bool conclusion_holds = false;
  };
  TransferProbe corollary_transfer(const Point& x, double tol, const std::vector<std::uint64_t>& seeds = {0, 1, 2}) const {
    require_isometry(x, true);
    TransferProbe p;
    LocalGeometry at(mg_.source(), x);
    NumTensor nj = at(forms_->nabla());
    NumTensor njbar = metharm::evaluate(*target_eval(x), forms_bar_->nabla());
    Eigen::MatrixXd d = mg_.jacobian_at(x);
    p.hypothesis = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed : seeds) {
      Frame f = orthonormal_frame(at.g(), seed == 0 ? std::nullopt : std::optional<std::uint64_t>(seed));
      double worst = 0.0;
      for (int i = 0; i < f.size(); ++i) {
        Eigen::VectorXd pe = d * f[i];
        worst = std::max(worst, (d * (directional(nj, f[i]) * f[i]) - directional(njbar, pe) * pe).norm());
      }
      p.hypothesis = std::min(p.hypothesis, worst);
    }
    p.conclusion = (codiff_target(x) - mg_.pushforward(x, codiff_source(x))).norm();
    p.hypothesis_met = p.hypothesis <= tol;
    p.conclusion_holds = p.conclusion <= 10.0 * tol;
    return p;
  }

  // ---- generalized lift ------------------------------------------------------

  GeneralizedSection lift(const Point& x, const GeneralizedSection& s) const {
    return {mg_.pushforward(x, s.X), mg_.inverse_pullback(x, s.alpha)};
  }

  /// max |Jbar^(Phi^ s) - Phi^(J^ s)|
  double lift_commutation_residual(const Point& x, const GeneralizedSection& s) const {
    LocalGeometry at(mg_.source(), x);
    Eigen::MatrixXd g = at.g();
    Eigen::MatrixXd gbar = mg_.target_metric(x);
    auto jhat = [](const Eigen::MatrixXd& j, const Eigen::MatrixXd& gm, double p, const GeneralizedSection& u) {
      return GeneralizedSection{j * u.X, gm * u.X - j.transpose() * u.alpha + p * u.alpha};
    };
    GeneralizedSection a = jhat(Jbar(x), gbar, t_.p, lift(x, s));
    GeneralizedSection b = lift(x, jhat(J(x), g, s_.p, s));
    return (a - b).max_abs();
  }

  /// tau(Phi^) from the xi-frame sum, as a section along Phi.
  GeneralizedSection tension_hat(const Point& x) const {
    const GeneralizedGeometry& gg = generalized();
    std::vector<GeneralizedField> xs = gg.xi_fields(x);
    int m = mg_.target_dim();
    std::vector<Expr> v(static_cast<std::size_t>(m), Expr(0.0)), c(static_cast<std::size_t>(m), Expr(0.0));
    for (const GeneralizedField& xi : xs) {
      std::vector<Expr> px = mg_.push(xi.X), pa = mg_.inverse_pullback(xi.alpha);
      std::vector<Expr> tv = mg_.pull_nabla(xi.X, px);
      std::vector<Expr> tc = mg_.pull_nabla_covector(xi.X, pa);
      std::vector<Expr> cv = mg_.push(mg_.source().nabla(xi.X, xi.X));
      std::vector<Expr> cc = mg_.inverse_pullback(mg_.source().nabla_covector(xi.X, xi.alpha));
      for (int g = 0; g < m; ++g) {
        auto k = static_cast<std::size_t>(g);
        v[k] = v[k] + tv[k] - cv[k];
        c[k] = c[k] + tc[k] - cc[k];
      }
    }
    return {evaluate_at(x, v), evaluate_at(x, c)};
  }

  struct TensionHat {
    GeneralizedSection direct;
    GeneralizedSection decomposition;
    double vector_residual() const { return (direct.X - decomposition.X).norm(); }
    double covector_residual() const { return (direct.alpha - decomposition.alpha).norm(); }
    double residual() const { return std::max(vector_residual(), covector_residual()); }
  };

  /// tau(Phi^) = tau/4 + (p/(4s)) flat tau - (1/(2s)) flat sum_i [nabla^Phi_{J E_i} Phi_* E_i - Phi_*(nabla_{J E_i} E_i)]
  TensionHat tension_hat_decomposition(const Point& x) const {
    require_isometry(x, false);
    generalized().require_riemannian(x);
    double sq = std::sqrt(s_.discriminant());
    Eigen::MatrixXd gbar = mg_.target_metric(x);
    Eigen::VectorXd tau = mg_.tension(x);
    TensionHat t;
    t.direct = tension_hat(x);
    t.decomposition = {0.25 * tau, gbar * (s_.p / (4.0 * sq) * tau - 1.0 / (2.0 * sq) * sum_j_direction(x))};
    return t;
  }

  struct HatHarmonicity {
    double tension_hat = 0.0;
    double tension = 0.0;
    double twisted_sum = 0.0;
    bool consistent(double tol) const { return (tension_hat <= tol) == (tension <= tol && twisted_sum <= tol); }
  };
  HatHarmonicity hat_harmonicity(const Point& x) const {
    HatHarmonicity h;
    h.tension_hat = tension_hat(x).max_abs();
    h.tension = mg_.tension(x).cwiseAbs().maxCoeff();
    h.twisted_sum = sum_j_direction(x).cwiseAbs().maxCoeff();
    return h;
  }

  struct JHatTension {
    GeneralizedSection lhs, rhs;
    double vector_residual() const { return (lhs.X - rhs.X).norm(); }
    double covector_residual() const { return (lhs.alpha - rhs.alpha).norm(); }
    double residual() const { return std::max(vector_residual(), covector_residual()); }
  };

  /// Jbar^(tau(Phi^)) against the display assembled from delta J, delta Jbar,
  /// tau and the two twisted frame sums.
  JHatTension jhat_tension_identity(const Point& x) const {
    require_isometry(x, true);
    generalized().require_riemannian(x);
    if (std::abs(s_.p - t_.p) > kDiscriminantZero || std::abs(s_.q - t_.q) > kDiscriminantZero)
      throw PreconditionError("requires nontrivial metallic structures with equal parameters");
    double p = s_.p, sq = std::sqrt(s_.discriminant());
    Eigen::MatrixXd gbar = mg_.target_metric(x), jbar = Jbar(x);
    GeneralizedSection th = tension_hat(x);
    JHatTension r;
    r.lhs = {jbar * th.X, gbar * th.X - jbar.transpose() * th.alpha + t_.p * th.alpha};

    Eigen::VectorXd tau = mg_.tension(x);
    Eigen::VectorXd diff = mg_.pushforward(x, codiff_source(x)) - codiff_target(x);
    Eigen::VectorXd a = sum_push_j(x), k = sum_j_direction(x);
    r.rhs.X = -0.25 * diff + 0.25 * a;
    r.rhs.alpha = gbar * ((p * p + sq) / (4.0 * sq) * tau + p / (4.0 * sq) * diff - p / (4.0 * sq) * a -
                          p / (2.0 * sq) * k + 1.0 / (2.0 * sq) * (jbar * k));
    return r;
  }
  double jhat_tension_identity_residual(const Point& x) const { return jhat_tension_identity(x).residual(); }

  const GeneralizedGeometry& generalized() const {
    if (!gg_) gg_.emplace(s_, mg_.source_ptr(), forms_);
    return *gg_;
  }

 private:
  Eigen::VectorXd evaluate_at(const Point& x, const std::vector<Expr>& v) const {
    Evaluator ev(s_.host->binding(x));
    return metharm::evaluate(ev, v);
  }
  Eigen::MatrixXd evaluate_at(const Point& x, const ExprMatrix& m) const {
    Evaluator ev(s_.host->binding(x));
    return metharm::evaluate(ev, m);
  }
  std::unique_ptr<Evaluator> target_eval(const Point& x) const {
    return std::make_unique<Evaluator>(t_.host->binding(mg_.image(x)));
  }

  MapGeometry mg_;
  MetallicStructure s_, t_;
  EndoFormsPtr forms_, forms_bar_;
  mutable std::optional<GeneralizedGeometry> gg_;
};

}  // namespace metharm
