#pragma once

// Levi-Civita connection and curvature of a charted metric.
//
// Conventions:
//   Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
//   R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y],   R(d_i, d_j) d_k = R^l_ijk d_l
//   R(X,Y,Z,W) = g(R(X,Y)Z, W)
//   Ric(Y,Z) = trace(X -> R(X,Y)Z) = R^i_ijk,   g(QX, Y) = Ric(X, Y),   scal = trace Q
// With these the round unit sphere has Ric = g and R(X,Y,Y,X) = 1 for an
// orthonormal pair.

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "metharm/expr.hpp"
#include "metharm/fields.hpp"
#include "metharm/manifold.hpp"
#include "metharm/tensor.hpp"

namespace metharm {

class GeometryCache {
 public:
  explicit GeometryCache(ManifoldPtr m) : m_(std::move(m)) {
    int n = m_->dim();
    const ExprMatrix& g = m_->metric();
    const ExprMatrix& gi = m_->inverse_metric();
    // first derivatives of the metric, dg[l][i][j] = d_l g_ij
    std::vector<Expr> dg(static_cast<std::size_t>(n * n * n));
    auto dgi = [&](int l, int i, int j) -> Expr& { return dg[static_cast<std::size_t>((l * n + i) * n + j)]; };
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dgi(l, i, j) = diff(g(i, j), m_->var(l));

    gamma_ = Tensor(n, "udd");
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (j < i) {
            gamma_.at({k, i, j}) = gamma_.at({k, j, i});
            continue;
          }
          std::vector<Expr> terms;
          for (int l = 0; l < n; ++l) {
            if (gi(k, l).is_zero()) continue;
            terms.push_back(gi(k, l) * (dgi(i, j, l) + dgi(j, i, l) - dgi(l, i, j)));
          }
          gamma_.at({k, i, j}) = Expr(0.5) * add(terms);
        }

    riemann_ = Tensor(n, "uddd");
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            if (j < i) {
              riemann_.at({l, i, j, k}) = -riemann_.at({l, j, i, k});
              continue;
            }
            if (i == j) continue;
            std::vector<Expr> terms{diff(gamma(l, j, k), m_->var(i)), -diff(gamma(l, i, k), m_->var(j))};
            for (int s = 0; s < n; ++s) {
              terms.push_back(gamma(l, i, s) * gamma(s, j, k));
              terms.push_back(-(gamma(l, j, s) * gamma(s, i, k)));
            }
            riemann_.at({l, i, j, k}) = add(terms);
          }

    ricci_ = ExprMatrix(n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        std::vector<Expr> terms;
        for (int i = 0; i < n; ++i) terms.push_back(riemann_.at({i, i, j, k}));
        ricci_(j, k) = add(terms);
      }
    ricci_operator_ = gi * ricci_;
    std::vector<Expr> tr;
    for (int i = 0; i < n; ++i) tr.push_back(ricci_operator_(i, i));
    scal_ = add(tr);
  }

  const ChartedManifold& manifold() const { return *m_; }
  const ManifoldPtr& manifold_ptr() const { return m_; }
  int dim() const { return m_->dim(); }

  const Expr& gamma(int k, int i, int j) const { return gamma_.at({k, i, j}); }
  const Tensor& christoffel() const { return gamma_; }
  const Tensor& riemann() const { return riemann_; }
  const ExprMatrix& ricci() const { return ricci_; }
  /// Q^i_k with g(QX, Y) = Ric(X, Y).
  const ExprMatrix& ricci_operator() const { return ricci_operator_; }
  const Expr& scalar_curvature() const { return scal_; }

  /// Directional derivative X(f).
  Expr derivative(const VectorField& x, const Expr& f) const {
    std::vector<Expr> terms;
    for (int i = 0; i < dim(); ++i) {
      if (x[static_cast<std::size_t>(i)].is_zero()) continue;
      terms.push_back(x[static_cast<std::size_t>(i)] * diff(f, m_->var(i)));
    }
    return add(terms);
  }

  /// nabla_X Y.
  VectorField nabla(const VectorField& x, const VectorField& y) const {
    int n = dim();
    VectorField r(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      std::vector<Expr> terms{derivative(x, y[static_cast<std::size_t>(k)])};
      for (int i = 0; i < n; ++i) {
        if (x[static_cast<std::size_t>(i)].is_zero()) continue;
        for (int j = 0; j < n; ++j)
          terms.push_back(gamma(k, i, j) * x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)]);
      }
      r[static_cast<std::size_t>(k)] = add(terms);
    }
    return r;
  }

  /// nabla_X alpha.
  CovectorField nabla_covector(const VectorField& x, const CovectorField& a) const {
    int n = dim();
    CovectorField r(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      std::vector<Expr> terms{derivative(x, a[static_cast<std::size_t>(j)])};
      for (int i = 0; i < n; ++i) {
        if (x[static_cast<std::size_t>(i)].is_zero()) continue;
        for (int k = 0; k < n; ++k)
          terms.push_back(-(gamma(k, i, j) * x[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(k)]));
      }
      r[static_cast<std::size_t>(j)] = add(terms);
    }
    return r;
  }

  /// (nabla_X T) for a (1,1)-tensor: (nabla_X T)Y = nabla_X(TY) - T(nabla_X Y).
  ExprMatrix nabla_endo(const VectorField& x, const ExprMatrix& t) const {
    int n = dim();
    ExprMatrix r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        std::vector<Expr> terms{derivative(x, t(i, j))};
        for (int k = 0; k < n; ++k) {
          if (x[static_cast<std::size_t>(k)].is_zero()) continue;
          for (int l = 0; l < n; ++l) {
            terms.push_back(x[static_cast<std::size_t>(k)] * gamma(i, k, l) * t(l, j));
            terms.push_back(-(x[static_cast<std::size_t>(k)] * gamma(l, k, j) * t(i, l)));
          }
        }
        r(i, j) = add(terms);
      }
    return r;
  }

  /// (nabla_X T*) alpha = nabla_X(T* alpha) - T*(nabla_X alpha).
  CovectorField nabla_dual(const VectorField& x, const ExprMatrix& t, const CovectorField& a) const {
    CovectorField lhs = nabla_covector(x, apply_dual(t, a));
    CovectorField rhs = apply_dual(t, nabla_covector(x, a));
    CovectorField r(lhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i) r[i] = lhs[i] - rhs[i];
    return r;
  }

  /// [X, Y].
  VectorField bracket(const VectorField& x, const VectorField& y) const {
    int n = dim();
    VectorField r(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
      r[static_cast<std::size_t>(k)] = derivative(x, y[static_cast<std::size_t>(k)]) - derivative(y, x[static_cast<std::size_t>(k)]);
    return r;
  }

  /// R(X, Y) Z from the curvature components.
  VectorField curvature(const VectorField& x, const VectorField& y, const VectorField& z) const {
    int n = dim();
    VectorField r(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
      std::vector<Expr> terms;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            const Expr& c = riemann_.at({l, i, j, k});
            if (c.is_zero()) continue;
            terms.push_back(c * x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * z[static_cast<std::size_t>(k)]);
          }
      r[static_cast<std::size_t>(l)] = add(terms);
    }
    return r;
  }

  /// Covariant derivative of a mixed tensor; the new lower slot is placed
  /// first, so (nabla T)_{a ...} = (nabla_{d_a} T)_{...}.
  Tensor covariant_derivative(const Tensor& t) const {
    int n = dim();
    Tensor r(n, "d" + t.variance());
    std::size_t count = t.data().size();
    for (int a = 0; a < n; ++a)
      for (std::size_t flat = 0; flat < count; ++flat) {
        std::vector<int> idx = t.index_of(flat);
        std::vector<Expr> terms{diff(t.data()[flat], m_->var(a))};
        for (int s = 0; s < t.rank(); ++s) {
          int orig = idx[static_cast<std::size_t>(s)];
          for (int c = 0; c < n; ++c) {
            idx[static_cast<std::size_t>(s)] = c;
            const Expr& tc = t.at(idx);
            if (tc.is_zero()) continue;
            if (t.variance()[static_cast<std::size_t>(s)] == 'u')
              terms.push_back(gamma(orig, a, c) * tc);
            else
              terms.push_back(-(gamma(c, a, orig) * tc));
          }
          idx[static_cast<std::size_t>(s)] = orig;
        }
        r.data()[static_cast<std::size_t>(a) * count + flat] = add(terms);
      }
    return r;
  }

 private:
  ManifoldPtr m_;
  Tensor gamma_;
  Tensor riemann_;
  ExprMatrix ricci_;
  ExprMatrix ricci_operator_;
  Expr scal_;
};

using GeometryPtr = std::shared_ptr<const GeometryCache>;

/// Numeric geometry at one point, sharing one evaluator across all queries.
class LocalGeometry {
 public:
  LocalGeometry(const GeometryCache& geo, const Point& x) : geo_(&geo), x_(x), ev_(geo.manifold().binding(x)) {
    g_ = evaluate(ev_, geo.manifold().metric());
    double det = g_.determinant();
    if (std::abs(det) <= kDegenerateDet) throw DegenerateMetricError(det);
    ginv_ = g_.inverse();
  }

  const GeometryCache& cache() const { return *geo_; }
  const Point& point() const { return x_; }
  Evaluator& evaluator() { return ev_; }
  double operator()(const Expr& e) { return ev_(e); }
  Eigen::VectorXd operator()(const std::vector<Expr>& v) { return evaluate(ev_, v); }
  Eigen::MatrixXd operator()(const ExprMatrix& m) { return evaluate(ev_, m); }
  NumTensor operator()(const Tensor& t) { return evaluate(ev_, t); }

  int dim() const { return static_cast<int>(g_.rows()); }
  const Eigen::MatrixXd& g() const { return g_; }
  const Eigen::MatrixXd& ginv() const { return ginv_; }
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return a.dot(g_ * b); }
  Eigen::VectorXd flat(const Eigen::VectorXd& v) const { return g_ * v; }
  Eigen::VectorXd sharp(const Eigen::VectorXd& a) const { return ginv_ * a; }

  const NumTensor& christoffel() {
    if (!gamma_) gamma_ = evaluate(ev_, geo_->christoffel());
    return *gamma_;
  }

  /// Gamma(X, Y)^k = Gamma^k_ij X^i Y^j.
  Eigen::VectorXd gamma(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const NumTensor& gm = christoffel();
    int n = dim();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r(k) += gm.at({k, i, j}) * x(i) * y(j);
    return r;
  }

  const NumTensor& riemann_tensor() {
    if (!riemann_) riemann_ = evaluate(ev_, geo_->riemann());
    return *riemann_;
  }

  /// R(X, Y) Z.
  Eigen::VectorXd riemann(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
    const NumTensor& r = riemann_tensor();
    int n = dim();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) out(l) += r.at({l, i, j, k}) * x(i) * y(j) * z(k);
    return out;
  }

  /// R(X, Y, Z, W) = g(R(X, Y) Z, W).
  double riemann4(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                  const Eigen::VectorXd& w) {
    return inner(riemann(x, y, z), w);
  }

  /// Curvature operator acting on an endomorphism as a derivation:
  /// (R(X,Y)T)Z = R(X,Y)(TZ) - T(R(X,Y)Z).
  Eigen::VectorXd riemann_on_endo(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& t,
                                  const Eigen::VectorXd& z) {
    return riemann(x, y, t * z) - t * riemann(x, y, z);
  }

  Eigen::MatrixXd ricci() { return evaluate(ev_, geo_->ricci()); }
  Eigen::MatrixXd ricci_operator() { return evaluate(ev_, geo_->ricci_operator()); }
  double scal() { return ev_(geo_->scalar_curvature()); }

 private:
  const GeometryCache* geo_;
  Point x_;
  Evaluator ev_;
  Eigen::MatrixXd g_, ginv_;
  std::optional<NumTensor> gamma_;
  std::optional<NumTensor> riemann_;
};

// Pointwise entry points.

inline NumTensor christoffel(const GeometryCache& geo, const Point& x) { return LocalGeometry(geo, x).christoffel(); }

inline Eigen::VectorXd cov_deriv_vector(const GeometryCache& geo, const Point& x, const Eigen::VectorXd& dir,
                                        const VectorField& y) {
  LocalGeometry at(geo, x);
  return at(geo.nabla(constant_field(dir), y));
}

inline Eigen::MatrixXd cov_deriv_endo(const GeometryCache& geo, const Point& x, const Eigen::VectorXd& dir,
                                      const ExprMatrix& t) {
  LocalGeometry at(geo, x);
  return at(geo.nabla_endo(constant_field(dir), t));
}

inline Eigen::VectorXd cov_deriv_dual(const GeometryCache& geo, const Point& x, const Eigen::VectorXd& dir,
                                      const ExprMatrix& t, const CovectorField& a) {
  LocalGeometry at(geo, x);
  return at(geo.nabla_dual(constant_field(dir), t, a));
}

inline Eigen::VectorXd riemann(const GeometryCache& geo, const Point& x, const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  return LocalGeometry(geo, x).riemann(a, b, c);
}

inline double riemann4(const GeometryCache& geo, const Point& x, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& c, const Eigen::VectorXd& d) {
  return LocalGeometry(geo, x).riemann4(a, b, c, d);
}

inline Eigen::MatrixXd ricci(const GeometryCache& geo, const Point& x) { return LocalGeometry(geo, x).ricci(); }
inline Eigen::MatrixXd ricci_operator(const GeometryCache& geo, const Point& x) {
  return LocalGeometry(geo, x).ricci_operator();
}
inline double scal(const GeometryCache& geo, const Point& x) { return LocalGeometry(geo, x).scal(); }

}  // namespace metharm
