#pragma once

// Component containers for symbolic fields on a chart, plus numeric
// evaluation into Eigen types.

#include <Eigen/Dense>
#include <cassert>
#include <vector>

#include "metharm/expr.hpp"

namespace metharm {

/// Contravariant components X^i.
using VectorField = std::vector<Expr>;
/// Covariant components alpha_i.
using CovectorField = std::vector<Expr>;

/// Square matrix of expressions; for a (1,1)-tensor T the entry (i, j) is T^i_j.
class ExprMatrix {
 public:
  ExprMatrix() = default;
  explicit ExprMatrix(int n) : n_(n), data_(static_cast<std::size_t>(n * n), Expr(0.0)) {}

  static ExprMatrix identity(int n) {
    ExprMatrix m(n);
    for (int i = 0; i < n; ++i) m(i, i) = Expr(1.0);
    return m;
  }

  int size() const { return n_; }
  Expr& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * n_ + j)]; }
  const Expr& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * n_ + j)]; }

  friend ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b) {
    ExprMatrix r(a.n_);
    for (std::size_t k = 0; k < a.data_.size(); ++k) r.data_[k] = a.data_[k] + b.data_[k];
    return r;
  }
  friend ExprMatrix operator-(const ExprMatrix& a, const ExprMatrix& b) {
    ExprMatrix r(a.n_);
    for (std::size_t k = 0; k < a.data_.size(); ++k) r.data_[k] = a.data_[k] - b.data_[k];
    return r;
  }
  friend ExprMatrix operator*(const Expr& s, const ExprMatrix& a) {
    ExprMatrix r(a.n_);
    for (std::size_t k = 0; k < a.data_.size(); ++k) r.data_[k] = s * a.data_[k];
    return r;
  }
  friend ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b) {
    int n = a.n_;
    ExprMatrix r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        std::vector<Expr> terms;
        for (int k = 0; k < n; ++k) terms.push_back(a(i, k) * b(k, j));
        r(i, j) = add(terms);
      }
    return r;
  }

 private:
  int n_ = 0;
  std::vector<Expr> data_;
};

using EndomorphismField = ExprMatrix;

inline VectorField zero_field(int n) { return VectorField(static_cast<std::size_t>(n), Expr(0.0)); }

inline VectorField coordinate_field(int n, int k) {
  VectorField v = zero_field(n);
  v[static_cast<std::size_t>(k)] = Expr(1.0);
  return v;
}

/// Extends point data to a field with constant chart components.
inline VectorField constant_field(const Eigen::VectorXd& v) {
  VectorField f;
  for (Eigen::Index i = 0; i < v.size(); ++i) f.push_back(Expr(v(i)));
  return f;
}

inline VectorField operator+(const VectorField& a, const VectorField& b) {
  VectorField r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}
inline VectorField operator-(const VectorField& a, const VectorField& b) {
  VectorField r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}
inline VectorField operator*(const Expr& s, const VectorField& a) {
  VectorField r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

/// (T X)^i = T^i_j X^j.
inline VectorField apply(const ExprMatrix& t, const VectorField& x) {
  int n = t.size();
  VectorField r(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> terms;
    for (int j = 0; j < n; ++j) terms.push_back(t(i, j) * x[static_cast<std::size_t>(j)]);
    r[static_cast<std::size_t>(i)] = add(terms);
  }
  return r;
}

/// (T* alpha)_j = alpha_i T^i_j, i.e. (T* alpha)(Y) = alpha(T Y).
inline CovectorField apply_dual(const ExprMatrix& t, const CovectorField& a) {
  int n = t.size();
  CovectorField r(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::vector<Expr> terms;
    for (int i = 0; i < n; ++i) terms.push_back(a[static_cast<std::size_t>(i)] * t(i, j));
    r[static_cast<std::size_t>(j)] = add(terms);
  }
  return r;
}

/// alpha(X).
inline Expr pairing(const CovectorField& a, const VectorField& x) {
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < a.size(); ++i) terms.push_back(a[i] * x[i]);
  return add(terms);
}

inline Eigen::VectorXd evaluate(Evaluator& ev, const std::vector<Expr>& v) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = ev(v[i]);
  return r;
}

inline Eigen::MatrixXd evaluate(Evaluator& ev, const ExprMatrix& m) {
  int n = m.size();
  Eigen::MatrixXd r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) = ev(m(i, j));
  return r;
}

/// Determinant by cofactor expansion; fine for the small dimensions of a chart.
inline Expr determinant(const ExprMatrix& m) {
  int n = m.size();
  if (n == 1) return m(0, 0);
  std::vector<Expr> terms;
  for (int j = 0; j < n; ++j) {
    if (m(0, j).is_zero()) continue;
    ExprMatrix minor(n - 1);
    for (int r = 1; r < n; ++r)
      for (int c = 0, cc = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    Expr t = m(0, j) * determinant(minor);
    terms.push_back(j % 2 == 0 ? t : -t);
  }
  return add(terms);
}

/// Symbolic inverse via the adjugate.
inline ExprMatrix inverse(const ExprMatrix& m) {
  int n = m.size();
  ExprMatrix r(n);
  if (n == 1) {
    r(0, 0) = Expr(1.0) / m(0, 0);
    return r;
  }
  Expr inv_det = Expr(1.0) / determinant(m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      ExprMatrix minor(n - 1);
      for (int a = 0, aa = 0; a < n; ++a) {
        if (a == j) continue;
        for (int b = 0, bb = 0; b < n; ++b) {
          if (b == i) continue;
          minor(aa, bb++) = m(a, b);
        }
        ++aa;
      }
      Expr cof = determinant(minor);
      if ((i + j) % 2 != 0) cof = -cof;
      r(i, j) = cof.is_zero() ? Expr(0.0) : cof * inv_det;
    }
  return r;
}

}  // namespace metharm
