#pragma once

// Pseudo-Riemannian metrics on a single coordinate chart.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "metharm/errors.hpp"
#include "metharm/expr.hpp"
#include "metharm/fields.hpp"

namespace metharm {

inline constexpr double kDegenerateDet = 1e-10;
inline constexpr double kNearNull = 1e-10;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// A point of the chart, one value per coordinate.
struct Point {
  Eigen::VectorXd coords;
};

/// Orthonormal frame at one point: columns of `vectors` are the E_i, with
/// g(E_i, E_j) = signs[i] * delta_ij.
struct Frame {
  Eigen::MatrixXd vectors;
  std::vector<int> signs;

  int size() const { return static_cast<int>(signs.size()); }
  Eigen::VectorXd operator[](int i) const { return vectors.col(i); }
};

class ChartedManifold {
 public:
  ChartedManifold(std::string name, std::vector<std::string> coords, ExprMatrix metric, std::vector<Interval> box)
      : name_(std::move(name)), coords_(std::move(coords)), metric_(std::move(metric)), box_(std::move(box)) {
    if (static_cast<int>(coords_.size()) != metric_.size() || box_.size() != coords_.size())
      throw ManifestError("manifold '" + name_ + "': metric and box must match the number of coordinates");
    for (const auto& c : coords_) var_ids_.push_back(variable_id(c));
    inverse_ = metharm::inverse(metric_);
  }

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(coords_.size()); }
  const std::vector<std::string>& coordinates() const { return coords_; }
  int var(int k) const { return var_ids_[static_cast<std::size_t>(k)]; }
  const std::vector<Interval>& box() const { return box_; }
  const ExprMatrix& metric() const { return metric_; }
  const ExprMatrix& inverse_metric() const { return inverse_; }

  Binding binding(const Point& x) const {
    Binding b;
    for (int k = 0; k < dim(); ++k) b.set(var(k), x.coords(k));
    return b;
  }

  bool contains(const Point& x, double slack = 1e-12) const {
    for (int k = 0; k < dim(); ++k) {
      double v = x.coords(k);
      if (v < box_[static_cast<std::size_t>(k)].lo - slack || v > box_[static_cast<std::size_t>(k)].hi + slack)
        return false;
    }
    return true;
  }

  Point center() const {
    Point p{Eigen::VectorXd(dim())};
    for (int k = 0; k < dim(); ++k)
      p.coords(k) = 0.5 * (box_[static_cast<std::size_t>(k)].lo + box_[static_cast<std::size_t>(k)].hi);
    return p;
  }

  /// g(X, Y) as an expression.
  Expr inner(const VectorField& x, const VectorField& y) const {
    std::vector<Expr> terms;
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j)
        terms.push_back(metric_(i, j) * x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)]);
    return add(terms);
  }

  CovectorField flat(const VectorField& x) const { return metharm::apply(metric_, x); }
  VectorField sharp(const CovectorField& a) const { return metharm::apply(inverse_, a); }

 private:
  std::string name_;
  std::vector<std::string> coords_;
  std::vector<int> var_ids_;
  ExprMatrix metric_;
  ExprMatrix inverse_;
  std::vector<Interval> box_;
};

using ManifoldPtr = std::shared_ptr<const ChartedManifold>;

inline Eigen::MatrixXd metric_at(const ChartedManifold& m, const Point& x) {
  Evaluator ev(m.binding(x));
  Eigen::MatrixXd g = evaluate(ev, m.metric());
  double det = g.determinant();
  if (std::abs(det) <= kDegenerateDet) throw DegenerateMetricError(det);
  return g;
}

struct Signature {
  int positive = 0;
  int negative = 0;
  friend bool operator==(const Signature&, const Signature&) = default;
  bool riemannian() const { return negative == 0; }
};

inline Signature signature_of(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  Signature s;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) (es.eigenvalues()(i) > 0 ? s.positive : s.negative)++;
  return s;
}

inline Signature signature(const ChartedManifold& m, const Point& x) { return signature_of(metric_at(m, x)); }

inline Eigen::VectorXd flat_g(const ChartedManifold& m, const Point& x, const Eigen::VectorXd& v) {
  return metric_at(m, x) * v;
}

inline Eigen::VectorXd sharp_g(const ChartedManifold& m, const Point& x, const Eigen::VectorXd& a) {
  return metric_at(m, x).partialPivLu().solve(a);
}

/// Haar-distributed orthogonal matrix from a seed.
inline Eigen::MatrixXd random_orthogonal(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

namespace detail {

// Indices of the positive-signed frame vectors; rotations act only there.
inline std::vector<int> positive_block(const std::vector<int>& signs) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < signs.size(); ++i)
    if (signs[i] > 0) idx.push_back(static_cast<int>(i));
  return idx;
}

}  // namespace detail

/// Modified Gram-Schmidt on the coordinate basis, in index order. With a
/// seed, the positive-definite block is post-rotated by a random orthogonal
/// matrix.
inline Frame orthonormal_frame(const Eigen::MatrixXd& g, std::optional<std::uint64_t> rotation_seed = std::nullopt) {
  int n = static_cast<int>(g.rows());
  Frame f{Eigen::MatrixXd::Zero(n, n), std::vector<int>(static_cast<std::size_t>(n), 1)};
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(n, k);
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd e = f.vectors.col(j);
      v -= f.signs[static_cast<std::size_t>(j)] * v.dot(g * e) * e;
    }
    double gvv = v.dot(g * v);
    if (std::abs(gvv) < kNearNull)
      throw NearNullVectorError("near-null vector at index " + std::to_string(k) + " during Gram-Schmidt");
    f.signs[static_cast<std::size_t>(k)] = gvv > 0 ? 1 : -1;
    f.vectors.col(k) = v / std::sqrt(std::abs(gvv));
  }
  if (rotation_seed) {
    std::vector<int> pos = detail::positive_block(f.signs);
    int m = static_cast<int>(pos.size());
    Eigen::MatrixXd q = random_orthogonal(m, *rotation_seed);
    Eigen::MatrixXd block(n, m);
    for (int a = 0; a < m; ++a) block.col(a) = f.vectors.col(pos[static_cast<std::size_t>(a)]);
    Eigen::MatrixXd rotated = block * q;
    for (int a = 0; a < m; ++a) f.vectors.col(pos[static_cast<std::size_t>(a)]) = rotated.col(a);
  }
  return f;
}

inline Frame orthonormal_frame(const ChartedManifold& m, const Point& x,
                               std::optional<std::uint64_t> rotation_seed = std::nullopt) {
  return orthonormal_frame(metric_at(m, x), rotation_seed);
}

/// Orthonormal frame field: the same Gram-Schmidt sweep carried out on
/// expressions, so the frame can be differentiated. Signs are read at
/// `reference`; for valid fixtures they are constant over the box.
struct FrameField {
  std::vector<VectorField> vectors;
  std::vector<int> signs;
  int size() const { return static_cast<int>(signs.size()); }
};

inline FrameField orthonormal_frame_field(const ChartedManifold& m, const Point& reference,
                                          std::optional<std::uint64_t> rotation_seed = std::nullopt) {
  int n = m.dim();
  Evaluator ev(m.binding(reference));
  FrameField f;
  for (int k = 0; k < n; ++k) {
    VectorField v = coordinate_field(n, k);
    for (int j = 0; j < k; ++j) {
      const VectorField& e = f.vectors[static_cast<std::size_t>(j)];
      Expr c = m.inner(v, e);
      if (f.signs[static_cast<std::size_t>(j)] < 0) c = -c;
      v = v - c * e;
    }
    Expr gvv = m.inner(v, v);
    double g0 = ev(gvv);
    if (std::abs(g0) < kNearNull)
      throw NearNullVectorError("near-null vector at index " + std::to_string(k) + " during Gram-Schmidt");
    int s = g0 > 0 ? 1 : -1;
    f.signs.push_back(s);
    f.vectors.push_back(pow(s > 0 ? gvv : -gvv, Rational(-1, 2)) * v);
  }
  if (rotation_seed) {
    std::vector<int> pos = detail::positive_block(f.signs);
    int mm = static_cast<int>(pos.size());
    Eigen::MatrixXd q = random_orthogonal(mm, *rotation_seed);
    std::vector<VectorField> rotated;
    for (int a = 0; a < mm; ++a) {
      VectorField acc = zero_field(n);
      for (int b = 0; b < mm; ++b)
        acc = acc + Expr(q(b, a)) * f.vectors[static_cast<std::size_t>(pos[static_cast<std::size_t>(b)])];
      rotated.push_back(acc);
    }
    for (int a = 0; a < mm; ++a) f.vectors[static_cast<std::size_t>(pos[static_cast<std::size_t>(a)])] = rotated[static_cast<std::size_t>(a)];
  }
  return f;
}

/// Seeded uniform samples in the box; points where |det g| <= 1e-10 are
/// rejected and redrawn.
inline std::vector<Point> sample_points(const ChartedManifold& m, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dist;
  for (const Interval& iv : m.box()) dist.emplace_back(iv.lo, iv.hi);
  std::vector<Point> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100 * count + 1000) throw DegenerateMetricError(0.0);
    Point p{Eigen::VectorXd(m.dim())};
    for (int k = 0; k < m.dim(); ++k) p.coords(k) = dist[static_cast<std::size_t>(k)](rng);
    try {
      metric_at(m, p);
    } catch (const DegenerateMetricError&) {
      continue;
    } catch (const DomainError&) {
      continue;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace metharm
