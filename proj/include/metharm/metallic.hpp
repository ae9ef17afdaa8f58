#pragma once

// Metallic structures J with J^2 = pJ + qI, g(JX, Y) = g(X, JY), and the
// structures derived from them.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "metharm/connection.hpp"
#include "metharm/errors.hpp"
#include "metharm/fields.hpp"
#include "metharm/manifold.hpp"

namespace metharm {

inline constexpr double kDiscriminantZero = 1e-12;

struct MetallicStructure {
  std::string name;
  ManifoldPtr host;
  double p = 1.0;
  double q = 1.0;
  ExprMatrix J;

  double discriminant() const { return p * p + 4.0 * q; }
  bool is_nondegenerate() const { return std::abs(discriminant()) > kDiscriminantZero; }
  bool is_product_type() const { return discriminant() > kDiscriminantZero; }
  bool is_norden_type() const { return discriminant() < -kDiscriminantZero; }

  void require_nondegenerate() const {
    if (!is_nondegenerate()) throw DiscriminantError("structure '" + name + "': p^2+4q = 0");
  }
};

struct MetallicCheck {
  double symmetry = 0.0;    // max |g(JX,Y) - g(X,JY)| over coordinate pairs
  double polynomial = 0.0;  // max entry of |J^2 - pJ - qI|
  int samples = 0;
  bool passed(double tol) const { return symmetry <= tol && polynomial <= tol; }
};

inline double symmetry_residual(const Eigen::MatrixXd& g, const Eigen::MatrixXd& j) {
  Eigen::MatrixXd gj = g * j;
  return (gj - gj.transpose()).cwiseAbs().maxCoeff();
}

inline double polynomial_residual(const Eigen::MatrixXd& j, double p, double q) {
  Eigen::MatrixXd r = j * j - p * j - q * Eigen::MatrixXd::Identity(j.rows(), j.cols());
  return r.cwiseAbs().maxCoeff();
}

inline MetallicCheck check_metallic(const MetallicStructure& s, const std::vector<Point>& points) {
  MetallicCheck c;
  for (const Point& x : points) {
    Evaluator ev(s.host->binding(x));
    Eigen::MatrixXd g = evaluate(ev, s.host->metric());
    Eigen::MatrixXd j = evaluate(ev, s.J);
    c.symmetry = std::max(c.symmetry, symmetry_residual(g, j));
    c.polynomial = std::max(c.polynomial, polynomial_residual(j, s.p, s.q));
    ++c.samples;
  }
  return c;
}

enum class AssociatedKind { product, norden, tilde };

inline const char* to_string(AssociatedKind k) {
  switch (k) {
    case AssociatedKind::product: return "product";
    case AssociatedKind::norden: return "norden";
    case AssociatedKind::tilde: return "tilde";
  }
  return "?";
}

/// J_p = (2J - pI)/sqrt(p^2+4q), J_c = (2J - pI)/sqrt(-p^2-4q),
/// J~ = -(2J - pI)/sqrt|p^2+4q|.
inline ExprMatrix associated_structure(const MetallicStructure& s, AssociatedKind kind) {
  double d = s.discriminant();
  double scale = 0.0;
  switch (kind) {
    case AssociatedKind::product:
      if (!s.is_product_type()) throw DiscriminantError("product structure requires p^2+4q > 0");
      scale = 1.0 / std::sqrt(d);
      break;
    case AssociatedKind::norden:
      if (!s.is_norden_type()) throw DiscriminantError("Norden structure requires p^2+4q < 0");
      scale = 1.0 / std::sqrt(-d);
      break;
    case AssociatedKind::tilde:
      s.require_nondegenerate();
      scale = -1.0 / std::sqrt(std::abs(d));
      break;
  }
  int n = s.J.size();
  return Expr(scale) * (Expr(2.0) * s.J - Expr(s.p) * ExprMatrix::identity(n));
}

/// Numeric J~ at a point.
inline Eigen::MatrixXd tilde_at(const Eigen::MatrixXd& j, double p, double q) {
  double d = p * p + 4.0 * q;
  return -(2.0 * j - p * Eigen::MatrixXd::Identity(j.rows(), j.cols())) / std::sqrt(std::abs(d));
}

/// N_J(X,Y) = [JX,JY] - J[JX,Y] - J[X,JY] + J^2[X,Y] as a field.
inline VectorField nijenhuis_field(const GeometryCache& geo, const ExprMatrix& j, const VectorField& x,
                                   const VectorField& y) {
  VectorField jx = metharm::apply(j, x), jy = metharm::apply(j, y);
  return geo.bracket(jx, jy) - metharm::apply(j, geo.bracket(jx, y)) - metharm::apply(j, geo.bracket(x, jy)) +
         metharm::apply(j * j, geo.bracket(x, y));
}

inline Eigen::VectorXd nijenhuis(const GeometryCache& geo, const MetallicStructure& s, const Point& x,
                                 const VectorField& a, const VectorField& b) {
  Evaluator ev(s.host->binding(x));
  return evaluate(ev, nijenhuis_field(geo, s.J, a, b));
}

/// Point vectors are extended with constant chart components.
inline Eigen::VectorXd nijenhuis(const GeometryCache& geo, const MetallicStructure& s, const Point& x,
                                 const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return nijenhuis(geo, s, x, constant_field(a), constant_field(b));
}

struct TrivialityVerdict {
  enum class Kind { parameters_equal, trivial_confirmed, inconsistent };
  Kind kind = Kind::parameters_equal;
  double residual = 0.0;
  std::string message;
};

/// Consequence of Phi_* J = Jbar Phi_* for an isometry: (p - pbar) J = (qbar - q) I.
inline TrivialityVerdict triviality_check(const MetallicStructure& s, const MetallicStructure& target,
                                          const std::vector<Point>& points, double tol = 1e-9) {
  TrivialityVerdict v;
  double dp = s.p - target.p, dq = target.q - s.q;
  if (std::abs(dp) <= kDiscriminantZero) {
    v.residual = std::abs(dq);
    if (v.residual <= tol) {
      v.kind = TrivialityVerdict::Kind::parameters_equal;
      v.message = "parameters equal, no constraint";
    } else {
      v.kind = TrivialityVerdict::Kind::inconsistent;
      v.message = "p equals pbar but q differs from qbar";
    }
    return v;
  }
  double c = dq / dp;
  int n = s.J.size();
  for (const Point& x : points) {
    Evaluator ev(s.host->binding(x));
    Eigen::MatrixXd r = evaluate(ev, s.J) - c * Eigen::MatrixXd::Identity(n, n);
    v.residual = std::max(v.residual, r.cwiseAbs().maxCoeff());
  }
  if (v.residual <= tol) {
    v.kind = TrivialityVerdict::Kind::trivial_confirmed;
    v.message = "trivial structure confirmed, J = " + std::to_string(c) + " I";
  } else {
    v.kind = TrivialityVerdict::Kind::inconsistent;
    v.message = "J is not the scalar " + std::to_string(c) + " I required by p != pbar";
  }
  return v;
}

}  // namespace metharm
