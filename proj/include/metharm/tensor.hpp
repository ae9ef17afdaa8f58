#pragma once

// Mixed tensors in chart components. The variance string lists each slot as
// 'u' (upper) or 'd' (lower), left to right; storage is row-major over slots.

#include <Eigen/Dense>
#include <initializer_list>
#include <string>
#include <vector>

#include "metharm/expr.hpp"
#include "metharm/fields.hpp"

namespace metharm {

template <typename Scalar>
class BasicTensor {
 public:
  BasicTensor() = default;
  BasicTensor(int n, std::string variance)
      : n_(n), variance_(std::move(variance)), data_(count(n, static_cast<int>(variance_.size())), Scalar(0.0)) {}

  int dim() const { return n_; }
  int rank() const { return static_cast<int>(variance_.size()); }
  const std::string& variance() const { return variance_; }
  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  Scalar& at(std::initializer_list<int> idx) { return data_[offset(idx.begin(), idx.size())]; }
  const Scalar& at(std::initializer_list<int> idx) const { return data_[offset(idx.begin(), idx.size())]; }
  Scalar& at(const std::vector<int>& idx) { return data_[offset(idx.data(), idx.size())]; }
  const Scalar& at(const std::vector<int>& idx) const { return data_[offset(idx.data(), idx.size())]; }

  /// Multi-index of a flat storage position.
  std::vector<int> index_of(std::size_t flat) const {
    std::vector<int> idx(variance_.size());
    for (int s = rank() - 1; s >= 0; --s) {
      idx[static_cast<std::size_t>(s)] = static_cast<int>(flat % static_cast<std::size_t>(n_));
      flat /= static_cast<std::size_t>(n_);
    }
    return idx;
  }

 private:
  static std::size_t count(int n, int r) {
    std::size_t c = 1;
    for (int i = 0; i < r; ++i) c *= static_cast<std::size_t>(n);
    return c;
  }
  std::size_t offset(const int* idx, std::size_t len) const {
    std::size_t o = 0;
    for (std::size_t s = 0; s < len; ++s) o = o * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx[s]);
    return o;
  }

  int n_ = 0;
  std::string variance_;
  std::vector<Scalar> data_;
};

using Tensor = BasicTensor<Expr>;
using NumTensor = BasicTensor<double>;

inline Tensor tensor_from_endo(const ExprMatrix& t) {
  Tensor r(t.size(), "ud");
  for (int i = 0; i < t.size(); ++i)
    for (int j = 0; j < t.size(); ++j) r.at({i, j}) = t(i, j);
  return r;
}

inline Tensor tensor_from_vector(const VectorField& v) {
  Tensor r(static_cast<int>(v.size()), "u");
  for (std::size_t i = 0; i < v.size(); ++i) r.data()[i] = v[i];
  return r;
}

inline NumTensor evaluate(Evaluator& ev, const Tensor& t) {
  NumTensor r(t.dim(), t.variance());
  for (std::size_t k = 0; k < t.data().size(); ++k) r.data()[k] = ev(t.data()[k]);
  return r;
}

/// Contracts the leading slot of a numeric tensor with a vector (or covector).
inline NumTensor contract_front(const NumTensor& t, const Eigen::VectorXd& v) {
  int n = t.dim();
  NumTensor r(n, t.variance().substr(1));
  std::size_t stride = r.data().size();
  for (int a = 0; a < n; ++a)
    for (std::size_t k = 0; k < stride; ++k) r.data()[k] += v(a) * t.data()[static_cast<std::size_t>(a) * stride + k];
  return r;
}

/// Numeric (1,1)-tensor as a matrix, entry (i, j) = T^i_j.
inline Eigen::MatrixXd as_matrix(const NumTensor& t) {
  int n = t.dim();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = t.at({i, j});
  return m;
}

inline Eigen::VectorXd as_vector(const NumTensor& t) {
  Eigen::VectorXd v(t.dim());
  for (int i = 0; i < t.dim(); ++i) v(i) = t.data()[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace metharm
