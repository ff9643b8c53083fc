#pragma once

#include "httpmine/types.hpp"

#include <Eigen/Core>

#include <cmath>

namespace httpmine {

/// Numerically stable softmax of a vector expression.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using T = typename Derived::Scalar;
  VectorX<T> shifted = v.derived();
  shifted.array() -= shifted.maxCoeff();
  VectorX<T> e = shifted.array().exp();
  return e / e.sum();
}

/// Element-wise logistic sigmoid.
template <typename Derived>
VectorX<typename Derived::Scalar> logistic(const Eigen::MatrixBase<Derived>& v) {
  return v.array().logistic().matrix();
}

/// Element-wise rectifier.
template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& v) {
  using T = typename Derived::Scalar;
  return v.array().max(T(0)).matrix();
}

inline Scalar cosine_distance(const Vector& a, const Vector& b) {
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

inline Scalar euclidean_distance(const Vector& a, const Vector& b) {
  return (a - b).norm();
}

}  // namespace httpmine
