#pragma once

#include <Eigen/Core>

#include <optional>

namespace execlab {

/// Thomas elimination for a symmetric tridiagonal system A x = rhs.
///
/// `diag` has length n, `off` length n-1 (A(i,i+1) = A(i+1,i) = off(i)).
/// Returns nullopt if a pivot is not strictly positive, i.e. A is not
/// positive definite; no pivoting is done.
template <typename Scalar>
std::optional<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> solve_spd_tridiagonal(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& diag, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& off,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& rhs) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = diag.size();
  Vec pivot(n), y(n);
  if (n == 0) return Vec(0);
  pivot(0) = diag(0);
  if (!(pivot(0) > Scalar(0))) return std::nullopt;
  y(0) = rhs(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    const Scalar l = off(i - 1) / pivot(i - 1);
    pivot(i) = diag(i) - l * off(i - 1);
    if (!(pivot(i) > Scalar(0))) return std::nullopt;
    y(i) = rhs(i) - l * y(i - 1);
  }
  Vec x(n);
  x(n - 1) = y(n - 1) / pivot(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) x(i) = (y(i) - off(i) * x(i + 1)) / pivot(i);
  return x;
}

}  // namespace execlab
