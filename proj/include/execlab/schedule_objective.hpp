#pragma once

#include <Eigen/Core>

#include <cmath>

namespace execlab::scheduler {

/// Separable schedule objective over remaining quantities x_0..x_N:
///
///   f(x) = c + sum_n b_n d_n + q_n d_n^2 + r_n d_n^4 + s_n x_n^2,   d_n = x_n - x_{n+1},
///
/// with x_0 = v* and x_N = 0 fixed. All three scheduling criteria (with a
/// linear impact law) are instances of this form.
template <typename Scalar>
struct ScheduleObjective {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Scalar constant{0};
  Vec linear;     // b_n
  Vec quadratic;  // q_n
  Vec quartic;    // r_n
  Vec risk;       // s_n

  Eigen::Index n_slices() const noexcept { return linear.size(); }

  Scalar value(const Vec& remaining) const {
    Scalar f = constant;
    for (Eigen::Index n = 0; n < n_slices(); ++n) {
      const Scalar d = remaining(n) - remaining(n + 1);
      const Scalar d2 = d * d;
      f += linear(n) * d + quadratic(n) * d2 + quartic(n) * d2 * d2 + risk(n) * remaining(n) * remaining(n);
    }
    return f;
  }

  /// df/dd_n at d.
  Scalar slice_slope(Eigen::Index n, Scalar d) const {
    return linear(n) + Scalar(2) * quadratic(n) * d + Scalar(4) * quartic(n) * d * d * d;
  }
  /// d2f/dd_n^2 at d.
  Scalar slice_curvature(Eigen::Index n, Scalar d) const {
    return Scalar(2) * quadratic(n) + Scalar(12) * quartic(n) * d * d;
  }

  /// Gradient with respect to the interior unknowns x_1..x_{N-1}.
  Vec interior_gradient(const Vec& remaining) const {
    const Eigen::Index n = n_slices();
    Vec g(n > 1 ? n - 1 : 0);
    for (Eigen::Index j = 1; j < n; ++j) {
      const Scalar d_prev = remaining(j - 1) - remaining(j);
      const Scalar d_next = remaining(j) - remaining(j + 1);
      g(j - 1) = slice_slope(j, d_next) - slice_slope(j - 1, d_prev) + Scalar(2) * risk(j) * remaining(j);
    }
    return g;
  }

  /// Tridiagonal Hessian with respect to x_1..x_{N-1}: (diagonal, off-diagonal).
  void interior_hessian(const Vec& remaining, Vec& diag, Vec& off) const {
    const Eigen::Index n = n_slices();
    const Eigen::Index m = n > 1 ? n - 1 : 0;
    diag.resize(m);
    off.resize(m > 0 ? m - 1 : 0);
    for (Eigen::Index j = 1; j < n; ++j) {
      const Scalar c_prev = slice_curvature(j - 1, remaining(j - 1) - remaining(j));
      const Scalar c_next = slice_curvature(j, remaining(j) - remaining(j + 1));
      diag(j - 1) = c_prev + c_next + Scalar(2) * risk(j);
      if (j + 1 < n) off(j - 1) = -c_next;
    }
  }
};

}  // namespace execlab::scheduler
