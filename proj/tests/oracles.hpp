// Test-only reference implementations. None of these call into the library's
// solvers or cost evaluators; they work from the stated formulas directly.
#pragma once

#include "execlab/random.hpp"
#include "execlab/scheduler.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using Eigen::VectorXd;
using execlab::scheduler::ExecutionProblem;

// ---------------------------------------------------------------------------
// Naive cost evaluators, term by term over the volume vector (x_0 = v*).

enum class Kind { expectation, mv, statistical };

inline VectorXd remaining_from_volumes(const VectorXd& v) {
  VectorXd x(v.size() + 1);
  x(v.size()) = 0.0;
  for (Eigen::Index n = v.size() - 1; n >= 0; --n) x(n) = x(n + 1) + v(n);
  return x;
}

inline double naive_cost(Kind kind, const VectorXd& v, const ExecutionProblem& p) {
  const VectorXd x = remaining_from_volumes(v);
  const auto& pr = p.profile;
  const double a = p.impact.a, kappa = p.impact.kappa, lam = p.risk_aversion;
  double total = p.initial_price * x(0);
  for (Eigen::Index n = 0; n < v.size(); ++n) {
    const double dv = v(n);
    total += (a * pr.half_spread(n) - p.signal.mean(n)) * dv;
    if (kind == Kind::statistical) {
      total += (kappa * pr.mean_ratio(n) +
                lam * (a * a * pr.var_half_spread(n) + p.signal.variance(n) + p.impact.var_noise)) * dv * dv;
      total += lam * kappa * kappa * pr.var_ratio(n) * dv * dv * dv * dv;
    } else {
      const double g = p.impact.gamma;
      total += kappa * pr.volatility(n) / (g == 1.0 ? pr.expected_volume(n) : std::pow(pr.expected_volume(n), g)) *
               (g == 1.0 ? dv * dv : std::pow(std::abs(dv), g + 1.0));
      if (kind == Kind::mv) total += lam * p.signal.variance(n) * dv * dv;
    }
    if (kind != Kind::expectation) total += lam * pr.volatility(n) * pr.volatility(n) * x(n) * x(n);
  }
  return total;
}

/// Gradient of naive_cost with respect to v (gamma = 1), written out by hand.
inline VectorXd naive_gradient(Kind kind, const VectorXd& v, const ExecutionProblem& p) {
  const VectorXd x = remaining_from_volumes(v);
  const auto& pr = p.profile;
  const double a = p.impact.a, kappa = p.impact.kappa, lam = p.risk_aversion;
  VectorXd g(v.size());
  double carried = 0.0;  // d/dv_k of sum_{n<=k} s_n x_n^2 accumulates over n <= k
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    double q, r = 0.0;
    if (kind == Kind::statistical) {
      q = kappa * pr.mean_ratio(k) + lam * (a * a * pr.var_half_spread(k) + p.signal.variance(k) + p.impact.var_noise);
      r = lam * kappa * kappa * pr.var_ratio(k);
    } else {
      q = kappa * pr.volatility(k) / pr.expected_volume(k) + (kind == Kind::mv ? lam * p.signal.variance(k) : 0.0);
    }
    if (kind != Kind::expectation) carried += 2.0 * lam * pr.volatility(k) * pr.volatility(k) * x(k);
    g(k) = p.initial_price + a * pr.half_spread(k) - p.signal.mean(k) + 2.0 * q * v(k) + 4.0 * r * v(k) * v(k) * v(k) +
           carried;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Random instances

inline double unif(execlab::Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline ExecutionProblem random_problem(execlab::Rng& rng, int n_max = 20) {
  const int n = std::uniform_int_distribution<int>(2, n_max)(rng);
  ExecutionProblem p;
  p.total_quantity = unif(rng, 1.0, 5.0);
  p.initial_price = unif(rng, 0.0, 2.0);
  p.risk_aversion = unif(rng, 0.0, 1.0);
  p.impact.a = unif(rng, 0.0, 1.0);
  p.impact.kappa = unif(rng, 0.2, 2.0);
  p.impact.var_noise = unif(rng, 0.0, 0.1);
  auto& pr = p.profile;
  pr.expected_volume.resize(n);
  pr.volatility.resize(n);
  pr.half_spread.resize(n);
  pr.mean_ratio.resize(n);
  pr.var_ratio.resize(n);
  pr.var_half_spread.resize(n);
  p.signal.mean.resize(n);
  p.signal.variance.resize(n);
  for (int i = 0; i < n; ++i) {
    pr.expected_volume(i) = unif(rng, 0.5, 2.0);
    pr.volatility(i) = unif(rng, 0.1, 1.0);
    pr.half_spread(i) = unif(rng, 0.0, 0.5);
    pr.mean_ratio(i) = pr.volatility(i) / pr.expected_volume(i) * unif(rng, 0.8, 1.2);
    pr.var_ratio(i) = unif(rng, 0.0, 0.05);
    pr.var_half_spread(i) = unif(rng, 0.0, 0.05);
    p.signal.mean(i) = unif(rng, -0.5, 0.5);
    p.signal.variance(i) = unif(rng, 0.0, 0.2);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Numeric minimisers over volumes on {sum v = v*}, parametrised through the
// free coordinates. Each one is a standard textbook method.

struct Minimum {
  VectorXd volumes;
  double value = std::numeric_limits<double>::infinity();
};

using Fn = std::function<double(const VectorXd&)>;
using Grad = std::function<VectorXd(const VectorXd&)>;

/// Projected gradient with backtracking, projecting onto the affine set sum v = total.
inline Minimum projected_gradient(const Fn& f, const Grad& g, VectorXd v, double total, int max_iter = 200000) {
  auto project = [&](VectorXd y) { return VectorXd(y.array() - (y.sum() - total) / double(y.size())); };
  v = project(v);
  double fv = f(v), step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    VectorXd grad = g(v);
    grad.array() -= grad.mean();
    if (grad.norm() < 1e-13 * (1.0 + std::abs(fv))) break;
    step *= 2.0;
    VectorXd trial;
    double ft;
    while (true) {
      trial = project(v - step * grad);
      ft = f(trial);
      if (ft <= fv - 0.5 * step * grad.squaredNorm() || step < 1e-20) break;
      step *= 0.5;
    }
    if (!(ft < fv)) break;
    v = trial;
    fv = ft;
  }
  return {v, fv};
}

/// Maps free coordinates y (size N-1) to volumes with v_N = total - sum y.
inline VectorXd volumes_of(const VectorXd& y, double total) {
  VectorXd v(y.size() + 1);
  v.head(y.size()) = y;
  v(y.size()) = total - y.sum();
  return v;
}

inline VectorXd reduced_gradient(const VectorXd& gv) {
  const Eigen::Index m = gv.size() - 1;
  return gv.head(m).array() - gv(m);
}

/// Polak-Ribiere conjugate gradient with a secant line search (exact on quadratics).
inline Minimum conjugate_gradient(const Fn& f, const Grad& g, VectorXd y, double total, int max_iter = 20000) {
  auto F = [&](const VectorXd& z) { return f(volumes_of(z, total)); };
  auto G = [&](const VectorXd& z) { return reduced_gradient(g(volumes_of(z, total))); };
  VectorXd grad = G(y), dir = -grad;
  for (int it = 0; it < max_iter && grad.norm() > 1e-14 * (1.0 + std::abs(F(y))); ++it) {
    // secant on the directional derivative; exact when f is quadratic along dir
    double t0 = 0.0, t1 = 1e-3, d0 = grad.dot(dir), d1 = G(y + t1 * dir).dot(dir);
    for (int s = 0; s < 60 && std::abs(d1) > 1e-16 && d1 != d0; ++s) {
      const double t2 = t1 - d1 * (t1 - t0) / (d1 - d0);
      t0 = t1;
      d0 = d1;
      t1 = t2;
      d1 = G(y + t1 * dir).dot(dir);
    }
    y += t1 * dir;
    const VectorXd next = G(y);
    const double beta = std::max(0.0, next.dot(next - grad) / grad.squaredNorm());
    dir = -next + beta * dir;
    if (dir.dot(next) >= 0.0) dir = -next;
    grad = next;
  }
  return {volumes_of(y, total), F(y)};
}

/// BFGS with an Armijo backtracking line search.
inline Minimum bfgs(const Fn& f, const Grad& g, VectorXd y, double total, int max_iter = 5000) {
  auto F = [&](const VectorXd& z) { return f(volumes_of(z, total)); };
  auto G = [&](const VectorXd& z) { return reduced_gradient(g(volumes_of(z, total))); };
  const Eigen::Index m = y.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m);
  double fy = F(y);
  VectorXd grad = G(y);
  for (int it = 0; it < max_iter && grad.norm() > 1e-13 * (1.0 + std::abs(fy)); ++it) {
    VectorXd dir = -h * grad;
    if (dir.dot(grad) >= 0.0) {
      h.setIdentity();
      dir = -grad;
    }
    double t = 1.0, ft = F(y + dir);
    while (ft > fy + 1e-4 * t * grad.dot(dir) && t > 1e-20) {
      t *= 0.5;
      ft = F(y + t * dir);
    }
    const VectorXd s = t * dir;
    const VectorXd next = G(y + s);
    const VectorXd dg = next - grad;
    y += s;
    fy = ft;
    grad = next;
    const double sy = s.dot(dg);
    if (sy > 1e-300) {
      const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(m, m);
      h = (i - s * dg.transpose() / sy) * h * (i - dg * s.transpose() / sy) + s * s.transpose() / sy;
    }
  }
  return {volumes_of(y, total), fy};
}

/// Best of `starts` runs from random starting volumes.
template <typename Method>
Minimum multistart(Method method, const Fn& f, const Grad& g, double total, Eigen::Index n, int starts,
                   execlab::Rng& rng) {
  Minimum best;
  for (int s = 0; s < starts; ++s) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = unif(rng, -2.0, 2.0) * total / double(n) + total / double(n);
    Minimum m = method(f, g, v, total);
    if (m.value < best.value) best = m;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Finite differences

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Heat kernel with reflecting walls on [lo, hi], by the method of images.

inline double neumann_heat_kernel(double p, double q, double t, double diffusion, double lo, double hi,
                                  int images = 8) {
  const double len = hi - lo;
  const double var = 2.0 * diffusion * t;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
  double sum = 0.0;
  for (int k = -images; k <= images; ++k) {
    const double shift = 2.0 * k * len;
    const double direct = p - (q + shift);
    const double mirrored = p - (2.0 * lo - q + shift);
    sum += std::exp(-direct * direct / (2.0 * var)) + std::exp(-mirrored * mirrored / (2.0 * var));
  }
  return norm * sum;
}

// ---------------------------------------------------------------------------
// Flash crash: plain iteration of v_{t+1} = (N v_t + Vbar/T) rho/(1-rho).

inline std::vector<double> crash_iteration(double vbar, int slices, double rho, double rho0, double feedback) {
  std::vector<double> v(static_cast<std::size_t>(slices));
  const double per_slice = vbar / slices;
  v[0] = per_slice * rho0 / (1.0 - rho0);
  for (int t = 1; t < slices; ++t) v[t] = (feedback * v[t - 1] + per_slice) * rho / (1.0 - rho);
  return v;
}

}  // namespace oracle
