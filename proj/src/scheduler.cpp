#include "execlab/scheduler.hpp"

#include "execlab/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace execlab::scheduler {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

void require_linear_impact(const ExecutionProblem& problem, const char* who) {
  require(problem.impact.gamma == 1.0, std::string(who) + " requires gamma = 1 (linear impact)");
}

void require_matching(const Trajectory& traj, const ExecutionProblem& problem) {
  require(traj.n_slices() == problem.n_slices(), "trajectory has " + std::to_string(traj.n_slices()) +
                                                     " slices, problem has " + std::to_string(problem.n_slices()));
}

/// Per-slice coefficients of a criterion written over volumes:
///   c + sum b_n v_n + k_n |v_n|^p + e_n v_n^2 + r_n v_n^4 + s_n x_n^2.
struct VolumeTerms {
  double constant_per_share = 0.0;
  double power = 2.0;
  Eigen::VectorXd linear, impact, extra_quadratic, quartic, risk;
};

VolumeTerms volume_terms(Criterion criterion, const ExecutionProblem& problem) {
  const auto& p = problem.profile;
  const auto& im = problem.impact;
  const double lambda = problem.risk_aversion;
  const Eigen::Index n = problem.n_slices();
  VolumeTerms t;
  t.constant_per_share = problem.initial_price;
  t.power = im.gamma + 1.0;
  t.linear = im.a * p.half_spread - problem.signal.mean;
  t.extra_quadratic = Eigen::VectorXd::Zero(n);
  t.quartic = Eigen::VectorXd::Zero(n);
  t.risk = Eigen::VectorXd::Zero(n);
  switch (criterion) {
    case Criterion::expectation:
      t.impact = im.kappa * p.volatility.array() / p.expected_volume.array().pow(im.gamma);
      break;
    case Criterion::mean_variance:
      t.impact = im.kappa * p.volatility.array() / p.expected_volume.array().pow(im.gamma);
      t.extra_quadratic = lambda * problem.signal.variance;
      t.risk = lambda * p.volatility.cwiseAbs2();
      break;
    case Criterion::statistical:
      require_linear_impact(problem, "statistical_cost");
      t.impact = im.kappa * p.mean_ratio;
      t.extra_quadratic =
          lambda * (im.a * im.a * p.var_half_spread.array() + problem.signal.variance.array() + im.var_noise).matrix();
      t.quartic = lambda * im.kappa * im.kappa * p.var_ratio;
      t.risk = lambda * p.volatility.cwiseAbs2();
      break;
  }
  return t;
}

double impact_power(double v, double power) { return power == 2.0 ? v * v : std::pow(std::abs(v), power); }

double evaluate(const VolumeTerms& t, const Trajectory& traj) {
  const Eigen::VectorXd v = traj.volumes();
  const auto& x = traj.remaining();
  double f = t.constant_per_share * traj.total_quantity();
  for (Eigen::Index n = 0; n < v.size(); ++n) {
    const double v2 = v(n) * v(n);
    f += t.linear(n) * v(n) + t.impact(n) * impact_power(v(n), t.power) + t.extra_quadratic(n) * v2 +
         t.quartic(n) * v2 * v2 + t.risk(n) * x(n) * x(n);
  }
  return f;
}

/// Gradient with respect to the volumes (x_0 moves with them).
Eigen::VectorXd volume_gradient(const VolumeTerms& t, const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  Eigen::VectorXd x(n + 1);
  x(n) = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) x(i) = x(i + 1) + v(i);
  Eigen::VectorXd g(n);
  double risk_prefix = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    risk_prefix += 2.0 * t.risk(k) * x(k);
    const double a = std::abs(v(k));
    const double sgn = v(k) > 0.0 ? 1.0 : (v(k) < 0.0 ? -1.0 : 0.0);
    const double impact_slope = t.power == 2.0 ? 2.0 * v(k) : t.power * std::pow(a, t.power - 1.0) * sgn;
    g(k) = t.constant_per_share + t.linear(k) + t.impact(k) * impact_slope + 2.0 * t.extra_quadratic(k) * v(k) +
           4.0 * t.quartic(k) * v(k) * v(k) * v(k) + risk_prefix;
  }
  return g;
}

Eigen::VectorXd project_scaled_simplex(const Eigen::VectorXd& y, double total) {
  const Eigen::Index n = y.size();
  std::vector<double> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumulative += u[i];
    const double candidate = (cumulative - total) / static_cast<double>(i + 1);
    if (u[i] - candidate > 0.0) theta = candidate;
  }
  return (y.array() - theta).max(0.0).matrix();
}

Eigen::VectorXd project_affine(const Eigen::VectorXd& y, double total) {
  return y.array() - (y.sum() - total) / static_cast<double>(y.size());
}

}  // namespace

void ImpactParams::validate() const {
  require(std::isfinite(a) && std::isfinite(kappa) && std::isfinite(gamma) && std::isfinite(var_noise),
          "impact parameters must be finite");
  require(kappa > 0.0, "kappa must be positive");
  require(gamma >= 0.0, "gamma must be nonnegative");
  require(var_noise >= 0.0, "var_noise must be nonnegative");
}

void ExecutionProblem::validate() const {
  profile.validate();
  impact.validate();
  const Eigen::Index n = n_slices();
  require(std::isfinite(total_quantity) && total_quantity >= 0.0, "total_quantity must be nonnegative");
  require(signal.mean.size() == n && signal.variance.size() == n, "arbitrage signal length must match the profile");
  require(signal.mean.allFinite() && signal.variance.allFinite(), "arbitrage signal must be finite");
  require((signal.variance.array() >= 0.0).all(), "arbitrage signal variance must be nonnegative");
  require(std::isfinite(risk_aversion) && risk_aversion >= 0.0, "risk_aversion must be nonnegative");
  require(std::isfinite(initial_price), "initial_price must be finite");
}

Trajectory Trajectory::from_remaining(Eigen::VectorXd remaining) {
  require(remaining.size() >= 2, "trajectory needs at least one slice");
  require(remaining(remaining.size() - 1) == 0.0, "trajectory must end with zero remaining quantity");
  require(remaining.allFinite(), "trajectory must be finite");
  return Trajectory(std::move(remaining));
}

Trajectory Trajectory::from_volumes(const Eigen::VectorXd& volumes) {
  const Eigen::Index n = volumes.size();
  require(n >= 1, "trajectory needs at least one slice");
  Eigen::VectorXd x(n + 1);
  x(n) = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) x(i) = x(i + 1) + volumes(i);
  return from_remaining(std::move(x));
}

Trajectory Trajectory::from_interior(double total_quantity, const Eigen::VectorXd& interior) {
  Eigen::VectorXd x(interior.size() + 2);
  x(0) = total_quantity;
  x.segment(1, interior.size()) = interior;
  x(x.size() - 1) = 0.0;
  return from_remaining(std::move(x));
}

Eigen::VectorXd Trajectory::volumes() const {
  const Eigen::Index n = n_slices();
  return remaining_.head(n) - remaining_.tail(n);
}

Eigen::VectorXd Trajectory::interior() const { return remaining_.segment(1, std::max<Eigen::Index>(n_slices() - 1, 0)); }

Criterion parse_criterion(const std::string& name) {
  if (name == "expectation") return Criterion::expectation;
  if (name == "mv") return Criterion::mean_variance;
  if (name == "statistical") return Criterion::statistical;
  throw std::invalid_argument("unknown criterion '" + name + "' (expected expectation|mv|statistical)");
}

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::expectation: return "expectation";
    case Criterion::mean_variance: return "mv";
    case Criterion::statistical: return "statistical";
  }
  return "?";
}

Eigen::VectorXd impact_weights(const SlicedMarketProfile& profile) {
  profile.validate();
  require((profile.volatility.array() > 0.0).all(), "impact weights need strictly positive volatility");
  const Eigen::VectorXd inv = profile.expected_volume.cwiseQuotient(profile.volatility);
  return inv / inv.sum();
}

double expected_cost(const Trajectory& traj, const ExecutionProblem& problem) {
  return cost(Criterion::expectation, traj, problem);
}

double mv_cost(const Trajectory& traj, const ExecutionProblem& problem) {
  return cost(Criterion::mean_variance, traj, problem);
}

double statistical_cost(const Trajectory& traj, const ExecutionProblem& problem) {
  return cost(Criterion::statistical, traj, problem);
}

double cost(Criterion criterion, const Trajectory& traj, const ExecutionProblem& problem) {
  problem.validate();
  require_matching(traj, problem);
  return evaluate(volume_terms(criterion, problem), traj);
}

ScheduleObjective<double> objective(Criterion criterion, const ExecutionProblem& problem) {
  problem.validate();
  require_linear_impact(problem, "objective");
  const VolumeTerms t = volume_terms(criterion, problem);
  ScheduleObjective<double> f;
  f.constant = problem.initial_price * problem.total_quantity;
  f.linear = t.linear;
  f.quadratic = t.impact + t.extra_quadratic;
  f.quartic = t.quartic;
  f.risk = t.risk;
  return f;
}

Trajectory solve_expectation(const ExecutionProblem& problem) {
  problem.validate();
  require_linear_impact(problem, "solve_expectation");
  const auto& p = problem.profile;
  const Eigen::VectorXd w = impact_weights(p);
  const double inverse_impact_sum = p.expected_volume.cwiseQuotient(p.volatility).sum();
  const double scale = inverse_impact_sum / (2.0 * problem.impact.kappa);
  const Eigen::VectorXd& ea = problem.signal.mean;
  const Eigen::VectorXd& psi = p.half_spread;
  const Eigen::VectorXd tilt =
      (ea.array() - w.dot(ea)) - problem.impact.a * (psi.array() - w.dot(psi));
  const Eigen::VectorXd v = w.cwiseProduct((problem.total_quantity + scale * tilt.array()).matrix());
  return Trajectory::from_volumes(v);
}

SignalSensitivities signal_sensitivities(const ExecutionProblem& problem) {
  problem.validate();
  require_linear_impact(problem, "signal_sensitivities");
  const auto& p = problem.profile;
  require((p.volatility.array() > 0.0).all(), "signal sensitivities need strictly positive volatility");
  // v_n = h_n (mu - b_n), mu = (v* + sum h b) / H, h_n = V_n / (2 kappa sigma_n), b = a psi - E A.
  const Eigen::VectorXd h = p.expected_volume.cwiseQuotient(p.volatility) / (2.0 * problem.impact.kappa);
  const double total = h.sum();
  Eigen::MatrixXd d_b = h * h.transpose() / total;
  d_b.diagonal() -= h;
  SignalSensitivities s;
  s.d_volume_d_signal = -d_b;
  s.d_volume_d_spread = problem.impact.a * d_b;
  return s;
}

Trajectory solve_mv(const ExecutionProblem& problem) {
  const ScheduleObjective<double> f = objective(Criterion::mean_variance, problem);
  const Eigen::Index n = f.n_slices();
  Trajectory base = Trajectory::from_interior(problem.total_quantity, Eigen::VectorXd::Zero(n - 1));
  if (n == 1) return base;
  Eigen::VectorXd diag, off;
  f.interior_hessian(base.remaining(), diag, off);
  const Eigen::VectorXd g = f.interior_gradient(base.remaining());
  const auto step = solve_spd_tridiagonal<double>(diag, off, -g);
  if (!step) throw SolverError("infeasible parameters: mean-variance system is not positive definite");
  return Trajectory::from_interior(problem.total_quantity, *step);
}

double mv_recurrence_residual(const Trajectory& traj, const ExecutionProblem& problem) {
  require_matching(traj, problem);
  const ScheduleObjective<double> f = objective(Criterion::mean_variance, problem);
  const auto& x = traj.remaining();
  double worst = 0.0;
  for (Eigen::Index j = 1; j < f.n_slices(); ++j) {
    const double d_prev = x(j - 1) - x(j);
    const double d_next = x(j) - x(j + 1);
    const double residual = f.slice_slope(j, d_next) - f.slice_slope(j - 1, d_prev) + 2.0 * f.risk(j) * x(j);
    const double scale = std::abs(f.linear(j)) + std::abs(f.linear(j - 1)) +
                         2.0 * std::abs(f.quadratic(j) * d_next) + 2.0 * std::abs(f.quadratic(j - 1) * d_prev) +
                         2.0 * std::abs(f.risk(j) * x(j));
    worst = std::max(worst, std::abs(residual) / (scale > 0.0 ? scale : 1.0));
  }
  return worst;
}

SolveReport solve_statistical_report(const ExecutionProblem& problem, const SolveOptions& options) {
  const ScheduleObjective<double> f = objective(Criterion::statistical, problem);
  const Eigen::Index n = f.n_slices();
  require((f.quadratic.array() > 0.0).all(), "statistical criterion needs positive quadratic coefficients");

  // Start from the quadratic part's minimiser, then damped Newton on the cubic system.
  ScheduleObjective<double> quadratic_part = f;
  quadratic_part.quartic.setZero();
  Eigen::VectorXd x = Trajectory::from_interior(problem.total_quantity, Eigen::VectorXd::Zero(n - 1)).remaining();
  Eigen::VectorXd diag, off;
  if (n > 1) {
    quadratic_part.interior_hessian(x, diag, off);
    const auto start = solve_spd_tridiagonal<double>(diag, off, -quadratic_part.interior_gradient(x));
    if (!start) throw SolverError("infeasible parameters: statistical system is not positive definite");
    x.segment(1, n - 1) = *start;
  }

  SolveReport report;
  double value = f.value(x);
  Eigen::VectorXd g = f.interior_gradient(x);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (g.norm() <= options.gradient_tolerance * (1.0 + std::abs(value))) break;
    f.interior_hessian(x, diag, off);
    const auto dx = solve_spd_tridiagonal<double>(diag, off, -g);
    if (!dx) throw SolverError("Newton system lost positive definiteness", g.norm());
    const double slope = g.dot(*dx);
    double t = 1.0;
    Eigen::VectorXd trial = x;
    double trial_value = value;
    for (int ls = 0; ls < 60; ++ls) {
      trial.segment(1, n - 1) = x.segment(1, n - 1) + t * *dx;
      trial_value = f.value(trial);
      if (trial_value <= value + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (trial_value > value) {
      // Rounding floor reached: the objective can no longer resolve descent.
      break;
    }
    x = trial;
    value = trial_value;
    g = f.interior_gradient(x);
  }
  report.trajectory = Trajectory::from_remaining(x);
  report.objective = value;
  report.gradient_norm = g.norm();
  report.iterations = it;
  if (report.gradient_norm > options.gradient_tolerance * (1.0 + std::abs(value))) {
    throw SolverError("statistical solve did not converge after " + std::to_string(it) +
                          " iterations; gradient norm " + std::to_string(report.gradient_norm),
                      report.gradient_norm);
  }
  return report;
}

Trajectory solve_statistical(const ExecutionProblem& problem, const SolveOptions& options) {
  return solve_statistical_report(problem, options).trajectory;
}

SolveReport solve_numeric(Criterion criterion, const ExecutionProblem& problem, const NumericOptions& options) {
  problem.validate();
  const VolumeTerms t = volume_terms(criterion, problem);
  const Eigen::Index n = problem.n_slices();
  const double total = problem.total_quantity;
  auto project = [&](const Eigen::VectorXd& y) {
    return options.nonnegative ? project_scaled_simplex(y, total) : project_affine(y, total);
  };
  auto value = [&](const Eigen::VectorXd& v) { return evaluate(t, Trajectory::from_volumes(v)); };

  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, total / static_cast<double>(n));
  Eigen::VectorXd y = v;
  double fv = value(v);
  double lipschitz = 1.0;
  double momentum = 1.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::VectorXd gy = volume_gradient(t, y);
    const double fy = value(y);
    Eigen::VectorXd next;
    double f_next = 0.0;
    for (int bt = 0; bt < 200; ++bt) {
      next = project(y - gy / lipschitz);
      f_next = value(next);
      const Eigen::VectorXd d = next - y;
      if (f_next <= fy + gy.dot(d) + 0.5 * lipschitz * d.squaredNorm() + 1e-15 * (1.0 + std::abs(fy))) break;
      lipschitz *= 2.0;
    }
    const double step = (next - v).norm();
    if (f_next > fv) {
      // Restart the momentum when the accelerated sequence stops descending.
      y = v;
      momentum = 1.0;
      if (step <= options.tolerance * (1.0 + v.norm())) break;
      continue;
    }
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = next + ((momentum - 1.0) / next_momentum) * (next - v);
    momentum = next_momentum;
    v = next;
    fv = f_next;
    lipschitz *= 0.9;
    if (step <= options.tolerance * (1.0 + v.norm())) break;
  }
  SolveReport report;
  report.trajectory = Trajectory::from_volumes(project(v));
  report.objective = value(report.trajectory.volumes());
  report.gradient_norm = std::numeric_limits<double>::quiet_NaN();
  report.iterations = it;
  return report;
}

Trajectory solve(Criterion criterion, const ExecutionProblem& problem, bool nonnegative) {
  problem.validate();
  if (nonnegative || problem.impact.gamma != 1.0) {
    NumericOptions opt;
    opt.nonnegative = nonnegative;
    return solve_numeric(criterion, problem, opt).trajectory;
  }
  switch (criterion) {
    case Criterion::expectation: return solve_expectation(problem);
    case Criterion::mean_variance: return solve_mv(problem);
    case Criterion::statistical: return solve_statistical(problem);
  }
  throw std::logic_error("unreachable");
}

ExecutionProblem append_final_slice(const ExecutionProblem& problem) {
  problem.validate();
  auto extend = [](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size() + 1);
    out.head(v.size()) = v;
    out(v.size()) = v(v.size() - 1);
    return out;
  };
  ExecutionProblem e = problem;
  auto& p = e.profile;
  p.expected_volume = extend(p.expected_volume);
  p.volatility = extend(p.volatility);
  p.half_spread = extend(p.half_spread);
  p.mean_ratio = extend(p.mean_ratio);
  p.var_ratio = extend(p.var_ratio);
  p.var_half_spread = extend(p.var_half_spread);
  e.signal.mean = extend(e.signal.mean);
  e.signal.variance = extend(e.signal.variance);
  return e;
}

Greeks greeks(const ExecutionProblem& problem) {
  const SolveReport opt = solve_statistical_report(problem);
  const Eigen::VectorXd d = opt.trajectory.volumes();
  const auto& p = problem.profile;
  const double lambda = problem.risk_aversion;
  const double kappa = problem.impact.kappa;

  Greeks g;
  g.optimal_cost = opt.objective;
  g.psi = problem.impact.a * d;
  g.lambda = p.mean_ratio.dot(d.cwiseAbs2()) + 2.0 * lambda * kappa * p.var_ratio.dot(d.array().pow(4).matrix());
  g.phi = solve_statistical_report(append_final_slice(problem)).objective - opt.objective;
  return g;
}

}  // namespace execlab::scheduler
