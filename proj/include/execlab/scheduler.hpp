#pragma once

#include "execlab/market_data.hpp"
#include "execlab/schedule_objective.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace execlab::scheduler {

using market_data::SlicedMarketProfile;

/// Temporary impact a*psi + kappa*sigma*(v/V)^gamma, plus an i.i.d. residual of variance var_noise.
struct ImpactParams {
  double a = 0.0;
  double kappa = 1.0;
  double gamma = 1.0;
  double var_noise = 0.0;

  void validate() const;
};

/// Expected arbitrage gain E A_n and its variance V A_n per slice.
struct ArbitrageSignal {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;

  static ArbitrageSignal zero(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  }
};

struct ExecutionProblem {
  double total_quantity = 0.0;
  SlicedMarketProfile profile;
  ImpactParams impact;
  ArbitrageSignal signal;
  double risk_aversion = 0.0;
  double initial_price = 0.0;

  Eigen::Index n_slices() const noexcept { return profile.n_slices(); }
  void validate() const;
};

/// Remaining quantity to buy, x_0 = v* down to x_N = 0; slice n trades x_n - x_{n+1}.
class Trajectory {
 public:
  Trajectory() = default;

  /// Takes x_0..x_N; the last entry must be exactly 0.
  static Trajectory from_remaining(Eigen::VectorXd remaining);
  /// Builds x from per-slice volumes; x_0 is their sum.
  static Trajectory from_volumes(const Eigen::VectorXd& volumes);
  /// Interior unknowns x_1..x_{N-1} with the fixed end points.
  static Trajectory from_interior(double total_quantity, const Eigen::VectorXd& interior);

  const Eigen::VectorXd& remaining() const noexcept { return remaining_; }
  Eigen::VectorXd volumes() const;
  Eigen::VectorXd interior() const;
  Eigen::Index n_slices() const noexcept { return remaining_.size() - 1; }
  double total_quantity() const { return remaining_(0); }

 private:
  explicit Trajectory(Eigen::VectorXd remaining) : remaining_(std::move(remaining)) {}
  Eigen::VectorXd remaining_;
};

enum class Criterion { expectation, mean_variance, statistical };

Criterion parse_criterion(const std::string& name);
std::string to_string(Criterion c);

/// Raised when the optimisation problem is not positive definite or a solve does not converge.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual = 0.0) : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// w_n proportional to V_n/sigma_n, summing to one.
Eigen::VectorXd impact_weights(const SlicedMarketProfile& profile);

/// Conditional expected cost. Uses kappa*sigma/V^gamma*|v|^(gamma+1) for the impact term.
double expected_cost(const Trajectory& traj, const ExecutionProblem& problem);
/// Conditional mean-variance cost.
double mv_cost(const Trajectory& traj, const ExecutionProblem& problem);
/// Unconditional mean-variance cost built from the profile's distributional statistics (gamma = 1 only).
double statistical_cost(const Trajectory& traj, const ExecutionProblem& problem);
double cost(Criterion criterion, const Trajectory& traj, const ExecutionProblem& problem);

/// The criterion as a separable objective in x (gamma = 1 only).
ScheduleObjective<double> objective(Criterion criterion, const ExecutionProblem& problem);

/// Closed-form minimiser of expected_cost under sum v_n = v*.
Trajectory solve_expectation(const ExecutionProblem& problem);

struct SignalSensitivities {
  Eigen::MatrixXd d_volume_d_signal;  // (n, m) = dv_n / dE A_m
  Eigen::MatrixXd d_volume_d_spread;  // (n, m) = dv_n / dpsi_m

  Eigen::VectorXd signal_diagonal() const { return d_volume_d_signal.diagonal(); }
  Eigen::VectorXd spread_diagonal() const { return d_volume_d_spread.diagonal(); }
};

/// Jacobians of the solve_expectation volumes with respect to E A and psi.
SignalSensitivities signal_sensitivities(const ExecutionProblem& problem);

/// Minimiser of mv_cost via the tridiagonal first-order system.
Trajectory solve_mv(const ExecutionProblem& problem);

/// Largest first-order residual of the mean-variance recurrence, relative to
/// the size of its terms. Zero (up to rounding) at the solve_mv optimum.
double mv_recurrence_residual(const Trajectory& traj, const ExecutionProblem& problem);

struct SolveOptions {
  double gradient_tolerance = 1e-8;  // relative to 1 + |f|
  int max_iterations = 10000;
};

struct SolveReport {
  Trajectory trajectory;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton on the cubic first-order system of statistical_cost.
SolveReport solve_statistical_report(const ExecutionProblem& problem, const SolveOptions& options = {});
Trajectory solve_statistical(const ExecutionProblem& problem, const SolveOptions& options = {});

struct NumericOptions {
  bool nonnegative = true;
  double tolerance = 1e-12;  // on the relative step length
  int max_iterations = 200000;
};

/// First-order numeric minimisation over volumes, on {sum v = v*} and
/// optionally v >= 0. Handles any gamma >= 0 for the expectation and
/// mean-variance criteria.
SolveReport solve_numeric(Criterion criterion, const ExecutionProblem& problem, const NumericOptions& options = {});

/// Dispatches to the closed-form/Newton solvers, or to solve_numeric when
/// volumes must be nonnegative or gamma != 1.
Trajectory solve(Criterion criterion, const ExecutionProblem& problem, bool nonnegative = false);

struct Greeks {
  Eigen::VectorXd psi;  // dC/dE psi_l
  double phi = 0.0;     // C*(N+1) - C*(N)
  double lambda = 0.0;  // dC/dkappa
  double optimal_cost = 0.0;
  static constexpr const char* phi_method =
      "forward difference C*(N+1) - C*(N); appended slice copies the final slice's statistics";
};

/// Trading Greeks of the optimal statistical cost (envelope partials for psi and kappa).
Greeks greeks(const ExecutionProblem& problem);

/// Problem with one extra slice copying the final slice's statistics.
ExecutionProblem append_final_slice(const ExecutionProblem& problem);

}  // namespace execlab::scheduler
