#pragma once

#include <Eigen/Core>

#include <optional>

namespace execlab::flashcrash {

/// Idealised hot-potato model of a percentage-of-volume sell algorithm.
struct CrashParams {
  double daily_volume = 100.0;  // V-bar
  int n_slices = 10;            // T
  double participation = 0.08;  // rho, used from slice 1 on
  std::optional<double> initial_participation;  // rho_0 for slice 0; defaults to rho
  /// Inter-slice feedback multiplier N. When absent it is tied to the echo sum
  /// sum_{n=1..rounds} (1-q)^(2n), which then requires pass_through.
  std::optional<double> echo_factor;
  std::optional<double> pass_through;  // q
  int hot_potato_rounds = 1;

  void validate() const;
  double feedback() const;
  /// N * rho / (1 - rho); the recursion is explosive when this exceeds 1.
  double growth_factor() const;
};

struct CrashPath {
  Eigen::VectorXd algo_volume;
  Eigen::VectorXd echo_volume;
  Eigen::VectorXd total_volume;
  double growth_factor = 0.0;
  bool explosive = false;
};

/// Extra volume traded by market makers re-hedging v across `rounds` hot-potato legs.
double echo_volume(double v, double pass_through, int rounds);

CrashPath simulate_crash(const CrashParams& params);

/// Explicit solution of v_{t+1} = g v_t + c, v_0 given.
double closed_form_volume(const CrashParams& params, int t);

}  // namespace execlab::flashcrash
