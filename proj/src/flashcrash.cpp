#include "execlab/flashcrash.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace execlab::flashcrash {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

double odds(double rho) { return rho / (1.0 - rho); }

}  // namespace

void CrashParams::validate() const {
  require(std::isfinite(daily_volume) && daily_volume > 0.0, "daily_volume must be positive");
  require(n_slices >= 1, "n_slices must be at least 1");
  require(participation > 0.0 && participation < 1.0, "participation must lie in (0, 1)");
  if (initial_participation) {
    require(*initial_participation > 0.0 && *initial_participation < 1.0, "initial participation must lie in (0, 1)");
  }
  if (pass_through) require(*pass_through > 0.0 && *pass_through <= 1.0, "pass_through must lie in (0, 1]");
  require(hot_potato_rounds >= 0, "hot_potato_rounds must be nonnegative");
  if (echo_factor) {
    require(std::isfinite(*echo_factor) && *echo_factor >= 0.0, "echo_factor must be nonnegative");
  } else {
    require(pass_through.has_value(), "either echo_factor or pass_through must be given");
  }
}

double CrashParams::feedback() const {
  return echo_factor ? *echo_factor : echo_volume(1.0, *pass_through, hot_potato_rounds);
}

double CrashParams::growth_factor() const { return feedback() * odds(participation); }

double echo_volume(double v, double pass_through, int rounds) {
  require(pass_through > 0.0 && pass_through <= 1.0, "pass_through must lie in (0, 1]");
  require(rounds >= 0, "rounds must be nonnegative");
  const double keep = (1.0 - pass_through) * (1.0 - pass_through);
  double total = 0.0, leg = 1.0;
  for (int n = 1; n <= rounds; ++n) {
    leg *= keep;
    total += leg;
  }
  return total * v;
}

CrashPath simulate_crash(const CrashParams& params) {
  params.validate();
  const int t_max = params.n_slices;
  const double slice_volume = params.daily_volume / t_max;
  const double n_echo = params.feedback();
  const double rho_odds = odds(params.participation);

  CrashPath path;
  path.algo_volume.resize(t_max);
  path.echo_volume.resize(t_max);
  path.algo_volume(0) = slice_volume * odds(params.initial_participation.value_or(params.participation));
  for (int t = 0; t + 1 < t_max; ++t) {
    path.algo_volume(t + 1) = (n_echo * path.algo_volume(t) + slice_volume) * rho_odds;
  }
  if (params.pass_through && params.echo_factor) {
    for (int t = 0; t < t_max; ++t) {
      path.echo_volume(t) = echo_volume(path.algo_volume(t), *params.pass_through, params.hot_potato_rounds);
    }
  } else {
    path.echo_volume = n_echo * path.algo_volume;
  }
  path.total_volume = path.algo_volume + path.echo_volume;
  path.growth_factor = params.growth_factor();
  path.explosive = path.growth_factor > 1.0;
  return path;
}

double closed_form_volume(const CrashParams& params, int t) {
  params.validate();
  const double g = params.growth_factor();
  const double c = params.daily_volume / params.n_slices * odds(params.participation);
  const double v0 = params.daily_volume / params.n_slices * odds(params.initial_participation.value_or(params.participation));
  if (g == 1.0) return v0 + t * c;
  const double gt = std::pow(g, t);
  return gt * v0 + c * (1.0 - gt) / (1.0 - g);
}

}  // namespace execlab::flashcrash
