#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace execlab::market_data {

/// Per-slice intraday statistics consumed by the scheduler.
///
/// `volatility`, `expected_volume` and `half_spread` are per-slice means;
/// `mean_ratio`/`var_ratio` are moments of the per-day ratio sigma/V, which is
/// not the same thing as volatility/expected_volume (see ratio_gap).
struct SlicedMarketProfile {
  Eigen::VectorXd expected_volume;
  Eigen::VectorXd volatility;
  Eigen::VectorXd half_spread;
  Eigen::VectorXd mean_ratio;
  Eigen::VectorXd var_ratio;
  Eigen::VectorXd var_half_spread;

  Eigen::Index n_slices() const noexcept { return expected_volume.size(); }

  /// Throws std::invalid_argument when a field violates its invariant.
  void validate() const;

  /// Deterministic profile: ratio statistics derived from the point values, zero variances.
  static SlicedMarketProfile deterministic(const Eigen::VectorXd& volume, const Eigen::VectorXd& volatility,
                                           const Eigen::VectorXd& half_spread);
};

/// One trading day of observed per-slice data.
struct ProfileSample {
  std::string day;
  Eigen::VectorXd volume;
  Eigen::VectorXd volatility;
  Eigen::VectorXd half_spread;
};

/// Venue market shares on the simplex.
class MarketShares {
 public:
  explicit MarketShares(Eigen::VectorXd shares);

  const Eigen::VectorXd& shares() const noexcept { return shares_; }
  Eigen::Index size() const noexcept { return shares_.size(); }

 private:
  Eigen::VectorXd shares_;
};

/// Sample means, E(sigma/V) and unbiased variances from at least two days.
/// Days are reduced in sorted day-identifier order, so the result does not
/// depend on the order in which samples are supplied.
SlicedMarketProfile estimate_profile(std::vector<ProfileSample> samples);

/// E(sigma_n/V_n) - E(sigma_n)/E(V_n) per slice.
Eigen::VectorXd ratio_gap(const SlicedMarketProfile& profile);

/// Normalised Shannon entropy of market shares, in [0, 1].
double fragmentation_entropy(const MarketShares& shares);

/// Parses `day,slice,volume,volatility,half_spread` rows (header required).
std::vector<ProfileSample> read_samples_csv(std::istream& in);

}  // namespace execlab::market_data
