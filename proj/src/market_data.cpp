#include "execlab/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace execlab::market_data {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

void require_size(const Eigen::VectorXd& v, Eigen::Index n, const char* name) {
  require(v.size() == n, std::string(name) + " has length " + std::to_string(v.size()) + ", expected " +
                             std::to_string(n));
}

}  // namespace

void SlicedMarketProfile::validate() const {
  const Eigen::Index n = expected_volume.size();
  require(n >= 1, "profile needs at least one slice");
  require_size(volatility, n, "volatility");
  require_size(half_spread, n, "half_spread");
  require_size(mean_ratio, n, "mean_ratio");
  require_size(var_ratio, n, "var_ratio");
  require_size(var_half_spread, n, "var_half_spread");
  require((expected_volume.array() > 0.0).all(), "expected_volume must be positive");
  require((volatility.array() >= 0.0).all(), "volatility must be nonnegative");
  require((half_spread.array() >= 0.0).all(), "half_spread must be nonnegative");
  require((var_ratio.array() >= 0.0).all(), "var_ratio must be nonnegative");
  require((var_half_spread.array() >= 0.0).all(), "var_half_spread must be nonnegative");
  require(expected_volume.allFinite() && volatility.allFinite() && half_spread.allFinite() &&
              mean_ratio.allFinite() && var_ratio.allFinite() && var_half_spread.allFinite(),
          "profile contains non-finite values");
}

SlicedMarketProfile SlicedMarketProfile::deterministic(const Eigen::VectorXd& volume,
                                                       const Eigen::VectorXd& volatility,
                                                       const Eigen::VectorXd& half_spread) {
  SlicedMarketProfile p;
  p.expected_volume = volume;
  p.volatility = volatility;
  p.half_spread = half_spread;
  p.mean_ratio = volatility.cwiseQuotient(volume);
  p.var_ratio = Eigen::VectorXd::Zero(volume.size());
  p.var_half_spread = Eigen::VectorXd::Zero(volume.size());
  p.validate();
  return p;
}

MarketShares::MarketShares(Eigen::VectorXd shares) : shares_(std::move(shares)) {
  require(shares_.size() >= 1, "market shares must be non-empty");
  require((shares_.array() >= 0.0).all() && shares_.allFinite(), "market shares must be nonnegative");
  require(std::abs(shares_.sum() - 1.0) <= 1e-9, "market shares must sum to 1");
}

SlicedMarketProfile estimate_profile(std::vector<ProfileSample> samples) {
  require(samples.size() >= 2, "estimate_profile needs at least two samples");
  const Eigen::Index n = samples.front().volume.size();
  require(n >= 1, "samples must have at least one slice");
  for (const auto& s : samples) {
    require(s.volume.size() == n && s.volatility.size() == n && s.half_spread.size() == n,
            "sample '" + s.day + "' has a slice count different from " + std::to_string(n));
    require((s.volume.array() > 0.0).all(), "sample '" + s.day + "' has a non-positive volume");
    require((s.volatility.array() >= 0.0).all(), "sample '" + s.day + "' has a negative volatility");
    require((s.half_spread.array() >= 0.0).all(), "sample '" + s.day + "' has a negative half spread");
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const ProfileSample& a, const ProfileSample& b) { return a.day < b.day; });

  const double days = static_cast<double>(samples.size());
  Eigen::VectorXd vol_sum = Eigen::VectorXd::Zero(n), sig_sum = vol_sum, psi_sum = vol_sum, ratio_sum = vol_sum;
  for (const auto& s : samples) {
    vol_sum += s.volume;
    sig_sum += s.volatility;
    psi_sum += s.half_spread;
    ratio_sum += s.volatility.cwiseQuotient(s.volume);
  }
  SlicedMarketProfile p;
  p.expected_volume = vol_sum / days;
  p.volatility = sig_sum / days;
  p.half_spread = psi_sum / days;
  p.mean_ratio = ratio_sum / days;

  Eigen::VectorXd ratio_ss = Eigen::VectorXd::Zero(n), psi_ss = ratio_ss;
  for (const auto& s : samples) {
    ratio_ss += (s.volatility.cwiseQuotient(s.volume) - p.mean_ratio).cwiseAbs2();
    psi_ss += (s.half_spread - p.half_spread).cwiseAbs2();
  }
  p.var_ratio = ratio_ss / (days - 1.0);
  p.var_half_spread = psi_ss / (days - 1.0);
  p.validate();
  return p;
}

Eigen::VectorXd ratio_gap(const SlicedMarketProfile& profile) {
  profile.validate();
  return profile.mean_ratio - profile.volatility.cwiseQuotient(profile.expected_volume);
}

double fragmentation_entropy(const MarketShares& shares) {
  const auto& q = shares.shares();
  require(q.size() >= 2, "fragmentation entropy needs at least two venues");
  double h = 0.0;
  for (double x : q) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::clamp(h / std::log(static_cast<double>(q.size())), 0.0, 1.0);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  }
}

}  // namespace

std::vector<ProfileSample> read_samples_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  require(next_line(), "empty CSV input");
  require(line == "day,slice,volume,volatility,half_spread",
          "CSV header must be 'day,slice,volume,volatility,half_spread'");

  struct Row {
    double volume, volatility, half_spread;
  };
  std::map<std::string, std::map<long, Row>> by_day;
  while (next_line()) {
    const auto f = split_csv_line(line);
    require(f.size() == 5, "line " + std::to_string(line_no) + ": expected 5 fields");
    const double slice = parse_double(f[1], line_no);
    require(slice >= 0.0 && std::floor(slice) == slice,
            "line " + std::to_string(line_no) + ": slice must be a nonnegative integer");
    const Row row{parse_double(f[2], line_no), parse_double(f[3], line_no), parse_double(f[4], line_no)};
    require(row.volume > 0.0, "line " + std::to_string(line_no) + ": zero or negative volume");
    const bool inserted = by_day[f[0]].emplace(static_cast<long>(slice), row).second;
    require(inserted, "line " + std::to_string(line_no) + ": duplicate (day, slice)");
  }

  std::vector<ProfileSample> out;
  for (const auto& [day, rows] : by_day) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    require(rows.rbegin()->first == n - 1, "day '" + day + "' has missing slices");
    ProfileSample s{day, Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (const auto& [slice, r] : rows) {
      s.volume(slice) = r.volume;
      s.volatility(slice) = r.volatility;
      s.half_spread(slice) = r.half_spread;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace execlab::market_data
