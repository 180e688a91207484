#pragma once

#include <span>
#include <vector>

namespace execlab::stats {

struct MeanSe {
  double mean = 0.0;
  double std_error = 0.0;
};

double mean(std::span<const double> xs);
/// Unbiased (n-1) sample variance; requires at least two values.
double variance(std::span<const double> xs);
MeanSe mean_and_se(std::span<const double> xs);

/// Asymptotic Kolmogorov survival function Q_KS(x) = 2 sum (-1)^{j-1} exp(-2 j^2 x^2).
double kolmogorov_survival(double x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS test of `xs` against the unit exponential distribution.
KsResult ks_exponential(std::vector<double> xs);
/// Two-sample KS test.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace execlab::stats
