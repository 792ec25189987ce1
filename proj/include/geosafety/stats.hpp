#pragma once

#include <span>
#include <utility>
#include <vector>

namespace geosafety {

/// Quantile of ascending-sorted values with linear interpolation between
/// order statistics: position 1 + q (n - 1) in 1-based ranks.
double sorted_quantile(std::span<const double> sorted, double q);

/// Percentile interval at `level`: quantiles (1 - level) / 2 and
/// 1 - (1 - level) / 2. Throws EmptyInput / InvalidArgument.
std::pair<double, double> percentile_interval(std::span<const double> samples, double level);

struct FiveNumberSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;

  friend bool operator==(const FiveNumberSummary&, const FiveNumberSummary&) = default;
};

/// Quartiles by the same interpolation rule. Throws EmptyInput.
FiveNumberSummary five_number_summary(std::span<const double> values);

double mean(std::span<const double> values);
/// Sample standard deviation (denominator n - 1); 0 for a single value.
double sample_sd(std::span<const double> values);

}  // namespace geosafety
