#include "geosafety/stats.hpp"

#include <algorithm>
#include <cmath>

#include "geosafety/error.hpp"

namespace geosafety {

namespace {

std::vector<double> sorted_copy(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite sample");
  }
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::EmptyInput, "quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::InvalidArgument, "quantile outside [0, 1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::pair<double, double> percentile_interval(std::span<const double> samples, double level) {
  if (samples.empty()) throw Error(ErrorKind::EmptyInput, "percentile interval of empty sample");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "confidence level must lie in (0, 1)");
  }
  const auto sorted = sorted_copy(samples);
  const double alpha = (1.0 - level) / 2.0;
  return {sorted_quantile(sorted, alpha), sorted_quantile(sorted, 1.0 - alpha)};
}

FiveNumberSummary five_number_summary(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "five-number summary of empty sample");
  const auto sorted = sorted_copy(values);
  return {sorted.front(), sorted_quantile(sorted, 0.25), sorted_quantile(sorted, 0.5),
          sorted_quantile(sorted, 0.75), sorted.back()};
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "mean of empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace geosafety
