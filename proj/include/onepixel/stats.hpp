#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace onepixel {

// Five-number summary plus box-plot geometry for one series of values.
//
// Conventions (pinned here and unit-tested, since "quartile" is ambiguous):
//   - median: midpoint convention (mean of the two middle values for even n)
//   - q1/q3: median of the lower/upper half of the sorted data, with the
//     median element itself excluded from both halves when n is odd
//     (the exclusive-median method)
//   - std: population standard deviation (divide by n)
//   - whiskers: farthest data points within [q1 - 1.5*IQR, q3 + 1.5*IQR];
//     outliers are the points beyond the whiskers
struct SummaryStats {
  std::size_t count = 0;
  double min = 0;
  double max = 0;
  double mean = 0;
  double median = 0;
  double std_dev = 0;
  double q1 = 0;
  double q3 = 0;
  double whisker_low = 0;
  double whisker_high = 0;
  std::vector<double> outliers;

  friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

namespace detail {

// Median of sorted[first, last).
inline double median_of_range(const std::vector<double>& sorted,
                              std::size_t first, std::size_t last) {
  const std::size_t n = last - first;
  const std::size_t mid = first + n / 2;
  if (n % 2 == 1) return sorted[mid];
  return (sorted[mid - 1] + sorted[mid]) / 2.0;
}

}  // namespace detail

inline SummaryStats summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty input");
  std::sort(values.begin(), values.end());

  SummaryStats s;
  s.count = values.size();
  s.min = values.front();
  s.max = values.back();

  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.count);

  double sq = 0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(sq / static_cast<double>(s.count));

  const std::size_t n = s.count;
  s.median = detail::median_of_range(values, 0, n);
  if (n == 1) {
    s.q1 = s.q3 = values[0];
  } else {
    // Halves exclude the median element when n is odd.
    s.q1 = detail::median_of_range(values, 0, n / 2);
    s.q3 = detail::median_of_range(values, (n + 1) / 2, n);
  }

  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.max;
  s.whisker_high = s.min;
  for (double v : values) {
    if (v >= lo_fence && v <= hi_fence) {
      s.whisker_low = std::min(s.whisker_low, v);
      s.whisker_high = std::max(s.whisker_high, v);
    } else {
      s.outliers.push_back(v);
    }
  }
  return s;
}

}  // namespace onepixel
