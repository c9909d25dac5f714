#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Descriptive statistics shared by the analysis modules.
namespace spidereval::stats {

/// Neumaier-compensated running sum. Order-independent to within rounding
/// of the compensated result, which is what the reductions rely on.
class CompensatedSum {
 public:
  void add(double value);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double sum(std::span<const double> values);
double mean(std::span<const double> values);
/// Sample variance (n - 1 denominator). Requires n >= 2.
double variance(std::span<const double> values);
double sd(std::span<const double> values);

double median(std::span<const double> values);

/// Quantile by linear interpolation between order statistics ("type 7").
double quantile(std::span<const double> values, double p);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

Quartiles quartiles(std::span<const double> values);

/// 1-based ranks; tied values share the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Sizes of every group of tied values (groups of size 1 included).
std::vector<std::size_t> tie_group_sizes(std::span<const double> values);

/// Pearson correlation. Throws ComputationError when either input has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace spidereval::stats
