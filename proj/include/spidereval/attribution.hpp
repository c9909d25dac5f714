#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spidereval/image_io.hpp"

namespace spidereval::attribution {

/// Element-wise mean of equally sized grids.
FloatGrid composite_heatmap(std::span<const FloatGrid> grids);

struct OverlapRecord {
  std::string image_id;
  double mu_in = 0.0;
  double mu_out = 0.0;
  double delta = 0.0;  // mu_in - mu_out
  double mask_fraction = 0.0;
};

/// Mean raw activation inside and outside the mask. The mask must contain
/// both classes and match the grid size.
OverlapRecord overlap_stats(const FloatGrid& heatmap, const BinaryMask& mask,
                            std::string image_id = {});

struct PairedTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double t = 0.0;
  double df = 0.0;
  double one_sided_p = 0.0;  // H1: mean difference > 0
  double cohen_d = 0.0;      // mean_diff / sd_diff
};

/// One-sided paired t-test on the differences (n >= 2, sd > 0).
PairedTestResult paired_one_sided_t(std::span<const double> differences);
PairedTestResult paired_one_sided_t(std::span<const OverlapRecord> records);

struct RepresentativeExamples {
  std::string max_delta;
  std::string nearest_zero;
  std::string min_delta;
  std::size_t candidates = 0;
};

/// argmax delta, argmin |delta|, argmin delta; ties go to the smaller id.
/// With `observed_fear`, only images whose fear is >= `fear_threshold` are
/// candidates.
RepresentativeExamples representative_examples(
    std::span<const OverlapRecord> records,
    const std::map<std::string, double>* observed_fear = nullptr, double fear_threshold = 40.0);

struct DeltaFearCorrelation {
  std::size_t n = 0;
  double pearson = 0.0;
  double spearman = 0.0;
};

/// Correlation between per-image delta and observed fear over images present in both.
DeltaFearCorrelation delta_fear_correlation(std::span<const OverlapRecord> records,
                                            const std::map<std::string, double>& observed_fear);

}  // namespace spidereval::attribution
