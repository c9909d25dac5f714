#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spidereval/data.hpp"
#include "spidereval/harness.hpp"

namespace spidereval::error_analysis {

/// image -> mean over repetitions of |clipped prediction - target|.
using ImageErrors = std::map<std::string, double>;

ImageErrors image_errors(const harness::PredictionSet& ps,
                         const std::map<std::string, double>& targets);

struct KruskalResult {
  double h = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  std::size_t k = 0;
};

/// H with the tie correction H / (1 - sum(t^3 - t) / (N^3 - N)) unless
/// disabled; p from chi-square with k - 1 df.
KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups,
                             bool tie_correction = true);

/// (H - k + 1) / (N - k); may be negative.
double epsilon_squared(double h, std::size_t n, std::size_t k);

/// Benjamini-Hochberg step-up adjustment, returned in input order.
std::vector<double> bh_fdr(std::span<const double> p_values);

struct DunnPair {
  std::string group_a;
  std::string group_b;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double mean_rank_a = 0.0;
  double mean_rank_b = 0.0;
  double z = 0.0;
  double p = 1.0;      // two-sided
  double p_fdr = 1.0;  // BH within this set of pairs
};

/// All pairs (a < b lexicographically) with ranks from the pooled sample.
std::vector<DunnPair> dunn_posthoc(const std::map<std::string, std::vector<double>>& groups,
                                   bool tie_correction = true);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CategorySummary {
  std::string criterion;
  std::string category;
  std::size_t n = 0;
  double freq = 0.0;
  double mean_ae = 0.0;
  double sd_ae = kNaN;  // NaN when n < 2
  double median_ae = 0.0;
  double iqr_ae = 0.0;
  double share = 0.0;
  double delta = 0.0;  // share - freq
  bool descriptive_only = false;  // n below the minimum cell size
  double mean_ci_low = kNaN;
  double mean_ci_high = kNaN;
  double share_ci_low = kNaN;
  double share_ci_high = kNaN;
};

/// criterion -> category -> errors of the images in it.
std::map<std::string, std::map<std::string, std::vector<double>>> group_errors(
    const ImageErrors& errors, const CategoryTable& categories);

/// Descriptives per (criterion, category), criteria in canonical order and
/// categories sorted. Every image in `errors` must have a label.
std::vector<CategorySummary> category_summaries(const ImageErrors& errors,
                                                const CategoryTable& categories,
                                                std::size_t min_n = 10);

struct BootstrapCi {
  double mean_low = 0.0;
  double mean_high = 0.0;
  double share_low = 0.0;
  double share_high = 0.0;
};

/// Resamples images with replacement inside each category of `criterion`
/// (stratum sizes fixed); percentile intervals for the mean error and the
/// error share of every category.
std::map<std::string, BootstrapCi> stratified_bootstrap_ci(const ImageErrors& errors,
                                                           const CategoryTable& categories,
                                                           const std::string& criterion,
                                                           int replicates = 2000,
                                                           double level = 0.95,
                                                           std::uint64_t seed = 0, int threads = 1);

struct OmnibusResult {
  std::string criterion;
  double h = kNaN;
  double epsilon_sq = kNaN;
  double p = kNaN;
  double p_fdr = kNaN;
  bool significant = false;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t min_n = 0;     // smallest category
  std::string skip_reason;   // non-empty when the test was not run
  bool skipped() const { return !skip_reason.empty(); }
};

struct OmnibusOptions {
  std::size_t min_n = 10;
  double alpha = 0.05;
  bool tie_correction = true;
};

/// Kruskal-Wallis per criterion; criteria with a category smaller than
/// min_n (or fewer than two categories) are skipped. BH runs across the
/// tested criteria.
std::vector<OmnibusResult> omnibus_tests(const ImageErrors& errors, const CategoryTable& categories,
                                         const OmnibusOptions& options = {});

/// FDR-significant criteria by epsilon squared descending, ties by smaller
/// adjusted p; at most `count`.
std::vector<OmnibusResult> rank_top_criteria(std::span<const OmnibusResult> results,
                                             std::size_t count = 3);

struct PosthocRow {
  std::string criterion;
  DunnPair pair;
};

struct ErrorAnalysisOptions {
  OmnibusOptions omnibus;
  int bootstrap_replicates = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ErrorAnalysisReport {
  std::vector<CategorySummary> descriptives;
  std::vector<OmnibusResult> omnibus;
  std::vector<PosthocRow> posthoc;
  std::vector<OmnibusResult> top;
};

ErrorAnalysisReport run_error_analysis(const ImageErrors& errors, const CategoryTable& categories,
                                       const ErrorAnalysisOptions& options = {});

}  // namespace spidereval::error_analysis
