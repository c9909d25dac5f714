#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spidereval/data.hpp"

namespace spidereval::reliability {

/// Images x raters; missing cells are NaN.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(std::vector<std::string> images, std::vector<std::string> raters,
               std::vector<double> cells);

  /// One row per image, one column per participant (both sorted). Requires
  /// at most one record per (participant, image), i.e. first-trial filtered.
  static RatingMatrix from_table(const RatingsTable& table);

  std::size_t rows() const { return images_.size(); }
  std::size_t cols() const { return raters_.size(); }
  double at(std::size_t r, std::size_t c) const { return cells_[r * cols() + c]; }
  bool observed(std::size_t r, std::size_t c) const;
  std::size_t missing_count() const;
  const std::vector<std::string>& images() const { return images_; }
  const std::vector<std::string>& raters() const { return raters_; }

  /// Keeps the listed columns (by index); rows left with no observation are dropped.
  RatingMatrix select_raters(const std::vector<std::size_t>& columns) const;
  RatingMatrix drop_empty_rows() const;
  RatingMatrix complete_rows() const;

 private:
  std::vector<std::string> images_;
  std::vector<std::string> raters_;
  std::vector<double> cells_;
};

enum class MissingMode { Impute, CompleteCase };

MissingMode missing_mode_from_string(const std::string& name);
std::string to_string(MissingMode mode);

struct AnovaTable {
  std::size_t n = 0;  // images
  std::size_t k = 0;  // raters
  std::size_t imputed = 0;
  double bms = 0.0;   // between-images mean square
  double jms = 0.0;   // between-raters mean square
  double ems = 0.0;   // residual mean square
  double df_error = 0.0;
};

/// Two-way ANOVA without replication. Impute fills missing cells with
/// row mean + column mean - grand mean (from observed cells) and reduces the
/// residual df by the number of filled cells; CompleteCase drops any row
/// with a missing cell.
AnovaTable two_way_anova(const RatingMatrix& m, MissingMode mode = MissingMode::Impute);

/// ICC(2,k) = (BMS - EMS) / (BMS + (JMS - EMS) / n).
double icc2k(const AnovaTable& anova);
double icc2k(const RatingMatrix& m, MissingMode mode = MissingMode::Impute);

struct IccSizeSummary {
  std::size_t size = 0;
  std::vector<double> values;  // one per repetition
  double mean = 0.0;
  double sd = 0.0;
};

struct IccBootstrapReport {
  std::vector<IccSizeSummary> sizes;
  std::vector<std::string> warnings;
};

struct BootstrapOptions {
  std::vector<std::size_t> sizes{10, 20, 30, 40, 50, 60, 70, 80};
  int repetitions = 100;
  std::uint64_t seed = 0;
  MissingMode mode = MissingMode::Impute;
  int threads = 1;
};

/// For each size and repetition, draws raters without replacement on the
/// (seed, size, rep) substream and computes ICC(2,k) on that subset.
IccBootstrapReport bootstrap_icc(const RatingMatrix& m, const BootstrapOptions& options);

/// Wilson score interval.
std::pair<double, double> wilson_ci(long successes, long n, double level = 0.95);

}  // namespace spidereval::reliability
