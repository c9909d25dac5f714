#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "spidereval/data.hpp"

namespace spidereval::qc {

/// image_id -> median rating across all participants.
using ConsensusVector = std::map<std::string, double>;

ConsensusVector consensus_median(const RatingsTable& table);

/// Spearman rank correlation: Pearson correlation of average-tie ranks.
/// Needs at least 3 pairs; throws ComputationError on zero rank variance.
double spearman_rho(std::span<const double> x, std::span<const double> y);

/// Outcome of one Tukey-fence rule.
struct FenceResult {
  std::set<std::string> flagged;
  double q1 = 0.0;
  double q3 = 0.0;
  double threshold = 0.0;
  double iqr() const { return q3 - q1; }
};

/// Flags rho < Q1 - 1.5 IQR (quartiles by linear interpolation). Needs >= 4 participants.
FenceResult flag_correlation_outliers(const std::map<std::string, double>& rhos);

/// Per participant: median over their images of |rating - consensus median|.
std::map<std::string, double> mad_scores(const RatingsTable& table,
                                         const ConsensusVector& consensus);

/// Flags mad_score > Q3 + 1.5 IQR of the score distribution.
FenceResult flag_mad_outliers(const RatingsTable& table, const ConsensusVector& consensus);

struct ParticipantQc {
  std::string participant_id;
  std::size_t n_ratings = 0;
  std::optional<double> rho;  // empty when undefined (< 3 images or constant ratings)
  double mad_score = 0.0;
  bool corr_flag = false;
  bool mad_flag = false;
  bool excluded = false;
};

struct QcReport {
  std::vector<ParticipantQc> participants;  // sorted by id
  FenceResult correlation;
  FenceResult mad;
  std::vector<std::string> excluded;  // union of both flag sets, sorted
  std::size_t ratings_before = 0;
  std::size_t ratings_after = 0;
  std::size_t ratings_removed = 0;
};

/// Both rules against one consensus computed on the full first-trial table.
/// `table` must already be first-trial filtered.
QcReport run_qc(const RatingsTable& table, int threads = 1);

/// Drops every excluded participant's records.
RatingsTable apply_exclusions(const RatingsTable& table, const QcReport& report);

}  // namespace spidereval::qc
