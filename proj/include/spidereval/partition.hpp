#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spidereval/data.hpp"

namespace spidereval {

/// Fixed split of participants into two disjoint halves. Training targets
/// come from group A, evaluation targets from group B.
struct ParticipantSplit {
  std::vector<std::string> group_a;  // sorted
  std::vector<std::string> group_b;  // sorted
  std::uint64_t seed = 0;
};

/// Ids are sorted, shuffled with a seed-derived PCG32 stream, and the first
/// floor(n/2) go to A. Requires at least two ids.
ParticipantSplit split_participants(std::vector<std::string> ids, std::uint64_t seed);

struct ImageTarget {
  std::string image_id;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

struct ImageTargets {
  std::vector<ImageTarget> images;         // sorted by id; both means defined
  std::vector<std::string> dropped;        // images missing a rating from A or B
  std::vector<std::string> warnings;

  const ImageTarget* find(const std::string& image_id) const;
  std::vector<std::string> image_ids() const;
  std::map<std::string, double> means_a() const;
  std::map<std::string, double> means_b() const;
};

ImageTargets image_group_means(const RatingsTable& table, const ParticipantSplit& split);

struct InnerFold {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

/// One outer (repetition, fold) cell of the nested CV.
struct OuterFold {
  int repetition = 0;
  int fold = 0;
  std::uint64_t seed = 0;                        // substream for everything stochastic in this cell
  std::vector<std::string> train;                // sorted
  std::vector<std::string> test;                 // sorted
  std::vector<std::string> internal_train;       // train minus internal_validation
  std::vector<std::string> internal_validation;  // checkpoint-selection subset of train
  std::vector<InnerFold> inner;                  // hyperparameter-search folds over train
};

struct CvPlanOptions {
  int repetitions = 5;
  int folds = 5;
  int inner_folds = 5;
  double validation_fraction = 0.20;
};

struct CvPlan {
  std::uint64_t seed = 0;
  CvPlanOptions options;
  std::vector<std::string> images;  // sorted
  std::vector<OuterFold> cells;     // repetition-major

  const OuterFold& at(int repetition, int fold) const;
};

/// Per repetition an independent shuffle of the sorted ids, cut into folds
/// whose sizes differ by at most one (the first n mod k folds get the extra).
CvPlan make_cv_plan(std::vector<std::string> image_ids, std::uint64_t seed,
                    const CvPlanOptions& options = {});

struct LeakageViolation {
  std::string kind;
  int repetition = -1;
  int fold = -1;
  std::string id;
};

struct LeakageAudit {
  std::vector<LeakageViolation> violations;
  bool ok() const { return violations.empty(); }
  /// Throws ComputationError listing every offending id when not ok().
  void enforce() const;
};

/// Structural checks on the plan and split. When `targets` and `ratings` are
/// given, also recomputes every train/test target from raw ratings and
/// verifies that train images carry group-A means and test images group-B
/// means.
LeakageAudit leakage_audit(const CvPlan& plan, const ParticipantSplit& split,
                           const ImageTargets* targets = nullptr,
                           const RatingsTable* ratings = nullptr);

}  // namespace spidereval
