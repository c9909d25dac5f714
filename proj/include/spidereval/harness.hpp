#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spidereval/data.hpp"
#include "spidereval/partition.hpp"
#include "spidereval/rng.hpp"

namespace spidereval::harness {

enum class PredictorKind { RidgeClosedForm, IterativeStub };
enum class Scale { Linear, Log };

struct ParamRange {
  double low = 0.0;
  double high = 0.0;
  Scale scale = Scale::Linear;
  bool integer = false;  // sampled uniformly over the integers in [low, high]
};

struct PredictorSpec {
  PredictorKind kind = PredictorKind::RidgeClosedForm;
  std::map<std::string, ParamRange> ranges;
  // Recorded as metadata for iterative trainers; the ridge baseline ignores them.
  int batch_size = 16;
  std::string optimizer = "adamw";

  /// Throws ValidationError on empty/inverted ranges or non-positive log bounds.
  void validate() const;

  /// lambda ~ log-uniform on [1e-4, 1e4].
  static PredictorSpec ridge();
  /// learning_rate ~ log[1e-3, 1e-1], weight_decay ~ log[1e-6, 1e-3],
  /// max_epochs ~ integer [10, 50].
  static PredictorSpec iterative();
};

std::string to_string(PredictorKind kind);
PredictorKind predictor_kind_from_string(const std::string& name);

using Hyperparameters = std::map<std::string, double>;

/// Draws each parameter uniformly on its declared scale (log ranges are
/// uniform in the exponent). Parameters are drawn in name order.
Hyperparameters sample_hyperparameters(const PredictorSpec& spec, Pcg32& rng);

struct Sample {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

class FittedModel {
 public:
  virtual ~FittedModel() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
};

class LinearModel final : public FittedModel {
 public:
  LinearModel() = default;
  LinearModel(Eigen::VectorXd weights, double intercept)
      : weights_(std::move(weights)), intercept_(intercept) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  const Eigen::VectorXd& weights() const { return weights_; }
  double intercept() const { return intercept_; }

 private:
  Eigen::VectorXd weights_;
  double intercept_ = 0.0;
};

/// Closed-form ridge with an unpenalized intercept: solves
/// (Xc'Xc + lambda I) w = Xc'yc on centred data, intercept = mean(y) - mean(X) w.
LinearModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda);

double mean_squared_error(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target);

/// Best-validation epoch plus a fixed 5-epoch buffer, capped at the sampled maximum.
int effective_epochs(int best_epoch, std::optional<int> max_epochs = std::nullopt);
inline constexpr int kEpochBuffer = 5;

struct TrialFit {
  double loss = 0.0;  // validation MSE on raw predictions
  std::optional<int> best_epoch;
};

struct FinalFit {
  std::unique_ptr<FittedModel> model;
  std::optional<int> best_epoch;
  std::optional<int> effective_epochs;
};

/// Pluggable predictor. Implementations must be deterministic given `seed`
/// and safe to call concurrently.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual const PredictorSpec& spec() const = 0;

  /// Trains on `train` and scores MSE on `held_out` (one inner fold).
  virtual TrialFit evaluate(const Hyperparameters& params, const Sample& train,
                            const Sample& held_out, std::uint64_t seed) const = 0;

  /// Final fit for an outer fold. Iterative predictors select the checkpoint
  /// epoch on `internal_validation` and then retrain on `full_train`.
  virtual FinalFit fit(const Hyperparameters& params, const Sample& internal_train,
                       const Sample& internal_validation, const Sample& full_train,
                       std::uint64_t seed) const = 0;
};

std::unique_ptr<Predictor> make_predictor(const PredictorSpec& spec);

struct TrialResult {
  int trial = 0;
  Hyperparameters params;
  double loss = 0.0;  // mean inner-fold MSE; NaN when the trial failed
  std::optional<int> best_epoch;
  std::string error;  // non-empty when the trial failed
  bool ok() const { return error.empty(); }
};

struct SearchResult {
  std::vector<TrialResult> trials;
  int best_trial = -1;
  const TrialResult& best() const { return trials.at(static_cast<std::size_t>(best_trial)); }
};

/// Random search: `n_trials` draws, each scored by mean MSE over the inner
/// folds; the argmin wins and ties go to the earliest trial. Throws
/// ComputationError with per-trial diagnostics when every trial fails.
SearchResult random_search(const Predictor& predictor,
                           std::span<const std::pair<Sample, Sample>> inner_folds, int n_trials,
                           std::uint64_t seed);

inline double clip_rating(double raw) { return raw < 0.0 ? 0.0 : (raw > 100.0 ? 100.0 : raw); }

struct PredictionEntry {
  int repetition = 0;
  int fold = 0;
  std::string image_id;
  double raw = 0.0;
  double clipped = 0.0;
};

/// Held-out predictions; at most one entry per (repetition, image).
class PredictionSet {
 public:
  /// Recomputes `clipped` from `raw`; throws on a duplicate (repetition, image).
  void add(PredictionEntry entry);

  const std::vector<PredictionEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Sorted distinct repetition indices.
  std::vector<int> repetitions() const;
  /// Sorted distinct image ids.
  std::vector<std::string> image_ids() const;
  /// repetition -> (image -> clipped prediction).
  std::map<int, std::map<std::string, double>> clipped_by_repetition() const;
  /// Canonical (repetition, fold, image) order.
  void sort();

 private:
  std::vector<PredictionEntry> entries_;
  std::map<std::pair<int, std::string>, std::size_t> index_;
};

struct FoldRecord {
  int repetition = 0;
  int fold = 0;
  SearchResult search;
  std::optional<int> best_epoch;
  std::optional<int> effective_epochs;
};

struct NestedCvOptions {
  int n_trials = 30;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct NestedCvResult {
  PredictionSet predictions;
  std::vector<FoldRecord> folds;  // repetition-major
};

/// Stacks features (rows in `ids` order) and one target per id.
Sample make_sample(const std::vector<std::string>& ids, const FeatureTable& features,
                   const std::map<std::string, double>& targets);

/// Per (repetition, fold): random search over the plan's inner folds
/// (group-A targets), final fit on the outer training images (group-A),
/// predictions for the held-out images. Cells run in parallel; the output
/// does not depend on `threads`. Callers are expected to have run
/// leakage_audit on the plan first.
NestedCvResult run_nested_cv(const CvPlan& plan, const ImageTargets& targets,
                             const FeatureTable& features, const PredictorSpec& spec,
                             const NestedCvOptions& options);

}  // namespace spidereval::harness
