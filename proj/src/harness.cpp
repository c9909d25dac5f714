#include "spidereval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spidereval/error.hpp"
#include "spidereval/parallel.hpp"

namespace spidereval::harness {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

class RidgePredictor final : public Predictor {
 public:
  explicit RidgePredictor(PredictorSpec spec) : spec_(std::move(spec)) {}

  const PredictorSpec& spec() const override { return spec_; }

  TrialFit evaluate(const Hyperparameters& params, const Sample& train, const Sample& held_out,
                    std::uint64_t) const override {
    const auto model = fit_ridge(train.x, train.y, params.at("lambda"));
    return {mean_squared_error(model.predict(held_out.x), held_out.y), std::nullopt};
  }

  FinalFit fit(const Hyperparameters& params, const Sample&, const Sample&, const Sample& full_train,
               std::uint64_t) const override {
    FinalFit out;
    out.model = std::make_unique<LinearModel>(fit_ridge(full_train.x, full_train.y, params.at("lambda")));
    return out;
  }

 private:
  PredictorSpec spec_;
};

// Linear model trained by mini-batch AdamW on standardized features. Stands
// in for an epoch-based network trainer so the checkpoint / epoch-buffer
// logic runs end to end.
class IterativePredictor final : public Predictor {
 public:
  explicit IterativePredictor(PredictorSpec spec) : spec_(std::move(spec)) {}

  const PredictorSpec& spec() const override { return spec_; }

  TrialFit evaluate(const Hyperparameters& params, const Sample& train, const Sample& held_out,
                    std::uint64_t seed) const override {
    const auto run = train_epochs(params, train, &held_out, max_epochs(params), seed);
    return {run.best_loss, run.best_epoch};
  }

  FinalFit fit(const Hyperparameters& params, const Sample& internal_train,
               const Sample& internal_validation, const Sample& full_train,
               std::uint64_t seed) const override {
    const int cap = max_epochs(params);
    const auto selection =
        train_epochs(params, internal_train, &internal_validation, cap, derive_seed(seed, "select"));
    const int epochs = effective_epochs(selection.best_epoch, cap);
    auto final_run = train_epochs(params, full_train, nullptr, epochs, derive_seed(seed, "final"));
    FinalFit out;
    out.model = std::make_unique<LinearModel>(std::move(final_run.model));
    out.best_epoch = selection.best_epoch;
    out.effective_epochs = epochs;
    return out;
  }

 private:
  struct Run {
    LinearModel model;
    int best_epoch = 0;
    double best_loss = std::numeric_limits<double>::infinity();
  };

  static int max_epochs(const Hyperparameters& params) {
    return static_cast<int>(std::lround(params.at("max_epochs")));
  }

  Run train_epochs(const Hyperparameters& params, const Sample& train, const Sample* validation,
                   int epochs, std::uint64_t seed) const {
    const double lr = params.at("learning_rate");
    const double wd = params.at("weight_decay");
    const auto n = train.x.rows();
    const auto d = train.x.cols();
    if (n == 0) throw ValidationError("iterative predictor: empty training set");

    const Eigen::RowVectorXd mu = train.x.colwise().mean();
    Eigen::RowVectorXd sigma =
        ((train.x.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!(sigma[j] > 0.0)) sigma[j] = 1.0;
    }
    const Eigen::MatrixXd z = (train.x.rowwise() - mu).array().rowwise() / sigma.array();

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = train.y.mean();
    Eigen::VectorXd m_w = Eigen::VectorXd::Zero(d), v_w = Eigen::VectorXd::Zero(d);
    double m_b = 0.0, v_b = 0.0;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    auto to_model = [&] {
      Eigen::VectorXd weights = w.array() / sigma.transpose().array();
      return LinearModel(weights, b - mu.dot(weights));
    };

    Run run;
    run.model = to_model();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto rng = Pcg32(seed);
    const auto batch = static_cast<Eigen::Index>(std::max(1, spec_.batch_size));

    for (int epoch = 1; epoch <= epochs; ++epoch) {
      shuffle(order, rng);
      for (Eigen::Index start = 0; start < n; start += batch) {
        const auto stop = std::min(n, start + batch);
        Eigen::VectorXd g_w = Eigen::VectorXd::Zero(d);
        double g_b = 0.0;
        for (auto i = start; i < stop; ++i) {
          const auto row = order[static_cast<std::size_t>(i)];
          const double residual = z.row(row).dot(w) + b - train.y[row];
          g_w += 2.0 * residual * z.row(row).transpose();
          g_b += 2.0 * residual;
        }
        const double scale = 1.0 / static_cast<double>(stop - start);
        g_w *= scale;
        g_b *= scale;
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        w *= 1.0 - lr * wd;  // decoupled weight decay, bias excluded
        m_w = beta1 * m_w + (1.0 - beta1) * g_w;
        v_w = beta2 * v_w + (1.0 - beta2) * g_w.cwiseProduct(g_w);
        w.array() -= lr * (m_w.array() / c1) / ((v_w.array() / c2).sqrt() + eps);
        m_b = beta1 * m_b + (1.0 - beta1) * g_b;
        v_b = beta2 * v_b + (1.0 - beta2) * g_b * g_b;
        b -= lr * (m_b / c1) / (std::sqrt(v_b / c2) + eps);
      }
      if (!w.allFinite() || !std::isfinite(b)) {
        throw ComputationError("iterative predictor diverged at epoch " + std::to_string(epoch));
      }
      if (validation) {
        auto model = to_model();
        const double loss = mean_squared_error(model.predict(validation->x), validation->y);
        if (loss < run.best_loss) {
          run.best_loss = loss;
          run.best_epoch = epoch;
          run.model = std::move(model);
        }
      }
    }
    if (!validation) {
      run.model = to_model();
      run.best_epoch = epochs;
    }
    return run;
  }

  PredictorSpec spec_;
};

}  // namespace

void PredictorSpec::validate() const {
  if (ranges.empty()) throw ValidationError("predictor spec has no hyperparameter ranges", "predictor");
  for (const auto& [name, r] : ranges) {
    if (!std::isfinite(r.low) || !std::isfinite(r.high) || r.low > r.high) {
      throw ValidationError("range for '" + name + "' is empty or invalid", name);
    }
    if (r.scale == Scale::Log && r.low <= 0.0) {
      throw ValidationError("log-scale range for '" + name + "' needs positive bounds", name);
    }
    if (r.integer && std::ceil(r.low) > std::floor(r.high)) {
      throw ValidationError("integer range for '" + name + "' contains no integer", name);
    }
  }
  auto need = [&](const char* name) {
    if (!ranges.count(name)) {
      throw ValidationError(std::string("predictor spec lacks range '") + name + "'", name);
    }
  };
  if (kind == PredictorKind::RidgeClosedForm) {
    need("lambda");
  } else {
    need("learning_rate");
    need("weight_decay");
    need("max_epochs");
    if (ranges.at("max_epochs").low < 1.0) {
      throw ValidationError("max_epochs must be at least 1", "max_epochs");
    }
  }
}

PredictorSpec PredictorSpec::ridge() {
  PredictorSpec spec;
  spec.kind = PredictorKind::RidgeClosedForm;
  spec.ranges["lambda"] = {1e-4, 1e4, Scale::Log, false};
  return spec;
}

PredictorSpec PredictorSpec::iterative() {
  PredictorSpec spec;
  spec.kind = PredictorKind::IterativeStub;
  spec.ranges["learning_rate"] = {1e-3, 1e-1, Scale::Log, false};
  spec.ranges["weight_decay"] = {1e-6, 1e-3, Scale::Log, false};
  spec.ranges["max_epochs"] = {10, 50, Scale::Linear, true};
  return spec;
}

std::string to_string(PredictorKind kind) {
  return kind == PredictorKind::RidgeClosedForm ? "ridge_closed_form" : "iterative_stub";
}

PredictorKind predictor_kind_from_string(const std::string& name) {
  if (name == "ridge_closed_form" || name == "ridge") return PredictorKind::RidgeClosedForm;
  if (name == "iterative_stub" || name == "iterative") return PredictorKind::IterativeStub;
  throw ValidationError("unknown predictor kind '" + name + "'", "predictor.kind");
}

Hyperparameters sample_hyperparameters(const PredictorSpec& spec, Pcg32& rng) {
  Hyperparameters out;
  for (const auto& [name, r] : spec.ranges) {
    double value = 0.0;
    if (r.integer) {
      const auto lo = static_cast<long long>(std::ceil(r.low));
      const auto hi = static_cast<long long>(std::floor(r.high));
      value = static_cast<double>(lo + rng.bounded(static_cast<std::uint32_t>(hi - lo + 1)));
    } else if (r.scale == Scale::Log) {
      value = std::exp(rng.uniform(std::log(r.low), std::log(r.high)));
    } else {
      value = rng.uniform(r.low, r.high);
    }
    out.emplace(name, value);
  }
  return out;
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights_.size()) {
    throw ValidationError("feature dimension " + std::to_string(x.cols()) +
                          " does not match model dimension " + std::to_string(weights_.size()));
  }
  return (x * weights_).array() + intercept_;
}

LinearModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  if (x.rows() != y.size()) throw ValidationError("fit_ridge: rows(X) != |y|");
  if (x.rows() == 0) throw ValidationError("fit_ridge: empty training set");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("fit_ridge: lambda must be positive and finite");
  }
  require_finite(x, "fit_ridge: X");
  require_finite(y, "fit_ridge: y");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw ComputationError("fit_ridge: factorization failed");
  Eigen::VectorXd w = solver.solve(xc.transpose() * yc);
  if (!w.allFinite()) throw ComputationError("fit_ridge: non-finite solution");
  return LinearModel(std::move(w), y_mean - x_mean.dot(w));
}

double mean_squared_error(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target) {
  if (prediction.size() != target.size() || target.size() == 0) {
    throw ValidationError("mean_squared_error: size mismatch or empty input");
  }
  return (prediction - target).squaredNorm() / static_cast<double>(target.size());
}

int effective_epochs(int best_epoch, std::optional<int> max_epochs) {
  if (best_epoch < 1) throw ValidationError("best_epoch must be >= 1");
  const int buffered = best_epoch + kEpochBuffer;
  return max_epochs ? std::min(buffered, *max_epochs) : buffered;
}

std::unique_ptr<Predictor> make_predictor(const PredictorSpec& spec) {
  spec.validate();
  if (spec.kind == PredictorKind::RidgeClosedForm) return std::make_unique<RidgePredictor>(spec);
  return std::make_unique<IterativePredictor>(spec);
}

SearchResult random_search(const Predictor& predictor,
                           std::span<const std::pair<Sample, Sample>> inner_folds, int n_trials,
                           std::uint64_t seed) {
  if (n_trials < 1) throw ValidationError("random_search: n_trials must be >= 1", "n_trials");
  if (inner_folds.empty()) throw ValidationError("random_search: no inner folds");
  SearchResult result;
  auto rng = make_rng(seed, "search.params");
  for (int t = 0; t < n_trials; ++t) {
    TrialResult trial;
    trial.trial = t;
    trial.params = sample_hyperparameters(predictor.spec(), rng);
    try {
      double total = 0.0;
      double epochs = 0.0;
      bool has_epochs = false;
      for (std::size_t f = 0; f < inner_folds.size(); ++f) {
        const auto fit = predictor.evaluate(trial.params, inner_folds[f].first,
                                            inner_folds[f].second,
                                            derive_seed(seed, "search.trial", t * 1000 + f));
        if (!std::isfinite(fit.loss) || fit.loss < 0.0) {
          throw ComputationError("non-finite validation loss");
        }
        total += fit.loss;
        if (fit.best_epoch) {
          epochs += *fit.best_epoch;
          has_epochs = true;
        }
      }
      trial.loss = total / static_cast<double>(inner_folds.size());
      if (has_epochs) {
        trial.best_epoch =
            static_cast<int>(std::lround(epochs / static_cast<double>(inner_folds.size())));
      }
    } catch (const Error& e) {
      trial.loss = std::numeric_limits<double>::quiet_NaN();
      trial.error = e.what();
    }
    if (trial.ok() && (result.best_trial < 0 || trial.loss < result.best().loss)) {
      result.best_trial = t;
    }
    result.trials.push_back(std::move(trial));
  }
  if (result.best_trial < 0) {
    std::string message = "random_search: all " + std::to_string(n_trials) + " trials failed;";
    for (const auto& t : result.trials) {
      message += " [trial " + std::to_string(t.trial) + ": " + t.error + "]";
    }
    throw ComputationError(message);
  }
  return result;
}

void PredictionSet::add(PredictionEntry entry) {
  if (!std::isfinite(entry.raw)) {
    throw ComputationError("non-finite prediction for image '" + entry.image_id + "'");
  }
  entry.clipped = clip_rating(entry.raw);
  const auto key = std::make_pair(entry.repetition, entry.image_id);
  if (index_.count(key)) {
    throw ValidationError("duplicate prediction for repetition " +
                          std::to_string(entry.repetition) + ", image '" + entry.image_id + "'");
  }
  index_.emplace(key, entries_.size());
  entries_.push_back(std::move(entry));
}

std::vector<int> PredictionSet::repetitions() const {
  std::vector<int> reps;
  for (const auto& [key, i] : index_) {
    if (reps.empty() || reps.back() != key.first) reps.push_back(key.first);
  }
  return reps;
}

std::vector<std::string> PredictionSet::image_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : entries_) ids.push_back(e.image_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::map<int, std::map<std::string, double>> PredictionSet::clipped_by_repetition() const {
  std::map<int, std::map<std::string, double>> out;
  for (const auto& e : entries_) out[e.repetition][e.image_id] = e.clipped;
  return out;
}

void PredictionSet::sort() {
  std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.repetition, a.fold, a.image_id) < std::tie(b.repetition, b.fold, b.image_id);
  });
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    index_.emplace(std::make_pair(entries_[i].repetition, entries_[i].image_id), i);
  }
}

Sample make_sample(const std::vector<std::string>& ids, const FeatureTable& features,
                   const std::map<std::string, double>& targets) {
  Sample s;
  s.x.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(features.dimension()));
  s.y.resize(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& row = features.at(ids[i]);
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < row.size(); ++j) s.x(r, static_cast<Eigen::Index>(j)) = row[j];
    const auto t = targets.find(ids[i]);
    if (t == targets.end()) throw ValidationError("no target for image '" + ids[i] + "'");
    s.y[r] = t->second;
  }
  return s;
}

NestedCvResult run_nested_cv(const CvPlan& plan, const ImageTargets& targets,
                             const FeatureTable& features, const PredictorSpec& spec,
                             const NestedCvOptions& options) {
  const auto predictor = make_predictor(spec);
  for (const auto& id : plan.images) {
    if (!targets.find(id)) throw ValidationError("plan image '" + id + "' has no targets");
    if (!features.contains(id)) throw ValidationError("plan image '" + id + "' has no features");
  }
  // Training data only ever sees group-A means; group-B means are never
  // passed into this function's fitting path.
  const auto train_targets = targets.means_a();

  struct CellOutput {
    FoldRecord record;
    std::vector<PredictionEntry> predictions;
  };
  std::vector<CellOutput> outputs(plan.cells.size());

  parallel_for(plan.cells.size(), options.threads, [&](std::size_t c) {
    const auto& cell = plan.cells[c];
    try {
      std::vector<std::pair<Sample, Sample>> inner;
      for (const auto& fold : cell.inner) {
        inner.emplace_back(make_sample(fold.train, features, train_targets),
                           make_sample(fold.validation, features, train_targets));
      }
      const auto cell_seed = derive_seed(options.seed, "harness.cell", c) ^ cell.seed;
      auto search = random_search(*predictor, inner, options.n_trials,
                                  derive_seed(cell_seed, "search"));
      const auto& best = search.best().params;
      const auto fit = predictor->fit(best, make_sample(cell.internal_train, features, train_targets),
                                      make_sample(cell.internal_validation, features, train_targets),
                                      make_sample(cell.train, features, train_targets),
                                      derive_seed(cell_seed, "final"));
      Eigen::MatrixXd x_test(static_cast<Eigen::Index>(cell.test.size()),
                             static_cast<Eigen::Index>(features.dimension()));
      for (std::size_t i = 0; i < cell.test.size(); ++i) {
        const auto& row = features.at(cell.test[i]);
        for (std::size_t j = 0; j < row.size(); ++j) {
          x_test(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
      }
      const Eigen::VectorXd raw = fit.model->predict(x_test);
      auto& out = outputs[c];
      out.record = {cell.repetition, cell.fold, std::move(search), fit.best_epoch,
                    fit.effective_epochs};
      for (std::size_t i = 0; i < cell.test.size(); ++i) {
        const double r = raw[static_cast<Eigen::Index>(i)];
        out.predictions.push_back({cell.repetition, cell.fold, cell.test[i], r, clip_rating(r)});
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      throw ComputationError("repetition " + std::to_string(cell.repetition) + ", fold " +
                             std::to_string(cell.fold) + ": " + e.what());
    }
  });

  NestedCvResult result;
  for (auto& out : outputs) {
    for (auto& p : out.predictions) result.predictions.add(std::move(p));
    result.folds.push_back(std::move(out.record));
  }
  result.predictions.sort();
  return result;
}

}  // namespace spidereval::harness
