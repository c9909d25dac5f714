#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "spidereval/error.hpp"
#include "spidereval/harness.hpp"
#include "spidereval/metrics.hpp"
#include "spidereval/partition.hpp"
#include "spidereval/synth.hpp"

using namespace spidereval;
using namespace spidereval::harness;

namespace {

// Scores every trial identically, so the search must keep trial 0.
class ConstantPredictor final : public Predictor {
 public:
  ConstantPredictor() : spec_(PredictorSpec::ridge()) {}
  const PredictorSpec& spec() const override { return spec_; }
  TrialFit evaluate(const Hyperparameters&, const Sample&, const Sample&, std::uint64_t) const override {
    return {1.0, std::nullopt};
  }
  FinalFit fit(const Hyperparameters&, const Sample&, const Sample&, const Sample& train,
               std::uint64_t) const override {
    return {std::make_unique<LinearModel>(Eigen::VectorXd::Zero(train.x.cols()), 0.0), {}, {}};
  }

 private:
  PredictorSpec spec_;
};

class FailingPredictor final : public Predictor {
 public:
  FailingPredictor() : spec_(PredictorSpec::ridge()) {}
  const PredictorSpec& spec() const override { return spec_; }
  TrialFit evaluate(const Hyperparameters&, const Sample&, const Sample&, std::uint64_t) const override {
    throw ComputationError("boom");
  }
  FinalFit fit(const Hyperparameters&, const Sample&, const Sample&, const Sample&,
               std::uint64_t) const override {
    throw ComputationError("boom");
  }

 private:
  PredictorSpec spec_;
};

Sample random_sample(int n, int d, std::uint64_t seed, double noise = 0.5) {
  Pcg32 rng(seed);
  Sample s{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
  Eigen::VectorXd w(d);
  for (int j = 0; j < d; ++j) w(j) = rng.normal();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) s.x(i, j) = rng.normal();
  for (int i = 0; i < n; ++i) s.y(i) = 3.0 + s.x.row(i).dot(w) + noise * rng.normal();
  return s;
}

struct Scenario {
  synth::SynthData data;
  ParticipantSplit split;
  ImageTargets targets;
  CvPlan plan;
};

Scenario scenario(std::size_t n_images, std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.n_images = n_images;
  spec.n_raters = 40;
  spec.seed = seed;
  Scenario s{synth::generate(spec), {}, {}, {}};
  s.split = split_participants(s.data.ratings.participant_ids(), seed);
  s.targets = image_group_means(s.data.ratings, s.split);
  s.plan = make_cv_plan(s.targets.image_ids(), seed);
  return s;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("ridge on an exact line") {
    Eigen::MatrixXd x(2, 1);
    x << 1, 2;
    Eigen::VectorXd y(2);
    y << 1, 2;
    const auto m = fit_ridge(x, y, 1e-10);
    CHECK(m.weights()(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(m.intercept() == doctest::Approx(0.0).epsilon(1e-8));
    const auto big = fit_ridge(x, y, 1e12);
    CHECK(std::abs(big.weights()(0)) < 1e-10);
    CHECK(big.intercept() == doctest::Approx(1.5).epsilon(1e-9));
  }

  TEST_CASE("ridge matches the augmented normal equations") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = random_sample(80, 6, seed);
      const double lambda = 0.3 * static_cast<double>(seed);
      const auto m = fit_ridge(s.x, s.y, lambda);
      // [X 1]'[X 1] + diag(lambda,...,lambda,0) solved by QR
      Eigen::MatrixXd a(80, 7);
      a << s.x, Eigen::VectorXd::Ones(80);
      Eigen::MatrixXd lhs = a.transpose() * a;
      for (int j = 0; j < 6; ++j) lhs(j, j) += lambda;
      const Eigen::VectorXd rhs = a.transpose() * s.y;
      const Eigen::VectorXd beta = lhs.colPivHouseholderQr().solve(rhs);
      for (int j = 0; j < 6; ++j) CHECK(m.weights()(j) == doctest::Approx(beta(j)).epsilon(1e-9));
      CHECK(m.intercept() == doctest::Approx(beta(6)).epsilon(1e-9));
      Eigen::VectorXd full(7);
      full << m.weights(), m.intercept();
      const double residual = (lhs * full - rhs).norm();
      CHECK(residual < 1e-8 * rhs.norm());
    }
  }

  TEST_CASE("ridge input validation") {
    const auto s = random_sample(10, 2, 1);
    CHECK_THROWS_AS(fit_ridge(s.x, s.y, 0.0), ValidationError);
    CHECK_THROWS_AS(fit_ridge(s.x, s.y.head(5), 1.0), ValidationError);
  }

  TEST_CASE("effective epoch rule") {
    CHECK(effective_epochs(12) == 17);
    CHECK(effective_epochs(45, 50) == 50);
    CHECK(effective_epochs(3, 50) == 8);
    CHECK_THROWS_AS(effective_epochs(0), ValidationError);
  }

  TEST_CASE("closed-form fit records no epochs") {
    const auto s = random_sample(30, 3, 2);
    const auto p = make_predictor(PredictorSpec::ridge());
    const auto f = p->fit({{"lambda", 1.0}}, s, s, s, 0);
    CHECK(!f.best_epoch);
    CHECK(!f.effective_epochs);
  }

  TEST_CASE("log sampling is uniform in the exponent") {
    PredictorSpec spec;
    spec.ranges = {{"lambda", {1e-6, 1e-3, Scale::Log, false}}};
    Pcg32 rng(17);
    std::vector<double> e;
    for (int i = 0; i < 10000; ++i) {
      const double v = sample_hyperparameters(spec, rng).at("lambda");
      REQUIRE(v >= 1e-6);
      REQUIRE(v <= 1e-3);
      e.push_back(std::log10(v));
    }
    std::sort(e.begin(), e.end());
    // Kolmogorov distance against U(-6, -3)
    double d = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double f = (e[i] + 6.0) / 3.0;
      d = std::max({d, std::abs(f - double(i) / e.size()), std::abs(f - double(i + 1) / e.size())});
    }
    CHECK(d < 1.63 / std::sqrt(10000.0));
  }

  TEST_CASE("integer ranges hit every value") {
    const auto spec = PredictorSpec::iterative();
    Pcg32 rng(3);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
      const double v = sample_hyperparameters(spec, rng).at("max_epochs");
      CHECK(v == std::floor(v));
      seen.insert(static_cast<int>(v));
    }
    CHECK(seen.size() == 41);
    CHECK(*seen.begin() == 10);
    CHECK(*seen.rbegin() == 50);
  }

  TEST_CASE("spec validation") {
    PredictorSpec bad;
    bad.ranges = {{"lambda", {1.0, 0.5, Scale::Linear, false}}};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad.ranges = {{"lambda", {0.0, 1.0, Scale::Log, false}}};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CHECK_NOTHROW(PredictorSpec::ridge().validate());
    CHECK(predictor_kind_from_string("iterative") == PredictorKind::IterativeStub);
    CHECK_THROWS_AS(predictor_kind_from_string("cnn"), ValidationError);
  }

  TEST_CASE("search ties go to the earliest trial") {
    const auto s = random_sample(20, 2, 4);
    const std::vector<std::pair<Sample, Sample>> folds{{s, s}};
    ConstantPredictor p;
    const auto r = random_search(p, folds, 7, 1);
    CHECK(r.best_trial == 0);
    CHECK(r.trials.size() == 7);
    const auto one = random_search(p, folds, 1, 1);
    CHECK(one.best().params == one.trials[0].params);
  }

  TEST_CASE("search picks the argmin of inner loss") {
    const auto a = random_sample(60, 5, 8, 2.0), b = random_sample(60, 5, 9, 2.0);
    const std::vector<std::pair<Sample, Sample>> folds{{a, b}, {b, a}};
    const auto p = make_predictor(PredictorSpec::ridge());
    const auto r = random_search(*p, folds, 30, 5);
    for (const auto& t : r.trials) CHECK(r.best().loss <= t.loss);
    // recompute the winner's loss directly
    const double lambda = r.best().params.at("lambda");
    const double direct = 0.5 * (mean_squared_error(fit_ridge(a.x, a.y, lambda).predict(b.x), b.y) +
                                 mean_squared_error(fit_ridge(b.x, b.y, lambda).predict(a.x), a.y));
    CHECK(r.best().loss == doctest::Approx(direct).epsilon(1e-12));
  }

  TEST_CASE("search fails loudly when every trial fails") {
    const auto s = random_sample(20, 2, 4);
    const std::vector<std::pair<Sample, Sample>> folds{{s, s}};
    FailingPredictor p;
    CHECK_THROWS_AS(random_search(p, folds, 3, 1), ComputationError);
  }

  TEST_CASE("prediction set rejects duplicates and clips") {
    PredictionSet ps;
    ps.add({0, 0, "a", 120.0, 0.0});
    ps.add({0, 1, "b", -4.0, 0.0});
    ps.add({1, 0, "a", 50.0, 0.0});
    CHECK_THROWS_AS(ps.add({0, 2, "a", 1.0, 0.0}), ValidationError);
    CHECK(ps.entries()[0].clipped == 100.0);
    CHECK(ps.entries()[1].clipped == 0.0);
    CHECK(ps.repetitions() == std::vector<int>{0, 1});
    CHECK(ps.clipped_by_repetition().at(1).at("a") == 50.0);
  }

  TEST_CASE("nested CV covers each image once per repetition") {
    auto s = scenario(60, 21);
    CHECK(leakage_audit(s.plan, s.split, &s.targets, &s.data.ratings).ok());
    NestedCvOptions o;
    o.n_trials = 5;
    o.seed = 21;
    const auto r = run_nested_cv(s.plan, s.targets, s.data.features, PredictorSpec::ridge(), o);
    CHECK(r.folds.size() == 25);
    std::map<std::string, int> count;
    for (const auto& e : r.predictions.entries()) ++count[e.image_id];
    CHECK(count.size() == 60);
    for (const auto& [id, n] : count) CHECK(n == 5);
  }

  TEST_CASE("nested CV output does not depend on threads") {
    auto s = scenario(40, 5);
    NestedCvOptions o;
    o.n_trials = 4;
    o.seed = 5;
    o.threads = 1;
    const auto one = run_nested_cv(s.plan, s.targets, s.data.features, PredictorSpec::ridge(), o);
    o.threads = 4;
    const auto four = run_nested_cv(s.plan, s.targets, s.data.features, PredictorSpec::ridge(), o);
    REQUIRE(one.predictions.size() == four.predictions.size());
    for (std::size_t i = 0; i < one.predictions.size(); ++i) {
      CHECK(one.predictions.entries()[i].image_id == four.predictions.entries()[i].image_id);
      CHECK(one.predictions.entries()[i].raw == four.predictions.entries()[i].raw);
    }
  }

  TEST_CASE("constant targets give constant predictions") {
    auto s = scenario(30, 2);
    for (auto& t : s.targets.images) t.mean_a = t.mean_b = 42.0;
    NestedCvOptions o;
    o.n_trials = 3;
    const auto r = run_nested_cv(s.plan, s.targets, s.data.features, PredictorSpec::ridge(), o);
    for (const auto& e : r.predictions.entries()) CHECK(e.raw == doctest::Approx(42.0).epsilon(1e-9));
  }

  TEST_CASE("linear synthetic data is learned") {
    auto s = scenario(313, 77);
    NestedCvOptions o;
    o.n_trials = 10;
    o.seed = 77;
    const auto r = run_nested_cv(s.plan, s.targets, s.data.features, PredictorSpec::ridge(), o);
    const auto report = metrics::metric_report(r.predictions, s.targets.means_b());
    CHECK(report.ensemble.r2 > 0.8);
    CHECK(report.single.mean.r2 > 0.8);
  }

  TEST_CASE("iterative stub trains and records epochs") {
    auto s = scenario(40, 8);
    NestedCvOptions o;
    o.n_trials = 2;
    o.seed = 8;
    const auto r = run_nested_cv(s.plan, s.targets, s.data.features, PredictorSpec::iterative(), o);
    CHECK(r.predictions.size() == 200);
    for (const auto& f : r.folds) {
      REQUIRE(f.best_epoch);
      REQUIRE(f.effective_epochs);
      CHECK(*f.effective_epochs >= 1);
      CHECK(*f.effective_epochs <= *f.best_epoch + kEpochBuffer);
    }
  }
}
