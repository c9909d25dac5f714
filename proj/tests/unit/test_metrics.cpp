#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spidereval/error.hpp"
#include "spidereval/metrics.hpp"
#include "spidereval/rng.hpp"

using namespace spidereval;
using harness::PredictionSet;

namespace {
struct Brute {
  double mae = 0, mse = 0, r2 = 0;
};
Brute brute(const std::vector<double>& p, const std::vector<double>& o) {
  Brute b;
  double m = 0;
  for (double v : o) m += v / o.size();
  double sst = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    b.mae += std::abs(p[i] - o[i]) / p.size();
    b.mse += (p[i] - o[i]) * (p[i] - o[i]) / p.size();
    sst += (o[i] - m) * (o[i] - m);
  }
  b.r2 = 1 - b.mse * p.size() / sst;
  return b;
}

PredictionSet random_set(int reps, int images, Pcg32& rng, std::map<std::string, double>& targets) {
  PredictionSet ps;
  targets.clear();
  for (int i = 0; i < images; ++i) targets["i" + std::to_string(i)] = rng.uniform(0, 100);
  for (int r = 0; r < reps; ++r)
    for (int i = 0; i < images; ++i)
      ps.add({r, i % 5, "i" + std::to_string(i), rng.uniform(-20, 120), 0.0});
  return ps;
}
}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("perfect and mean predictors") {
    const std::vector<double> obs{1, 5, 9, 2};
    CHECK(metrics::mae(obs, obs) == 0);
    CHECK(metrics::rmse(obs, obs) == 0);
    CHECK(metrics::r2(obs, obs) == 1);
    const std::vector<double> mean(4, 4.25);
    CHECK(metrics::r2(mean, obs) == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("hand example") {
    const std::vector<double> p{0, 0}, o{3, 4};
    CHECK(metrics::mae(p, o) == doctest::Approx(3.5));
    CHECK(metrics::rmse(p, o) == doctest::Approx(std::sqrt(12.5)));
    const std::vector<double> flat{2, 2};
    CHECK_THROWS_AS(metrics::r2(p, flat), ComputationError);
    const std::vector<double> short_obs{1};
    CHECK_THROWS(metrics::mae(p, short_obs));
  }

  TEST_CASE("two repetitions by two folds toy set") {
    const std::map<std::string, double> t{{"a", 10}, {"b", 20}, {"c", 30}, {"d", 40}};
    PredictionSet ps;
    ps.add({0, 0, "a", 12, 0});
    ps.add({0, 0, "b", 18, 0});
    ps.add({0, 1, "c", 35, 0});
    ps.add({0, 1, "d", 101, 0});  // clipped to 100
    ps.add({1, 0, "a", 9, 0});
    ps.add({1, 1, "b", 25, 0});
    ps.add({1, 0, "c", 29, 0});
    ps.add({1, 1, "d", 44, 0});
    const auto rep = metrics::repetition_metrics(ps, t);
    const std::vector<double> obs{10, 20, 30, 40};
    const auto b0 = brute({12, 18, 35, 100}, obs);
    const auto b1 = brute({9, 25, 29, 44}, obs);
    CHECK(rep.per_repetition.at(0).mae == doctest::Approx(b0.mae));
    CHECK(rep.per_repetition.at(1).rmse == doctest::Approx(std::sqrt(b1.mse)));
    CHECK(rep.mean.r2 == doctest::Approx((b0.r2 + b1.r2) / 2));
    const auto ens = metrics::ensemble_metrics(ps, t);
    const auto be = brute({10.5, 21.5, 32, 72}, obs);
    CHECK(ens.mae == doctest::Approx(be.mae));
    CHECK(ens.rmse == doctest::Approx(std::sqrt(be.mse)));
    CHECK(ens.r2 == doctest::Approx(be.r2));
  }

  TEST_CASE("identical repetitions give identical triples") {
    const std::map<std::string, double> t{{"a", 10}, {"b", 20}, {"c", 35}};
    PredictionSet ps;
    for (int r = 0; r < 3; ++r) {
      ps.add({r, 0, "a", 14, 0});
      ps.add({r, 0, "b", 17, 0});
      ps.add({r, 1, "c", 30, 0});
    }
    const auto rep = metrics::repetition_metrics(ps, t);
    const auto ens = metrics::ensemble_metrics(ps, t);
    CHECK(rep.mean.mae == doctest::Approx(rep.per_repetition.at(2).mae));
    CHECK(ens.mae == doctest::Approx(rep.mean.mae));
    CHECK(ens.r2 == doctest::Approx(rep.mean.r2));
  }

  TEST_CASE("entry order does not matter") {
    Pcg32 rng(4);
    std::map<std::string, double> t;
    const auto ps = random_set(3, 12, rng, t);
    auto entries = ps.entries();
    std::reverse(entries.begin(), entries.end());
    PredictionSet other;
    for (const auto& e : entries) other.add(e);
    const auto a = metrics::metric_report(ps, t), b = metrics::metric_report(other, t);
    CHECK(a.ensemble.rmse == doctest::Approx(b.ensemble.rmse).epsilon(1e-14));
    CHECK(a.single.mean.mae == doctest::Approx(b.single.mean.mae).epsilon(1e-14));
  }

  TEST_CASE("ensemble never loses to the repetition mean") {
    Pcg32 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
      std::map<std::string, double> t;
      const auto ps = random_set(5, 20, rng, t);
      const auto report = metrics::metric_report(ps, t);
      double mean_mse = 0;
      for (const auto& [r, m] : report.single.per_repetition) mean_mse += m.rmse * m.rmse / 5;
      CHECK(report.ensemble.mae <= report.single.mean.mae + 1e-12);
      CHECK(report.ensemble.rmse * report.ensemble.rmse <= mean_mse + 1e-9);
      CHECK(report.n_images == 20);
    }
  }

  TEST_CASE("repetitions must cover the same images") {
    const std::map<std::string, double> t{{"a", 1}, {"b", 2}};
    PredictionSet ps;
    ps.add({0, 0, "a", 1, 0});
    ps.add({0, 0, "b", 2, 0});
    ps.add({1, 0, "a", 1, 0});
    CHECK_THROWS(metrics::repetition_metrics(ps, t));
  }
}
