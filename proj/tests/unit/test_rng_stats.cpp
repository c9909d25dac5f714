#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "spidereval/error.hpp"
#include "spidereval/rng.hpp"
#include "spidereval/special.hpp"
#include "spidereval/stats.hpp"

using namespace spidereval;

TEST_SUITE("rng_stats") {
  TEST_CASE("pcg32 is deterministic per seed and differs across seeds") {
    Pcg32 a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a();
      CHECK(x == b());
      differs |= x != c();
    }
    CHECK(differs);
  }

  TEST_CASE("derived seeds depend on tag and index") {
    CHECK(derive_seed(1, "a", 0) == derive_seed(1, "a", 0));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "b", 0));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    CHECK(derive_seed(1, "a", 0) != derive_seed(2, "a", 0));
  }

  TEST_CASE("uniform, bounded and normal draws") {
    Pcg32 rng(7);
    std::vector<int> counts(5, 0);
    double sum = 0.0, sq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      const auto k = rng.bounded(5);
      REQUIRE(k < 5u);
      ++counts[k];
      const double z = rng.normal();
      sum += z;
      sq += z * z;
    }
    for (int c : counts) CHECK(std::abs(c - n / 5) < 600);
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.03);
  }

  TEST_CASE("sampling without replacement returns sorted distinct indices") {
    Pcg32 rng(3);
    const auto s = sample_without_replacement(100, 30, rng);
    CHECK(s.size() == 30);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 30);
    CHECK(s.back() < 100);
    const auto all = sample_without_replacement(10, 10, rng);
    for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == i);
  }

  TEST_CASE("shuffle is a permutation") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    Pcg32 rng(9);
    shuffle(v, rng);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  }

  TEST_CASE("type-7 quantiles") {
    const std::vector<double> v{4, 1, 3, 2};
    const auto q = stats::quartiles(v);
    CHECK(q.q1 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q3 == doctest::Approx(3.25));
    CHECK(stats::quantile(v, 0.0) == 1.0);
    CHECK(stats::quantile(v, 1.0) == 4.0);
  }

  TEST_CASE("average ranks with ties") {
    const std::vector<double> v{10, 20, 20, 5, 20};
    const auto r = stats::average_ranks(v);
    CHECK(r == std::vector<double>{2, 4, 4, 1, 4});
    auto t = stats::tie_group_sizes(v);
    std::sort(t.begin(), t.end());
    CHECK(t == std::vector<std::size_t>{1, 1, 3});
  }

  TEST_CASE("mean, variance, pearson") {
    const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8.5};
    CHECK(stats::mean(x) == 2.5);
    CHECK(stats::variance(x) == doctest::Approx(5.0 / 3.0));
    CHECK(stats::pearson(x, x) == doctest::Approx(1.0));
    CHECK(stats::pearson(x, y) > 0.99);
    const std::vector<double> flat{1, 1, 1, 1};
    CHECK_THROWS_AS(stats::pearson(x, flat), ComputationError);
  }

  TEST_CASE("incomplete gamma and beta closed forms") {
    for (double x : {0.1, 1.0, 3.0, 20.0}) {
      CHECK(special::gamma_p(1.0, x) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-13));
      CHECK(special::gamma_q(1.0, x) == doctest::Approx(std::exp(-x)).epsilon(1e-13));
    }
    for (double x : {0.05, 0.3, 0.7, 0.99}) {
      CHECK(special::beta_inc(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-13));
      CHECK(special::beta_inc(2.5, 1.0, x) == doctest::Approx(std::pow(x, 2.5)).epsilon(1e-12));
      CHECK(special::beta_inc(1.0, 3.0, x) == doctest::Approx(1.0 - std::pow(1.0 - x, 3.0)).epsilon(1e-12));
    }
  }

  TEST_CASE("chi-square and student-t tails against closed forms") {
    // df = 2: sf(x) = exp(-x/2)
    for (double x : {0.5, 2.0, 7.701195, 40.0}) {
      CHECK(special::chi_square_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
    }
    // df = 1 (Cauchy): sf(t) = 1/2 - atan(t)/pi; df = 2: 1/2 - t / (2 sqrt(t^2 + 2))
    for (double t : {-2.0, 0.0, 0.5, 3.4641016, 25.0}) {
      CHECK(special::student_t_sf(t, 1.0) ==
            doctest::Approx(0.5 - std::atan(t) / std::numbers::pi).epsilon(1e-12));
      CHECK(special::student_t_sf(t, 2.0) ==
            doctest::Approx(0.5 - t / (2.0 * std::sqrt(t * t + 2.0))).epsilon(1e-12));
    }
  }

  TEST_CASE("normal quantile inverts the cdf") {
    CHECK(special::normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(special::normal_quantile(0.5) == doctest::Approx(0.0));
    for (double p : {1e-10, 0.001, 0.2, 0.6, 0.999}) {
      CHECK(special::normal_cdf(special::normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
  }
}
