#include <doctest.h>

#include <algorithm>
#include <set>

#include "spidereval/error.hpp"
#include "spidereval/partition.hpp"
#include "spidereval/synth.hpp"

using namespace spidereval;

namespace {
std::vector<std::string> ids(std::size_t n, const char* prefix = "i") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}
}  // namespace

TEST_SUITE("partition") {
  TEST_CASE("participant split halves") {
    const auto s = split_participants(ids(148, "p"), 1);
    CHECK(s.group_a.size() == 74);
    CHECK(s.group_b.size() == 74);
    std::set<std::string> both(s.group_a.begin(), s.group_a.end());
    both.insert(s.group_b.begin(), s.group_b.end());
    CHECK(both.size() == 148);
    CHECK(std::is_sorted(s.group_a.begin(), s.group_a.end()));

    const auto two = split_participants({"x", "y"}, 3);
    CHECK(two.group_a.size() == 1);
    CHECK(two.group_b.size() == 1);
    CHECK_THROWS_AS(split_participants({"x"}, 3), ValidationError);
  }

  TEST_CASE("split is deterministic in the seed") {
    const auto a = split_participants(ids(60, "p"), 42);
    const auto b = split_participants(ids(60, "p"), 42);
    const auto c = split_participants(ids(60, "p"), 43);
    CHECK(a.group_a == b.group_a);
    CHECK(a.group_a != c.group_a);
    auto shuffled = ids(60, "p");
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(split_participants(shuffled, 42).group_a == a.group_a);
  }

  TEST_CASE("group means and dropped images") {
    std::vector<RatingRecord> r{{"a1", "x", 1, 40}, {"a1", "y", 1, 0}, {"a2", "x", 1, 60},
                                {"b1", "x", 1, 10}, {"b1", "z", 1, 30}};
    const RatingsTable t(r);
    ParticipantSplit s{{"a1", "a2"}, {"b1"}, 0};
    const auto m = image_group_means(t, s);
    REQUIRE(m.images.size() == 1);
    CHECK(m.images[0].image_id == "x");
    CHECK(m.images[0].mean_a == 50);
    CHECK(m.images[0].mean_b == 10);
    CHECK(m.images[0].n_a == 2);
    CHECK(m.dropped == std::vector<std::string>{"y", "z"});
    CHECK(!m.warnings.empty());
  }

  TEST_CASE("fold sizes for 313 images") {
    const auto plan = make_cv_plan(ids(313), 7);
    REQUIRE(plan.cells.size() == 25);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<std::size_t> sizes;
      std::map<std::string, int> seen;
      for (int fold = 0; fold < 5; ++fold) {
        const auto& cell = plan.at(rep, fold);
        sizes.push_back(cell.test.size());
        for (const auto& id : cell.test) ++seen[id];
        CHECK(cell.train.size() + cell.test.size() == 313);
        // inner folds partition the outer training set
        std::map<std::string, int> inner_seen;
        REQUIRE(cell.inner.size() == 5);
        for (const auto& in : cell.inner) {
          for (const auto& id : in.validation) ++inner_seen[id];
          CHECK(in.train.size() + in.validation.size() == cell.train.size());
        }
        CHECK(inner_seen.size() == cell.train.size());
        for (const auto& [id, n] : inner_seen) CHECK(n == 1);
        CHECK(cell.internal_train.size() + cell.internal_validation.size() == cell.train.size());
      }
      CHECK(sizes == std::vector<std::size_t>{63, 63, 63, 62, 62});
      CHECK(seen.size() == 313);
      for (const auto& [id, n] : seen) CHECK(n == 1);
    }
  }

  TEST_CASE("plan does not depend on input order") {
    auto forward = ids(50);
    auto backward = forward;
    std::reverse(backward.begin(), backward.end());
    const auto a = make_cv_plan(forward, 99);
    const auto b = make_cv_plan(backward, 99);
    for (std::size_t c = 0; c < a.cells.size(); ++c) {
      CHECK(a.cells[c].test == b.cells[c].test);
      CHECK(a.cells[c].internal_validation == b.cells[c].internal_validation);
    }
  }

  TEST_CASE("leakage audit on valid and tampered plans") {
    const auto split = split_participants(ids(10, "p"), 1);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto plan = make_cv_plan(ids(37), seed);
      CHECK(leakage_audit(plan, split).ok());
    }
    auto plan = make_cv_plan(ids(37), 5);
    auto& cell = plan.cells[3];
    const std::string leaked = cell.test.front();
    cell.train.push_back(leaked);
    const auto audit = leakage_audit(plan, split);
    REQUIRE(audit.violations.size() == 1);
    CHECK(audit.violations[0].id == leaked);
    CHECK_THROWS_AS(audit.enforce(), ComputationError);
  }

  TEST_CASE("audit recomputes targets from raw ratings") {
    synth::SynthSpec spec;
    spec.n_images = 30;
    spec.n_raters = 10;
    spec.seed = 3;
    const auto data = synth::generate(spec);
    const auto split = split_participants(data.ratings.participant_ids(), 4);
    auto targets = image_group_means(data.ratings, split);
    const auto plan = make_cv_plan(targets.image_ids(), 4);
    CHECK(leakage_audit(plan, split, &targets, &data.ratings).ok());
    std::swap(targets.images[2].mean_a, targets.images[2].mean_b);
    const auto audit = leakage_audit(plan, split, &targets, &data.ratings);
    CHECK(!audit.ok());
    for (const auto& v : audit.violations) CHECK(v.id == targets.images[2].image_id);
  }
}
