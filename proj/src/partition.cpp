#include "spidereval/partition.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "spidereval/error.hpp"
#include "spidereval/rng.hpp"
#include "spidereval/stats.hpp"

namespace spidereval {

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Contiguous chunks of `ids`; the first size % k chunks are one longer.
std::vector<std::vector<std::string>> chunk(const std::vector<std::string>& ids, int k) {
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(k));
  const std::size_t base = ids.size() / static_cast<std::size_t>(k);
  const std::size_t extra = ids.size() % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < out.size(); ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    out[f].assign(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                  ids.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(out[f].begin(), out[f].end());
    pos += len;
  }
  return out;
}

std::vector<std::string> set_minus(const std::vector<std::string>& all,
                                   const std::vector<std::string>& remove) {
  std::vector<std::string> out;
  std::set_difference(all.begin(), all.end(), remove.begin(), remove.end(),
                      std::back_inserter(out));
  return out;
}

}  // namespace

ParticipantSplit split_participants(std::vector<std::string> ids, std::uint64_t seed) {
  ids = sorted_unique(std::move(ids));
  if (ids.size() < 2) throw ValidationError("need at least two participants to split");
  auto rng = make_rng(seed, "partition.participants");
  shuffle(ids, rng);
  const std::size_t half = ids.size() / 2;
  ParticipantSplit split;
  split.seed = seed;
  split.group_a.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(half));
  split.group_b.assign(ids.begin() + static_cast<std::ptrdiff_t>(half), ids.end());
  std::sort(split.group_a.begin(), split.group_a.end());
  std::sort(split.group_b.begin(), split.group_b.end());
  return split;
}

const ImageTarget* ImageTargets::find(const std::string& image_id) const {
  const auto it = std::lower_bound(
      images.begin(), images.end(), image_id,
      [](const ImageTarget& t, const std::string& id) { return t.image_id < id; });
  return it != images.end() && it->image_id == image_id ? &*it : nullptr;
}

std::vector<std::string> ImageTargets::image_ids() const {
  std::vector<std::string> ids;
  for (const auto& t : images) ids.push_back(t.image_id);
  return ids;
}

std::map<std::string, double> ImageTargets::means_a() const {
  std::map<std::string, double> out;
  for (const auto& t : images) out.emplace(t.image_id, t.mean_a);
  return out;
}

std::map<std::string, double> ImageTargets::means_b() const {
  std::map<std::string, double> out;
  for (const auto& t : images) out.emplace(t.image_id, t.mean_b);
  return out;
}

ImageTargets image_group_means(const RatingsTable& table, const ParticipantSplit& split) {
  const std::set<std::string> a(split.group_a.begin(), split.group_a.end());
  const std::set<std::string> b(split.group_b.begin(), split.group_b.end());
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_image;
  for (const auto& r : table.records()) {
    auto& [ra, rb] = by_image[r.image_id];
    if (a.count(r.participant_id)) {
      ra.push_back(r.rating);
    } else if (b.count(r.participant_id)) {
      rb.push_back(r.rating);
    } else {
      throw ValidationError("participant '" + r.participant_id + "' is in neither group");
    }
  }
  ImageTargets out;
  for (const auto& [image, groups] : by_image) {
    const auto& [ra, rb] = groups;
    if (ra.empty() || rb.empty()) {
      out.dropped.push_back(image);
      out.warnings.push_back("image '" + image + "' has no ratings from group " +
                             (ra.empty() ? "A" : "B") + "; dropped from modeling");
      continue;
    }
    out.images.push_back({image, stats::mean(ra), stats::mean(rb), ra.size(), rb.size()});
  }
  return out;
}

const OuterFold& CvPlan::at(int repetition, int fold) const {
  if (repetition < 0 || repetition >= options.repetitions || fold < 0 || fold >= options.folds) {
    throw ValidationError("CvPlan::at: (repetition, fold) out of range");
  }
  return cells.at(static_cast<std::size_t>(repetition * options.folds + fold));
}

CvPlan make_cv_plan(std::vector<std::string> image_ids, std::uint64_t seed,
                    const CvPlanOptions& options) {
  if (options.repetitions < 1 || options.folds < 2 || options.inner_folds < 2) {
    throw ValidationError("CV plan needs >= 1 repetition, >= 2 folds and >= 2 inner folds");
  }
  if (!(options.validation_fraction > 0.0 && options.validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction must lie in (0, 1)");
  }
  CvPlan plan;
  plan.seed = seed;
  plan.options = options;
  plan.images = sorted_unique(std::move(image_ids));
  const auto min_images = static_cast<std::size_t>(options.folds * options.inner_folds);
  if (plan.images.size() < min_images) {
    throw ValidationError("CV plan needs at least " + std::to_string(min_images) + " images, got " +
                          std::to_string(plan.images.size()));
  }

  for (int rep = 0; rep < options.repetitions; ++rep) {
    auto order = plan.images;
    auto rng = make_rng(seed, "cv.repetition", static_cast<std::uint64_t>(rep));
    shuffle(order, rng);
    const auto test_folds = chunk(order, options.folds);
    for (int fold = 0; fold < options.folds; ++fold) {
      OuterFold cell;
      cell.repetition = rep;
      cell.fold = fold;
      const auto index = static_cast<std::uint64_t>(rep * options.folds + fold);
      cell.seed = derive_seed(seed, "cv.cell", index);
      cell.test = test_folds[static_cast<std::size_t>(fold)];
      cell.train = set_minus(plan.images, cell.test);

      auto inner_order = cell.train;
      auto inner_rng = make_rng(cell.seed, "cv.inner");
      shuffle(inner_order, inner_rng);
      for (auto& held_out : chunk(inner_order, options.inner_folds)) {
        InnerFold inner;
        inner.train = set_minus(cell.train, held_out);
        inner.validation = std::move(held_out);
        cell.inner.push_back(std::move(inner));
      }

      auto val_order = cell.train;
      auto val_rng = make_rng(cell.seed, "cv.validation");
      shuffle(val_order, val_rng);
      const auto n_val = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::lround(options.validation_fraction * static_cast<double>(val_order.size()))));
      cell.internal_validation.assign(val_order.begin(),
                                      val_order.begin() + static_cast<std::ptrdiff_t>(n_val));
      std::sort(cell.internal_validation.begin(), cell.internal_validation.end());
      cell.internal_train = set_minus(cell.train, cell.internal_validation);
      plan.cells.push_back(std::move(cell));
    }
  }
  return plan;
}

void LeakageAudit::enforce() const {
  if (ok()) return;
  std::string message = "leakage audit failed:";
  for (const auto& v : violations) {
    message += " [" + v.kind;
    if (v.repetition >= 0) {
      message += " rep=" + std::to_string(v.repetition) + " fold=" + std::to_string(v.fold);
    }
    message += " id=" + v.id + "]";
  }
  throw ComputationError(message);
}

LeakageAudit leakage_audit(const CvPlan& plan, const ParticipantSplit& split,
                           const ImageTargets* targets, const RatingsTable* ratings) {
  LeakageAudit audit;
  auto report = [&](std::string kind, int rep, int fold, const std::string& id) {
    audit.violations.push_back({std::move(kind), rep, fold, id});
  };

  const std::set<std::string> a(split.group_a.begin(), split.group_a.end());
  for (const auto& id : split.group_b) {
    if (a.count(id)) report("participant_in_both_groups", -1, -1, id);
  }

  const std::set<std::string> all(plan.images.begin(), plan.images.end());
  for (int rep = 0; rep < plan.options.repetitions; ++rep) {
    std::map<std::string, int> test_count;
    for (int fold = 0; fold < plan.options.folds; ++fold) {
      const auto& cell = plan.at(rep, fold);
      const std::set<std::string> train(cell.train.begin(), cell.train.end());
      const std::set<std::string> test(cell.test.begin(), cell.test.end());
      for (const auto& id : cell.test) {
        ++test_count[id];
        if (train.count(id)) report("image_in_train_and_test", rep, fold, id);
        if (!all.count(id)) report("unknown_image", rep, fold, id);
      }
      for (const auto& id : all) {
        if (!train.count(id) && !test.count(id)) report("image_missing_from_cell", rep, fold, id);
      }
      for (const auto& inner : cell.inner) {
        for (const auto& id : inner.train) {
          if (test.count(id)) report("test_image_in_inner_fold", rep, fold, id);
        }
        for (const auto& id : inner.validation) {
          if (test.count(id)) report("test_image_in_inner_fold", rep, fold, id);
        }
      }
      for (const auto& id : cell.internal_validation) {
        if (!train.count(id)) report("validation_image_outside_train", rep, fold, id);
      }
    }
    for (const auto& id : all) {
      const auto it = test_count.find(id);
      const int count = it == test_count.end() ? 0 : it->second;
      if (count != 1) report("test_fold_coverage", rep, -1, id);
    }
  }

  if (targets && ratings) {
    // Recompute both group means from raw ratings. A train target equal to
    // the B mean (or a test target equal to the A mean) would mean held-out
    // raters leaked into training.
    const std::set<std::string> b(split.group_b.begin(), split.group_b.end());
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_image;
    for (const auto& r : ratings->records()) {
      auto& [ra, rb] = by_image[r.image_id];
      if (a.count(r.participant_id)) ra.push_back(r.rating);
      if (b.count(r.participant_id)) rb.push_back(r.rating);
    }
    for (const auto& t : targets->images) {
      const auto it = by_image.find(t.image_id);
      if (it == by_image.end() || it->second.first.empty() || it->second.second.empty()) {
        report("target_without_group_ratings", -1, -1, t.image_id);
        continue;
      }
      const double ma = stats::mean(it->second.first);
      const double mb = stats::mean(it->second.second);
      if (std::abs(ma - t.mean_a) > 1e-9 * std::max(1.0, std::abs(ma))) {
        report("train_target_not_group_a_mean", -1, -1, t.image_id);
      }
      if (std::abs(mb - t.mean_b) > 1e-9 * std::max(1.0, std::abs(mb))) {
        report("test_target_not_group_b_mean", -1, -1, t.image_id);
      }
    }
    for (const auto& id : plan.images) {
      if (!targets->find(id)) report("plan_image_without_target", -1, -1, id);
    }
  }
  return audit;
}

}  // namespace spidereval
