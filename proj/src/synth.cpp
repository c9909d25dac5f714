#include "spidereval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "spidereval/error.hpp"
#include "spidereval/rng.hpp"

namespace spidereval::synth {

void SynthSpec::validate() const {
  if (n_images < 2) throw ValidationError("synth: need at least 2 images", "n_images");
  if (n_raters < 2) throw ValidationError("synth: need at least 2 raters", "n_raters");
  for (auto [v, name] : {std::pair{var_image, "var_image"}, std::pair{var_rater, "var_rater"},
                         std::pair{var_residual, "var_residual"}}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("synth: variances must be >= 0", name);
  }
  if (outlier_count >= n_raters) {
    throw ValidationError("synth: outlier count must be below the rater count", "outlier_count");
  }
  if (images_per_rater > n_images) {
    throw ValidationError("synth: images_per_rater exceeds n_images", "images_per_rater");
  }
  if (!(repeat_fraction >= 0.0 && repeat_fraction <= 1.0)) {
    throw ValidationError("synth: repeat_fraction must lie in [0, 1]", "repeat_fraction");
  }
  if (feature_dim < 1) throw ValidationError("synth: feature_dim must be >= 1", "feature_dim");
  if (!(feature_signal >= 0.0 && feature_signal <= 1.0)) {
    throw ValidationError("synth: feature_signal must lie in [0, 1]", "feature_signal");
  }
  if (!weights.empty() && weights.size() != feature_dim) {
    throw ValidationError("synth: weight vector length differs from feature_dim", "weights");
  }
}

std::string image_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%04zu", i + 1);
  return buf;
}

std::string rater_id(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%03zu", j + 1);
  return buf;
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  GroundTruth truth;

  auto wrng = make_rng(spec.seed, "synth.weights");
  std::vector<double> w = spec.weights;
  if (w.empty()) {
    for (std::size_t d = 0; d < spec.feature_dim; ++d) w.push_back(wrng.normal());
  }
  double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
  if (!(norm > 0.0)) throw ValidationError("synth: weight vector is zero", "weights");
  for (auto& v : w) v /= norm;
  truth.weights = w;

  std::map<std::string, std::vector<double>> features;
  std::vector<double> img(spec.n_images);
  auto frng = make_rng(spec.seed, "synth.features");
  const double s = spec.feature_signal;
  for (std::size_t i = 0; i < spec.n_images; ++i) {
    std::vector<double> x(spec.feature_dim);
    for (auto& v : x) v = frng.normal();
    const double proj = std::inner_product(x.begin(), x.end(), w.begin(), 0.0);
    img[i] = std::sqrt(spec.var_image) * (s * proj + std::sqrt(1.0 - s * s) * frng.normal());
    truth.image_effect[image_id(i)] = img[i];
    features.emplace(image_id(i), std::move(x));
  }

  auto rrng = make_rng(spec.seed, "synth.raters");
  std::vector<double> rater(spec.n_raters);
  for (std::size_t j = 0; j < spec.n_raters; ++j) {
    rater[j] = std::sqrt(spec.var_rater) * rrng.normal();
    truth.rater_effect[rater_id(j)] = rater[j];
  }
  auto orng = make_rng(spec.seed, "synth.outliers");
  for (auto j : sample_without_replacement(spec.n_raters, spec.outlier_count, orng)) {
    truth.outliers.push_back(rater_id(j));
  }
  std::sort(truth.outliers.begin(), truth.outliers.end());

  std::vector<RatingRecord> records;
  const double sd_e = std::sqrt(spec.var_residual);
  for (std::size_t j = 0; j < spec.n_raters; ++j) {
    const auto pid = rater_id(j);
    const bool outlier = std::binary_search(truth.outliers.begin(), truth.outliers.end(), pid);
    auto rng = make_rng(spec.seed, "synth.ratings", j);
    std::vector<std::size_t> seen;
    if (spec.images_per_rater == 0) {
      seen.resize(spec.n_images);
      std::iota(seen.begin(), seen.end(), std::size_t{0});
    } else {
      seen = sample_without_replacement(spec.n_images, spec.images_per_rater, rng);
    }
    shuffle(seen, rng);
    auto draw = [&](std::size_t i) {
      double y = spec.mu + img[i] + rater[j] + sd_e * rng.normal();
      if (outlier) y += (rng.uniform() < 0.5 ? -1.0 : 1.0) * spec.outlier_offset;
      if (y < 0.0 || y > 100.0) {
        ++truth.truncated;
        y = std::clamp(y, 0.0, 100.0);
      }
      return y;
    };
    int trial = 1;
    std::vector<std::size_t> repeats;
    for (auto i : seen) {
      records.push_back({pid, image_id(i), trial++, draw(i)});
      if (spec.repeat_fraction > 0.0 && rng.uniform() < spec.repeat_fraction) repeats.push_back(i);
    }
    for (auto i : repeats) {
      records.push_back({pid, image_id(i), trial++, draw(i)});
      ++truth.repeats;
    }
  }
  return {RatingsTable(std::move(records)), FeatureTable(std::move(features)), std::move(truth)};
}

namespace {

struct Levels {
  std::string_view criterion;
  std::vector<std::string> labels;
  std::vector<double> weights;
};

const std::vector<Levels>& level_table() {
  static const std::vector<Levels> table = {
      {"spider in picture", {"spider", "no spider", "not evaluable"}, {0.8, 0.15, 0.05}},
      {"cobweb in picture", {"cobweb", "no cobweb", "not evaluable"}, {0.25, 0.7, 0.05}},
      {"number of spiders", {"one", "several", "not evaluable"}, {0.75, 0.15, 0.10}},
      {"subjective distance", {"close", "medium", "far", "not evaluable"}, {0.4, 0.3, 0.2, 0.1}},
      {"environment", {"indoor", "outdoor", "artificial", "not evaluable"}, {0.3, 0.5, 0.1, 0.1}},
      {"texture", {"hairy", "smooth", "not evaluable"}, {0.45, 0.4, 0.15}},
      {"eyes", {"visible", "not visible", "not evaluable"}, {0.35, 0.5, 0.15}},
      {"eating prey", {"yes", "no"}, {0.1, 0.9}},
      {"subjective size", {"small", "medium", "large", "not evaluable"}, {0.3, 0.35, 0.25, 0.1}},
      {"perspective", {"top", "side", "front", "not evaluable"}, {0.35, 0.3, 0.25, 0.1}},
      {"color of picture", {"color", "black and white"}, {0.98, 0.02}},
      {"prominent legs", {"yes", "no", "not evaluable"}, {0.5, 0.4, 0.1}},
  };
  return table;
}

}  // namespace

CategoryTable categories(const std::vector<std::string>& image_ids, std::uint64_t seed) {
  std::map<std::pair<std::string, std::string>, std::string> entries;
  for (std::size_t c = 0; c < level_table().size(); ++c) {
    const auto& lv = level_table()[c];
    auto rng = make_rng(seed, "synth.categories", c);
    for (const auto& id : image_ids) {
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = lv.labels.size() - 1;
      for (std::size_t l = 0; l < lv.weights.size(); ++l) {
        acc += lv.weights[l];
        if (u < acc) {
          pick = l;
          break;
        }
      }
      entries[{id, std::string(lv.criterion)}] = lv.labels[pick];
    }
  }
  return CategoryTable(std::move(entries));
}

std::map<std::string, AttributionSample> attribution(const std::vector<std::string>& image_ids,
                                                     std::size_t width, std::size_t height,
                                                     std::size_t runs, double signal,
                                                     std::uint64_t seed) {
  if (width < 4 || height < 4) throw ValidationError("synth: attribution grids must be at least 4x4");
  if (runs < 1) throw ValidationError("synth: need at least one heatmap run");
  std::map<std::string, AttributionSample> out;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    auto rng = make_rng(seed, "synth.attribution", i);
    const double cx = rng.uniform(0.25, 0.75) * static_cast<double>(width);
    const double cy = rng.uniform(0.25, 0.75) * static_cast<double>(height);
    const double rx = rng.uniform(0.1, 0.25) * static_cast<double>(width);
    const double ry = rng.uniform(0.1, 0.25) * static_cast<double>(height);
    std::vector<std::uint8_t> bits(width * height);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
        const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
        bits[y * width + x] = dx * dx + dy * dy <= 1.0 ? 1 : 0;
      }
    }
    AttributionSample sample;
    sample.mask = BinaryMask(width, height, std::move(bits));
    for (std::size_t r = 0; r < runs; ++r) {
      std::vector<double> v(width * height);
      for (std::size_t p = 0; p < v.size(); ++p) {
        v[p] = (sample.mask.bits[p] ? signal : 0.0) + rng.normal();
      }
      sample.heatmaps.emplace_back(width, height, std::move(v));
    }
    out.emplace(image_ids[i], std::move(sample));
  }
  return out;
}

}  // namespace spidereval::synth
