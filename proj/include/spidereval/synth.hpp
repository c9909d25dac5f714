#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spidereval/data.hpp"
#include "spidereval/image_io.hpp"

namespace spidereval::synth {

struct SynthSpec {
  std::size_t n_images = 313;
  std::size_t n_raters = 152;
  double mu = 50.0;
  double var_image = 100.0;
  double var_rater = 25.0;
  double var_residual = 25.0;
  /// Images each rater sees; 0 means every image.
  std::size_t images_per_rater = 0;
  /// Fraction of (rater, image) pairs that get a later, re-rated trial.
  double repeat_fraction = 0.0;
  std::size_t outlier_count = 0;
  double outlier_offset = 50.0;  // planted raters add +/- offset with random sign per rating
  std::size_t feature_dim = 16;
  /// Share of image-effect variance carried by the features (1 = fully linear).
  double feature_signal = 1.0;
  std::vector<double> weights;  // empty: drawn from N(0, 1)
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  std::map<std::string, double> image_effect;
  std::map<std::string, double> rater_effect;
  std::vector<std::string> outliers;  // sorted
  std::vector<double> weights;        // unit norm
  std::size_t truncated = 0;          // ratings clamped into [0, 100]
  std::size_t repeats = 0;
};

struct SynthData {
  RatingsTable ratings;
  FeatureTable features;
  GroundTruth truth;
};

/// y_ij = mu + img_i + rater_j + e_ij, clamped to [0, 100]. Features are
/// standard normal with img_i = sqrt(var_image) * (s * x_i.w + sqrt(1 - s^2) z_i).
SynthData generate(const SynthSpec& spec);

std::string image_id(std::size_t i);
std::string rater_id(std::size_t j);

/// Random labels for all twelve criteria; levels per criterion are fixed.
CategoryTable categories(const std::vector<std::string>& image_ids, std::uint64_t seed);

struct AttributionSample {
  std::vector<FloatGrid> heatmaps;  // one per model run
  BinaryMask mask;
};

/// Elliptical masks; heatmaps are `signal` inside the mask plus unit-normal noise.
std::map<std::string, AttributionSample> attribution(const std::vector<std::string>& image_ids,
                                                     std::size_t width, std::size_t height,
                                                     std::size_t runs, double signal,
                                                     std::uint64_t seed);

}  // namespace spidereval::synth
