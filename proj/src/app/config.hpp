#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spidereval/harness.hpp"
#include "spidereval/partition.hpp"
#include "spidereval/reliability.hpp"
#include "spidereval/synth.hpp"

namespace spidereval::app {

namespace fs = std::filesystem;

struct Paths {
  std::optional<fs::path> ratings;
  std::optional<fs::path> categories;
  std::optional<fs::path> features;
  std::optional<fs::path> heatmaps;  // directory
  std::optional<fs::path> masks;     // directory
  std::optional<fs::path> predictions;
  std::optional<fs::path> targets;
  std::optional<fs::path> points;
  std::optional<fs::path> fear;
};

struct CvSettings {
  CvPlanOptions plan;
  int n_trials = 30;
  harness::PredictorSpec predictor = harness::PredictorSpec::ridge();
};

struct IccSettings {
  std::vector<std::size_t> sizes{10, 20, 30, 40, 50, 60, 70, 80};
  int repetitions = 100;
  reliability::MissingMode missing = reliability::MissingMode::Impute;
};

struct ErrorSettings {
  bool tie_correction = true;
  int bootstrap_replicates = 2000;
  double level = 0.95;
  std::size_t min_n = 10;
  double alpha = 0.05;
};

struct CurveSettings {
  std::string form = "decay";
};

struct OverlapSettings {
  double fear_threshold = 40.0;
};

struct SynthSettings {
  synth::SynthSpec spec;
  std::size_t heatmap_width = 32;
  std::size_t heatmap_height = 32;
  std::size_t heatmap_runs = 5;
  double heatmap_signal = 0.5;
  bool attribution = true;
};

struct RunConfig {
  Paths paths;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<fs::path> out;
  bool qc = true;  // `all` applies rater QC before the later stages
  CvSettings cv;
  IccSettings icc;
  ErrorSettings error_analysis;
  CurveSettings curve;
  OverlapSettings overlap;
  SynthSettings synth;
};

/// Parses a config document. Unknown keys are rejected so typos surface as
/// validation errors naming the key. Relative paths resolve against `base`.
RunConfig parse_config(const nlohmann::json& doc, const fs::path& base = {});
RunConfig load_config(const fs::path& path);

/// Effective configuration, without execution-only settings (threads, out)
/// so that manifests do not depend on them.
nlohmann::json to_json(const RunConfig& config);

/// Seed from the config, else SPIDEREVAL_SEED, else a ValidationError on "seed".
std::uint64_t require_seed(const RunConfig& config);

/// Returns the path or throws a ValidationError naming `field`; also checks existence.
const fs::path& require_path(const std::optional<fs::path>& path, const std::string& field);

}  // namespace spidereval::app
