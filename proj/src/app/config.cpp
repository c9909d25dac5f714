#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "spidereval/csv.hpp"
#include "spidereval/error.hpp"

namespace spidereval::app {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& node, std::string prefix, std::set<std::string> allowed)
      : node_(node), prefix_(std::move(prefix)) {
    if (!node_.is_object()) throw ValidationError(where("") + " must be an object", field(""));
    for (const auto& [key, value] : node_.items()) {
      if (!allowed.count(key)) throw ValidationError("unknown config key '" + field(key) + "'", field(key));
    }
  }

  std::string field(const std::string& key) const {
    return prefix_.empty() ? key : (key.empty() ? prefix_ : prefix_ + "." + key);
  }

  bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }
  const json& at(const std::string& key) const { return node_.at(key); }

  template <class T>
  void read(const std::string& key, T& out) const {
    if (!has(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config key '" + field(key) + "' has the wrong type", field(key));
    }
  }

  void read_positive(const std::string& key, int& out) const {
    read(key, out);
    if (has(key) && out < 1) throw ValidationError("'" + field(key) + "' must be >= 1", field(key));
  }

  void read_path(const std::string& key, std::optional<fs::path>& out, const fs::path& base) const {
    if (!has(key)) return;
    std::string s;
    read(key, s);
    fs::path p(s);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

  Section child(const std::string& key, std::set<std::string> allowed) const {
    return Section(node_.at(key), field(key), std::move(allowed));
  }

 private:
  std::string where(const std::string& key) const { return "config '" + field(key) + "'"; }

  const json& node_;
  std::string prefix_;
};

harness::ParamRange parse_range(const Section& s) {
  harness::ParamRange r;
  s.read("low", r.low);
  s.read("high", r.high);
  s.read("integer", r.integer);
  if (s.has("scale")) {
    std::string scale;
    s.read("scale", scale);
    if (scale == "log") {
      r.scale = harness::Scale::Log;
    } else if (scale == "linear") {
      r.scale = harness::Scale::Linear;
    } else {
      throw ValidationError("scale must be 'log' or 'linear'", s.field("scale"));
    }
  }
  return r;
}

std::uint64_t parse_seed_text(const std::string& text, const std::string& field) {
  const auto v = csv::parse_int(text);
  if (!v || *v < 0) throw ValidationError("seed must be a non-negative integer", field);
  return static_cast<std::uint64_t>(*v);
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base) {
  RunConfig c;
  const Section root(doc, "", {"paths", "seed", "threads", "out", "qc", "cv", "icc",
                               "error_analysis", "curve", "overlap", "synth"});
  if (root.has("paths")) {
    const auto p = root.child("paths", {"ratings", "categories", "features", "heatmaps", "masks",
                                        "predictions", "targets", "points", "fear"});
    p.read_path("ratings", c.paths.ratings, base);
    p.read_path("categories", c.paths.categories, base);
    p.read_path("features", c.paths.features, base);
    p.read_path("heatmaps", c.paths.heatmaps, base);
    p.read_path("masks", c.paths.masks, base);
    p.read_path("predictions", c.paths.predictions, base);
    p.read_path("targets", c.paths.targets, base);
    p.read_path("points", c.paths.points, base);
    p.read_path("fear", c.paths.fear, base);
  }
  if (root.has("seed")) {
    const auto& s = root.at("seed");
    if (s.is_number_unsigned()) {
      c.seed = s.get<std::uint64_t>();
    } else if (s.is_string()) {
      c.seed = parse_seed_text(s.get<std::string>(), "seed");
    } else {
      throw ValidationError("seed must be a non-negative integer", "seed");
    }
  }
  root.read_positive("threads", c.threads);
  root.read_path("out", c.out, base);
  root.read("qc", c.qc);

  if (root.has("cv")) {
    const auto s = root.child("cv", {"repetitions", "folds", "inner_folds", "validation_fraction",
                                     "n_trials", "predictor"});
    s.read_positive("repetitions", c.cv.plan.repetitions);
    s.read_positive("folds", c.cv.plan.folds);
    s.read_positive("inner_folds", c.cv.plan.inner_folds);
    s.read("validation_fraction", c.cv.plan.validation_fraction);
    s.read_positive("n_trials", c.cv.n_trials);
    if (s.has("predictor")) {
      const auto p = s.child("predictor", {"kind", "ranges", "batch_size", "optimizer"});
      if (p.has("kind")) {
        std::string kind;
        p.read("kind", kind);
        const auto k = harness::predictor_kind_from_string(kind);
        c.cv.predictor = k == harness::PredictorKind::RidgeClosedForm
                             ? harness::PredictorSpec::ridge()
                             : harness::PredictorSpec::iterative();
      }
      if (p.has("ranges")) {
        const auto& ranges = p.at("ranges");
        if (!ranges.is_object()) throw ValidationError("ranges must be an object", p.field("ranges"));
        for (const auto& [name, node] : ranges.items()) {
          const Section r(node, p.field("ranges") + "." + name, {"low", "high", "scale", "integer"});
          auto range = c.cv.predictor.ranges.count(name) ? c.cv.predictor.ranges.at(name)
                                                         : harness::ParamRange{};
          const auto parsed = parse_range(r);
          if (r.has("low")) range.low = parsed.low;
          if (r.has("high")) range.high = parsed.high;
          if (r.has("scale")) range.scale = parsed.scale;
          if (r.has("integer")) range.integer = parsed.integer;
          c.cv.predictor.ranges[name] = range;
        }
      }
      p.read_positive("batch_size", c.cv.predictor.batch_size);
      p.read("optimizer", c.cv.predictor.optimizer);
    }
    if (!(c.cv.plan.validation_fraction > 0.0 && c.cv.plan.validation_fraction < 1.0)) {
      throw ValidationError("validation_fraction must lie in (0, 1)", "cv.validation_fraction");
    }
  }
  try {
    c.cv.predictor.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "cv.predictor" + (e.field().empty() ? "" : "." + e.field()));
  }

  if (root.has("icc")) {
    const auto s = root.child("icc", {"sizes", "repetitions", "missing"});
    s.read("sizes", c.icc.sizes);
    s.read_positive("repetitions", c.icc.repetitions);
    if (s.has("missing")) {
      std::string mode;
      s.read("missing", mode);
      c.icc.missing = reliability::missing_mode_from_string(mode);
    }
  }
  if (root.has("error_analysis")) {
    const auto s = root.child("error_analysis", {"tie_correction", "bootstrap_replicates", "level",
                                                 "min_n", "alpha"});
    s.read("tie_correction", c.error_analysis.tie_correction);
    s.read_positive("bootstrap_replicates", c.error_analysis.bootstrap_replicates);
    s.read("level", c.error_analysis.level);
    s.read("min_n", c.error_analysis.min_n);
    s.read("alpha", c.error_analysis.alpha);
  }
  if (root.has("curve")) {
    const auto s = root.child("curve", {"form"});
    s.read("form", c.curve.form);
  }
  if (root.has("overlap")) {
    const auto s = root.child("overlap", {"fear_threshold"});
    s.read("fear_threshold", c.overlap.fear_threshold);
  }
  if (root.has("synth")) {
    const auto s = root.child(
        "synth", {"n_images", "n_raters", "mu", "var_image", "var_rater", "var_residual",
                  "images_per_rater", "repeat_fraction", "outlier_count", "outlier_offset",
                  "feature_dim", "feature_signal", "weights", "heatmap_width", "heatmap_height",
                  "heatmap_runs", "heatmap_signal", "attribution"});
    auto& sp = c.synth.spec;
    s.read("n_images", sp.n_images);
    s.read("n_raters", sp.n_raters);
    s.read("mu", sp.mu);
    s.read("var_image", sp.var_image);
    s.read("var_rater", sp.var_rater);
    s.read("var_residual", sp.var_residual);
    s.read("images_per_rater", sp.images_per_rater);
    s.read("repeat_fraction", sp.repeat_fraction);
    s.read("outlier_count", sp.outlier_count);
    s.read("outlier_offset", sp.outlier_offset);
    s.read("feature_dim", sp.feature_dim);
    s.read("feature_signal", sp.feature_signal);
    s.read("weights", sp.weights);
    s.read("heatmap_width", c.synth.heatmap_width);
    s.read("heatmap_height", c.synth.heatmap_height);
    s.read("heatmap_runs", c.synth.heatmap_runs);
    s.read("heatmap_signal", c.synth.heatmap_signal);
    s.read("attribution", c.synth.attribution);
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string(), "config");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what(), "config");
  }
  return parse_config(doc, path.parent_path());
}

json to_json(const RunConfig& c) {
  json j;
  auto path = [](const std::optional<fs::path>& p) -> json {
    return p ? json(p->generic_string()) : json(nullptr);
  };
  j["paths"] = {{"ratings", path(c.paths.ratings)},         {"categories", path(c.paths.categories)},
                {"features", path(c.paths.features)},       {"heatmaps", path(c.paths.heatmaps)},
                {"masks", path(c.paths.masks)},             {"predictions", path(c.paths.predictions)},
                {"targets", path(c.paths.targets)},         {"points", path(c.paths.points)},
                {"fear", path(c.paths.fear)}};
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["qc"] = c.qc;
  json ranges = json::object();
  for (const auto& [name, r] : c.cv.predictor.ranges) {
    ranges[name] = {{"low", r.low},
                    {"high", r.high},
                    {"scale", r.scale == harness::Scale::Log ? "log" : "linear"},
                    {"integer", r.integer}};
  }
  j["cv"] = {{"repetitions", c.cv.plan.repetitions},
             {"folds", c.cv.plan.folds},
             {"inner_folds", c.cv.plan.inner_folds},
             {"validation_fraction", c.cv.plan.validation_fraction},
             {"n_trials", c.cv.n_trials},
             {"predictor",
              {{"kind", harness::to_string(c.cv.predictor.kind)},
               {"ranges", ranges},
               {"batch_size", c.cv.predictor.batch_size},
               {"optimizer", c.cv.predictor.optimizer}}}};
  j["icc"] = {{"sizes", c.icc.sizes},
              {"repetitions", c.icc.repetitions},
              {"missing", reliability::to_string(c.icc.missing)}};
  j["error_analysis"] = {{"tie_correction", c.error_analysis.tie_correction},
                         {"bootstrap_replicates", c.error_analysis.bootstrap_replicates},
                         {"level", c.error_analysis.level},
                         {"min_n", c.error_analysis.min_n},
                         {"alpha", c.error_analysis.alpha}};
  j["curve"] = {{"form", c.curve.form}};
  j["overlap"] = {{"fear_threshold", c.overlap.fear_threshold}};
  const auto& sp = c.synth.spec;
  j["synth"] = {{"n_images", sp.n_images},
                {"n_raters", sp.n_raters},
                {"mu", sp.mu},
                {"var_image", sp.var_image},
                {"var_rater", sp.var_rater},
                {"var_residual", sp.var_residual},
                {"images_per_rater", sp.images_per_rater},
                {"repeat_fraction", sp.repeat_fraction},
                {"outlier_count", sp.outlier_count},
                {"outlier_offset", sp.outlier_offset},
                {"feature_dim", sp.feature_dim},
                {"feature_signal", sp.feature_signal},
                {"weights", sp.weights},
                {"heatmap_width", c.synth.heatmap_width},
                {"heatmap_height", c.synth.heatmap_height},
                {"heatmap_runs", c.synth.heatmap_runs},
                {"heatmap_signal", c.synth.heatmap_signal},
                {"attribution", c.synth.attribution}};
  return j;
}

std::uint64_t require_seed(const RunConfig& config) {
  if (config.seed) return *config.seed;
  if (const char* env = std::getenv("SPIDEREVAL_SEED"); env && *env) {
    return parse_seed_text(env, "SPIDEREVAL_SEED");
  }
  throw ValidationError("a seed is required: pass --seed, set \"seed\" in the config, or export SPIDEREVAL_SEED",
                        "seed");
}

const fs::path& require_path(const std::optional<fs::path>& path, const std::string& field) {
  if (!path) throw ValidationError("missing required input '" + field + "'", field);
  std::error_code ec;
  if (!fs::exists(*path, ec)) {
    throw ValidationError("input '" + field + "' does not exist: " + path->string(), field);
  }
  return *path;
}

}  // namespace spidereval::app
