#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "config.hpp"
#include "outputs.hpp"
#include "spidereval/attribution.hpp"
#include "spidereval/csv.hpp"
#include "spidereval/curvefit.hpp"
#include "spidereval/error.hpp"
#include "spidereval/error_analysis.hpp"
#include "spidereval/image_io.hpp"
#include "spidereval/metrics.hpp"
#include "spidereval/parallel.hpp"
#include "spidereval/rater_qc.hpp"
#include "spidereval/reliability.hpp"
#include "spidereval/svg.hpp"

#ifndef SPIDEREVAL_VERSION
#define SPIDEREVAL_VERSION "0.0.0"
#endif

namespace spidereval::app {

namespace {

using nlohmann::json;

struct Context {
  RunConfig config;
  std::string command;
  json inputs = json::object();
  std::optional<std::uint64_t> seed_used;

  int threads() const { return config.threads; }

  std::uint64_t seed() {
    if (!seed_used) seed_used = require_seed(config);
    return *seed_used;
  }

  const fs::path& input(const std::optional<fs::path>& path, const std::string& field) {
    const auto& p = require_path(path, field);
    if (!inputs.contains(field)) {
      json entry = {{"path", p.generic_string()}};
      if (fs::is_directory(p)) {
        entry["files"] = digest_tree(p);
      } else {
        entry["sha256"] = sha256_file(p);
      }
      inputs[field] = std::move(entry);
    }
    return p;
  }

  OutputDir out() const {
    if (!config.out) throw ValidationError("an output directory is required (--out or \"out\")", "out");
    return OutputDir(*config.out);
  }
};

// Re-raises a ValidationError that lacks a field under `field`.
template <class F>
auto with_field(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    if (!e.field().empty()) throw;
    throw ValidationError(e.what(), field);
  }
}

void write_manifest(const Context& ctx, const OutputDir& out) {
  json config = to_json(ctx.config);
  config["seed"] = ctx.seed_used ? json(*ctx.seed_used) : json(nullptr);
  json m;
  m["tool"] = "spidereval";
  m["version"] = SPIDEREVAL_VERSION;
  m["compiler"] = __VERSION__;
  m["command"] = ctx.command;
  m["seed"] = config["seed"];
  m["float_format"] = "%.9g";
  m["config"] = std::move(config);
  m["inputs"] = ctx.inputs;
  out.json("run_manifest.json", m);
}

std::string slug(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!s.empty() && s.back() != '_') {
      s += '_';
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

std::string b(bool v) { return v ? "true" : "false"; }

json fence_json(const qc::FenceResult& f) {
  return {{"q1", jnum(f.q1)},
          {"q3", jnum(f.q3)},
          {"iqr", jnum(f.iqr())},
          {"threshold", jnum(f.threshold)},
          {"flagged", std::vector<std::string>(f.flagged.begin(), f.flagged.end())}};
}

// ---- stages ---------------------------------------------------------------

struct LoadedRatings {
  RatingsTable first_trial;
  std::size_t input_records = 0;
};

LoadedRatings read_ratings(Context& ctx) {
  const auto& path = ctx.input(ctx.config.paths.ratings, "paths.ratings");
  const auto table = with_field("paths.ratings", [&] { return load_ratings(path); });
  return {first_trial_filter(table), table.size()};
}

RatingsTable stage_qc(Context& ctx, const LoadedRatings& ratings, const OutputDir& out) {
  const auto report = qc::run_qc(ratings.first_trial, ctx.threads());
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : report.participants) {
    rows.push_back({p.participant_id, std::to_string(p.n_ratings), p.rho ? fmt(*p.rho) : "",
                    fmt(p.mad_score), b(p.corr_flag), b(p.mad_flag), b(p.excluded)});
  }
  out.csv("qc_report.csv",
          {"participant_id", "n_ratings", "rho", "mad_score", "corr_flag", "mad_flag", "excluded"},
          rows);
  out.json("qc_summary.json",
           {{"input_records", ratings.input_records},
            {"first_trial_records", ratings.first_trial.size()},
            {"participants", report.participants.size()},
            {"excluded", report.excluded},
            {"n_excluded", report.excluded.size()},
            {"ratings_before", report.ratings_before},
            {"ratings_after", report.ratings_after},
            {"ratings_removed", report.ratings_removed},
            {"correlation_rule", fence_json(report.correlation)},
            {"mad_rule", fence_json(report.mad)}});
  auto cleaned = qc::apply_exclusions(ratings.first_trial, report);
  std::ostringstream s;
  write_ratings(s, cleaned);
  out.text("ratings_clean.csv", s.str());
  return cleaned;
}

struct SplitOutputs {
  ParticipantSplit split;
  ImageTargets targets;
  CvPlan plan;
};

SplitOutputs stage_split(Context& ctx, const RatingsTable& table, const FeatureTable* features,
                         const OutputDir& out) {
  const auto seed = ctx.seed();
  SplitOutputs s;
  s.split = split_participants(table.participant_ids(), seed);
  s.targets = image_group_means(table, s.split);
  auto images = s.targets.image_ids();
  if (features) {
    for (const auto& id : images) {
      if (!features->contains(id)) {
        throw ValidationError("image '" + id + "' has no feature vector", "paths.features");
      }
    }
  }
  s.plan = with_field("cv", [&] { return make_cv_plan(images, seed, ctx.config.cv.plan); });

  std::vector<std::vector<std::string>> rows;
  for (const auto& id : s.split.group_a) rows.push_back({id, "A"});
  for (const auto& id : s.split.group_b) rows.push_back({id, "B"});
  out.csv("participant_split.csv", {"participant_id", "group"}, rows);

  rows.clear();
  for (const auto& t : s.targets.images) {
    rows.push_back({t.image_id, fmt(t.mean_a), fmt(t.mean_b), std::to_string(t.n_a),
                    std::to_string(t.n_b)});
  }
  out.csv("image_targets.csv", {"image_id", "mean_a", "mean_b", "n_a", "n_b"}, rows);

  rows.clear();
  for (const auto& cell : s.plan.cells) {
    const auto r = std::to_string(cell.repetition), f = std::to_string(cell.fold);
    for (const auto& id : cell.test) rows.push_back({r, f, "", "test", id});
    for (const auto& id : cell.internal_validation) rows.push_back({r, f, "", "internal_validation", id});
    for (std::size_t k = 0; k < cell.inner.size(); ++k) {
      for (const auto& id : cell.inner[k].validation) {
        rows.push_back({r, f, std::to_string(k), "inner_validation", id});
      }
    }
  }
  out.csv("cv_plan.csv", {"repetition", "fold", "inner_fold", "role", "image_id"}, rows);

  const auto audit = leakage_audit(s.plan, s.split, &s.targets, &table);
  json violations = json::array();
  for (const auto& v : audit.violations) {
    violations.push_back({{"kind", v.kind}, {"repetition", v.repetition}, {"fold", v.fold}, {"id", v.id}});
  }
  out.json("leakage_audit.json", {{"ok", audit.ok()}, {"violations", violations}});
  out.json("split_summary.json", {{"group_a", s.split.group_a.size()},
                                  {"group_b", s.split.group_b.size()},
                                  {"images", images.size()},
                                  {"dropped_images", s.targets.dropped},
                                  {"warnings", s.targets.warnings}});
  audit.enforce();
  return s;
}

struct CvOutputs {
  harness::PredictionSet predictions;
  std::map<std::string, double> targets_b;
};

CvOutputs stage_cv(Context& ctx, const RatingsTable& table, const OutputDir& out) {
  const auto& fpath = ctx.input(ctx.config.paths.features, "paths.features");
  const auto features = with_field("paths.features", [&] { return load_features(fpath); });
  const auto split = stage_split(ctx, table, &features, out);
  const auto& spec = ctx.config.cv.predictor;
  const auto result = harness::run_nested_cv(
      split.plan, split.targets, features, spec,
      {ctx.config.cv.n_trials, ctx.seed(), ctx.threads()});

  std::vector<std::vector<std::string>> rows;
  for (const auto& e : result.predictions.entries()) {
    rows.push_back({std::to_string(e.repetition), std::to_string(e.fold), e.image_id, fmt(e.raw),
                    fmt(e.clipped)});
  }
  out.csv("predictions.csv", {"repetition", "fold", "image_id", "raw", "clipped"}, rows);

  std::vector<std::string> header{"repetition", "fold", "trial"};
  for (const auto& [name, r] : spec.ranges) header.push_back(name);
  header.insert(header.end(), {"loss", "best_epoch", "selected", "error"});
  rows.clear();
  json folds = json::array();
  for (const auto& f : result.folds) {
    for (const auto& t : f.search.trials) {
      std::vector<std::string> row{std::to_string(f.repetition), std::to_string(f.fold),
                                   std::to_string(t.trial)};
      for (const auto& [name, v] : t.params) row.push_back(fmt(v));
      row.push_back(t.ok() ? fmt(t.loss) : "");
      row.push_back(t.best_epoch ? std::to_string(*t.best_epoch) : "");
      row.push_back(b(t.trial == f.search.best_trial));
      row.push_back(t.error);
      rows.push_back(std::move(row));
    }
    json params = json::object();
    for (const auto& [name, v] : f.search.best().params) params[name] = jnum(v);
    folds.push_back({{"repetition", f.repetition},
                     {"fold", f.fold},
                     {"best_trial", f.search.best_trial},
                     {"best_loss", jnum(f.search.best().loss)},
                     {"params", params},
                     {"best_epoch", f.best_epoch ? json(*f.best_epoch) : json(nullptr)},
                     {"effective_epochs",
                      f.effective_epochs ? json(*f.effective_epochs) : json(nullptr)}});
  }
  out.csv("cv_trials.csv", header, rows);
  out.json("cv_metadata.json",
           {{"search_scope", "per_outer_fold"},
            {"predictor", to_json(ctx.config)["cv"]["predictor"]},
            {"n_trials", ctx.config.cv.n_trials},
            {"repetitions", ctx.config.cv.plan.repetitions},
            {"folds", ctx.config.cv.plan.folds},
            {"inner_folds", ctx.config.cv.plan.inner_folds},
            {"validation_fraction", ctx.config.cv.plan.validation_fraction},
            {"train_targets", "group_a_mean"},
            {"test_targets", "group_b_mean"},
            {"epoch_buffer", harness::kEpochBuffer},
            {"cells", folds}});
  return {result.predictions, split.targets.means_b()};
}

void stage_metrics(const harness::PredictionSet& ps, const std::map<std::string, double>& targets,
                   const OutputDir& out) {
  const auto report = metrics::metric_report(ps, targets);
  const auto& m = report.single.mean;
  const auto& e = report.ensemble;
  out.csv("metrics.csv",
          {"n_images", "n_repetitions", "r2", "mae", "rmse", "r2_ens", "mae_ens", "rmse_ens"},
          {{std::to_string(report.n_images), std::to_string(report.single.per_repetition.size()),
            fmt(m.r2), fmt(m.mae), fmt(m.rmse), fmt(e.r2), fmt(e.mae), fmt(e.rmse)}});
  std::vector<std::vector<std::string>> rows;
  for (const auto& [rep, t] : report.single.per_repetition) {
    rows.push_back({std::to_string(rep), fmt(t.r2), fmt(t.mae), fmt(t.rmse)});
  }
  out.csv("metrics_by_repetition.csv", {"repetition", "r2", "mae", "rmse"}, rows);
}

void stage_icc(Context& ctx, const RatingsTable& table, const OutputDir& out) {
  const auto m = reliability::RatingMatrix::from_table(table);
  const auto& cfg = ctx.config.icc;
  const auto anova = reliability::two_way_anova(m, cfg.missing);
  reliability::BootstrapOptions opt;
  opt.sizes = cfg.sizes;
  opt.repetitions = cfg.repetitions;
  opt.seed = ctx.seed();
  opt.mode = cfg.missing;
  opt.threads = ctx.threads();
  const auto report = with_field("icc.sizes", [&] { return reliability::bootstrap_icc(m, opt); });

  std::vector<std::vector<std::string>> rows, summary;
  for (const auto& s : report.sizes) {
    for (std::size_t r = 0; r < s.values.size(); ++r) {
      rows.push_back({std::to_string(s.size), std::to_string(r), fmt(s.values[r])});
    }
    summary.push_back({std::to_string(s.size), fmt(s.mean), fmt(s.sd)});
  }
  out.csv("icc_report.csv", {"size", "rep", "icc"}, rows);
  out.csv("icc_summary.csv", {"size", "mean", "sd"}, summary);
  out.json("icc.json", {{"icc_all_raters", jnum(reliability::icc2k(anova))},
                        {"images", anova.n},
                        {"raters", anova.k},
                        {"imputed_cells", anova.imputed},
                        {"bms", jnum(anova.bms)},
                        {"jms", jnum(anova.jms)},
                        {"ems", jnum(anova.ems)},
                        {"df_error", jnum(anova.df_error)},
                        {"missing", reliability::to_string(cfg.missing)},
                        {"repetitions", cfg.repetitions},
                        {"warnings", report.warnings}});
  out.text("icc_boxplot.svg", svg::icc_boxplot(report));
}

void stage_curve(Context& ctx, const OutputDir& out) {
  const auto& path = ctx.input(ctx.config.paths.points, "paths.points");
  const auto series = with_field("paths.points", [&] { return load_points(path); });
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : series) {
    const auto form = with_field("curve.form", [&] {
      return curvefit::curve_form_from_string(s.form.empty() ? ctx.config.curve.form : s.form);
    });
    const auto fit = with_field("paths.points", [&] { return curvefit::fit_learning_curve(form, s.points); });
    rows.push_back({s.model, s.metric, curvefit::to_string(form), fmt(fit.params[0]),
                    fmt(fit.params[1]), fmt(fit.params[2]), fmt(fit.rss),
                    std::to_string(fit.iterations), b(fit.converged)});
    std::string name = "learning_curve";
    for (const auto& part : {s.model, s.metric}) {
      if (!slug(part).empty()) name += "_" + slug(part);
    }
    const std::string title = (s.model.empty() ? std::string("curve") : s.model) +
                              (s.metric.empty() ? "" : " " + s.metric);
    out.text(name + ".svg", svg::learning_curve(title, s.points, form, fit.params));
  }
  out.csv("learning_curve.csv",
          {"model", "metric", "form", "a", "b", "c", "rss", "iterations", "converged"}, rows);
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void stage_overlap(Context& ctx, const std::map<std::string, double>* fear, const OutputDir& out) {
  const auto& hdir = ctx.input(ctx.config.paths.heatmaps, "paths.heatmaps");
  const auto& mdir = ctx.input(ctx.config.paths.masks, "paths.masks");
  if (!fs::is_directory(hdir)) throw ValidationError("heatmaps path must be a directory", "paths.heatmaps");
  if (!fs::is_directory(mdir)) throw ValidationError("masks path must be a directory", "paths.masks");
  const auto masks = files_with_extension(mdir, ".pgm");
  if (masks.empty()) throw ValidationError("no .pgm masks in " + mdir.string(), "paths.masks");

  std::vector<attribution::OverlapRecord> records(masks.size());
  parallel_for(masks.size(), ctx.threads(), [&](std::size_t i) {
    const auto id = masks[i].stem().string();
    const auto mask = with_field("paths.masks", [&] { return load_mask(masks[i]); });
    std::vector<FloatGrid> grids;
    with_field("paths.heatmaps", [&] {
      if (fs::is_directory(hdir / id)) {
        for (const auto& f : files_with_extension(hdir / id, ".pfm")) grids.push_back(load_float_grid(f));
      } else if (fs::exists(hdir / (id + ".pfm"))) {
        grids.push_back(load_float_grid(hdir / (id + ".pfm")));
      }
      if (grids.empty()) throw ValidationError("no heatmap for image '" + id + "'");
      return 0;
    });
    const auto composite = with_field("paths.heatmaps", [&] { return attribution::composite_heatmap(grids); });
    records[i] = with_field("paths.masks", [&] { return attribution::overlap_stats(composite, mask, id); });
  });

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : records) {
    rows.push_back({r.image_id, fmt(r.mu_in), fmt(r.mu_out), fmt(r.delta), fmt(r.mask_fraction)});
  }
  out.csv("overlap.csv", {"image_id", "mu_in", "mu_out", "delta", "mask_fraction"}, rows);
  const auto t = attribution::paired_one_sided_t(records);
  out.json("ttest.json", {{"n", t.n},
                          {"mean_diff", jnum(t.mean_diff)},
                          {"sd_diff", jnum(t.sd_diff)},
                          {"t", jnum(t.t)},
                          {"df", jnum(t.df)},
                          {"one_sided_p", jnum(t.one_sided_p)},
                          {"p_display", fmt_p(t.one_sided_p)},
                          {"cohen_d", jnum(t.cohen_d)},
                          {"alternative", "mu_in > mu_out"}});
  const double threshold = ctx.config.overlap.fear_threshold;
  const auto ex = attribution::representative_examples(records, fear, threshold);
  out.json("representative_examples.json",
           {{"max_delta", ex.max_delta},
            {"nearest_zero", ex.nearest_zero},
            {"min_delta", ex.min_delta},
            {"candidates", ex.candidates},
            {"fear_threshold", fear ? jnum(threshold) : json(nullptr)}});
  if (fear) {
    rows.clear();
    for (const auto& r : records) {
      if (const auto it = fear->find(r.image_id); it != fear->end()) {
        rows.push_back({r.image_id, fmt(r.delta), fmt(it->second)});
      }
    }
    out.csv("delta_fear.csv", {"image_id", "delta", "fear"}, rows);
    const auto c = attribution::delta_fear_correlation(records, *fear);
    out.json("delta_fear.json", {{"n", c.n}, {"pearson", jnum(c.pearson)}, {"spearman", jnum(c.spearman)}});
  }
}

void stage_error(Context& ctx, const harness::PredictionSet& ps,
                 const std::map<std::string, double>& targets, const OutputDir& out) {
  const auto& cpath = ctx.input(ctx.config.paths.categories, "paths.categories");
  const auto categories = with_field("paths.categories", [&] { return load_categories(cpath); });
  const auto errors = error_analysis::image_errors(ps, targets);
  const auto& cfg = ctx.config.error_analysis;
  error_analysis::ErrorAnalysisOptions opt;
  opt.omnibus = {cfg.min_n, cfg.alpha, cfg.tie_correction};
  opt.bootstrap_replicates = cfg.bootstrap_replicates;
  opt.level = cfg.level;
  opt.seed = ctx.seed();
  opt.threads = ctx.threads();
  const auto report = with_field("error_analysis", [&] { return error_analysis::run_error_analysis(errors, categories, opt); });

  std::vector<std::vector<std::string>> rows;
  for (const auto& [id, e] : errors) rows.push_back({id, fmt(e)});
  out.csv("image_errors.csv", {"image_id", "abs_error"}, rows);

  rows.clear();
  for (const auto& s : report.descriptives) {
    rows.push_back({s.criterion, s.category, std::to_string(s.n), fmt(s.freq), fmt(s.mean_ae),
                    fmt(s.sd_ae), fmt(s.median_ae), fmt(s.iqr_ae), fmt(s.share), fmt(s.delta),
                    fmt(s.mean_ci_low), fmt(s.mean_ci_high), fmt(s.share_ci_low),
                    fmt(s.share_ci_high), b(s.descriptive_only)});
  }
  out.csv("descriptives.csv",
          {"criterion", "category", "n", "freq", "mean_ae", "sd_ae", "median_ae", "iqr_ae", "share",
           "delta", "mean_ci_low", "mean_ci_high", "share_ci_low", "share_ci_high",
           "descriptive_only"},
          rows);

  rows.clear();
  for (const auto& r : report.omnibus) {
    rows.push_back({r.criterion, std::to_string(r.n), std::to_string(r.k), std::to_string(r.min_n),
                    r.skipped() ? "" : fmt(r.h), r.skipped() ? "" : fmt(r.epsilon_sq),
                    r.skipped() ? "" : fmt(r.p), r.skipped() ? "" : fmt(r.p_fdr), b(r.significant),
                    r.skip_reason});
  }
  out.csv("omnibus.csv",
          {"criterion", "N", "k", "min_n", "H", "epsilon_sq", "p", "p_fdr", "significant",
           "skip_reason"},
          rows);

  rows.clear();
  for (const auto& row : report.posthoc) {
    const auto& d = row.pair;
    rows.push_back({row.criterion, d.group_a, d.group_b, std::to_string(d.n_a), std::to_string(d.n_b),
                    fmt(d.mean_rank_a), fmt(d.mean_rank_b), fmt(d.z), fmt(d.p), fmt(d.p_fdr),
                    fmt_p(d.p_fdr)});
  }
  out.csv("posthoc.csv",
          {"criterion", "group_a", "group_b", "n_a", "n_b", "mean_rank_a", "mean_rank_b", "z", "p",
           "p_fdr", "p_fdr_display"},
          rows);

  json top = json::array();
  for (const auto& r : report.top) {
    top.push_back({{"criterion", r.criterion},
                   {"H", jnum(r.h)},
                   {"epsilon_sq", jnum(r.epsilon_sq)},
                   {"p_fdr", jnum(r.p_fdr)}});
    out.text("share_frequency_" + slug(r.criterion) + ".svg",
             svg::share_frequency(r.criterion, report.descriptives));
  }
  out.json("top_criteria.json", {{"top", top},
                                 {"tie_correction", cfg.tie_correction},
                                 {"dunn_sides", "two-sided"},
                                 {"min_n", cfg.min_n},
                                 {"alpha", jnum(cfg.alpha)},
                                 {"bootstrap_replicates", cfg.bootstrap_replicates},
                                 {"level", jnum(cfg.level)}});
}

std::map<std::string, double> mean_rating_by_image(const RatingsTable& table) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : table.records()) {
    auto& a = acc[r.image_id];
    a.first += r.rating;
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [id, a] : acc) out[id] = a.first / static_cast<double>(a.second);
  return out;
}

void run_synth(Context& ctx, const OutputDir& out) {
  auto spec = ctx.config.synth.spec;
  spec.seed = ctx.seed();
  const auto data = synth::generate(spec);
  std::ostringstream s;
  write_ratings(s, data.ratings);
  out.text("ratings.csv", s.str());
  s.str("");
  write_features(s, data.features);
  out.text("features.csv", s.str());
  const auto images = data.ratings.image_ids();
  s.str("");
  write_categories(s, synth::categories(images, spec.seed));
  out.text("categories.csv", s.str());

  json effects = json::object();
  for (const auto& [id, v] : data.truth.image_effect) effects[id] = jnum(v);
  json raters = json::object();
  for (const auto& [id, v] : data.truth.rater_effect) raters[id] = jnum(v);
  json weights = json::array();
  for (double w : data.truth.weights) weights.push_back(jnum(w));
  out.json("truth.json", {{"image_effect", effects},
                          {"rater_effect", raters},
                          {"outliers", data.truth.outliers},
                          {"weights", weights},
                          {"truncated", data.truth.truncated},
                          {"repeats", data.truth.repeats}});

  // Learning-curve points from a known decay curve with small noise.
  auto rng = make_rng(spec.seed, "synth.points");
  std::vector<std::vector<std::string>> rows;
  for (double n : {50.0, 75.0, 100.0, 150.0, 200.0, 250.0, 313.0}) {
    const double y = 5.0 * std::exp(-0.02 * n) + 11.0 + 0.02 * rng.normal();
    rows.push_back({"synthetic", "mae", "decay", fmt(n), fmt(y)});
  }
  out.csv("learning_points.csv", {"model", "metric", "form", "n", "y"}, rows);

  json paths = {{"ratings", "ratings.csv"},
                {"features", "features.csv"},
                {"categories", "categories.csv"},
                {"points", "learning_points.csv"}};
  const auto& sc = ctx.config.synth;
  if (sc.attribution) {
    const auto att = synth::attribution(images, sc.heatmap_width, sc.heatmap_height, sc.heatmap_runs,
                                        sc.heatmap_signal, spec.seed);
    for (const auto& [id, sample] : att) {
      for (std::size_t r = 0; r < sample.heatmaps.size(); ++r) {
        std::ostringstream h;
        write_pfm(h, sample.heatmaps[r]);
        out.text("heatmaps/" + id + "/run" + std::to_string(r + 1) + ".pfm", h.str());
      }
      std::ostringstream m;
      write_pgm_mask(m, sample.mask);
      out.text("masks/" + id + ".pgm", m.str());
    }
    paths["heatmaps"] = "heatmaps";
    paths["masks"] = "masks";
  }
  json run = {{"seed", spec.seed}, {"paths", paths}};
  if (spec.n_raters < 80) {
    std::vector<std::size_t> sizes;
    for (std::size_t k = 10; k <= std::min<std::size_t>(80, spec.n_raters / 10 * 10); k += 10) {
      sizes.push_back(k);
    }
    if (sizes.empty()) sizes.push_back(std::min<std::size_t>(spec.n_raters, 2));
    run["icc"] = {{"sizes", sizes}};
  }
  out.json("run.json", run);
}

void run_all(Context& ctx, const OutputDir& out) {
  const auto loaded = read_ratings(ctx);
  const auto table = ctx.config.qc ? stage_qc(ctx, loaded, out.sub("qc")) : loaded.first_trial;
  const auto cv = stage_cv(ctx, table, out.sub("cv"));
  stage_metrics(cv.predictions, cv.targets_b, out.sub("metrics"));
  stage_icc(ctx, table, out.sub("icc"));
  if (ctx.config.paths.categories) stage_error(ctx, cv.predictions, cv.targets_b, out.sub("error_analysis"));
  if (ctx.config.paths.heatmaps && ctx.config.paths.masks) {
    std::map<std::string, double> fear;
    if (ctx.config.paths.fear) {
      const auto& fp = ctx.input(ctx.config.paths.fear, "paths.fear");
      fear = with_field("paths.fear", [&] { return load_fear(fp); });
    } else {
      fear = mean_rating_by_image(table);
    }
    stage_overlap(ctx, &fear, out.sub("overlap"));
  }
  if (ctx.config.paths.points) stage_curve(ctx, out.sub("curve"));
}

// ---- command line ---------------------------------------------------------

struct Flags {
  std::string config, out, seed;
  int threads = 0;
  std::string ratings, categories, features, heatmaps, masks, predictions, targets, points, fear;
  std::string form, icc_missing, predictor;
  long successes = -1, n = -1;
  double level = 0.95;
  int icc_reps = 0, bootstrap = 0, n_trials = 0;
  std::vector<std::size_t> icc_sizes;
  bool no_tie_correction = false, no_qc = false;
};

void print_error(std::ostream& err, const std::string& kind, const std::string& message,
                 const std::string& field, const std::string& command, int code) {
  json e = {{"kind", kind}, {"message", message}, {"command", command}};
  e["field"] = field.empty() ? json(nullptr) : json(field);
  err << json{{"error", e}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evaluation toolkit for fear-rating prediction experiments", "spidereval"};
  app.set_version_flag("--version", SPIDEREVAL_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--seed", f.seed, "Master seed (falls back to SPIDEREVAL_SEED)");
  app.add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--ratings", f.ratings, "Ratings CSV");
  app.add_option("--categories", f.categories, "Category CSV");
  app.add_option("--features", f.features, "Feature CSV");
  app.add_option("--heatmaps", f.heatmaps, "Heatmap directory");
  app.add_option("--masks", f.masks, "Mask directory");
  app.add_option("--predictions", f.predictions, "Predictions CSV");
  app.add_option("--targets", f.targets, "Evaluation targets CSV");
  app.add_option("--points", f.points, "Learning-curve points CSV");
  app.add_option("--fear", f.fear, "Observed fear per image CSV");
  app.add_option("--form", f.form, "Curve form: decay or rise");
  app.add_option("--icc-missing", f.icc_missing, "impute or complete_case");
  app.add_option("--icc-sizes", f.icc_sizes, "Rater subsample sizes");
  app.add_option("--icc-reps", f.icc_reps, "Bootstrap repetitions per size")->check(CLI::PositiveNumber);
  app.add_option("--bootstrap", f.bootstrap, "Error-analysis bootstrap replicates")->check(CLI::PositiveNumber);
  app.add_option("--n-trials", f.n_trials, "Random-search trials")->check(CLI::PositiveNumber);
  app.add_option("--predictor", f.predictor, "ridge or iterative");
  app.add_flag("--no-tie-correction", f.no_tie_correction, "Disable tie correction");
  app.add_flag("--no-qc", f.no_qc, "Skip rater QC in `all`");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"qc", "Rater quality control"},
      {"split", "Participant split, image targets and CV plan"},
      {"cv", "Nested cross-validation"},
      {"metrics", "Single-model and ensemble metrics"},
      {"icc", "ICC(2,k) bootstrap over rater subsets"},
      {"curve", "Learning-curve fits"},
      {"overlap", "Heatmap / mask overlap statistics"},
      {"error-analysis", "Category-wise error analysis"},
      {"prop-ci", "Wilson interval for a proportion"},
      {"synth", "Synthetic dataset with known ground truth"},
      {"all", "Full pipeline"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "prop-ci") {
      sub->add_option("--successes", f.successes, "Successes")->required();
      sub->add_option("--n", f.n, "Trials")->required();
      sub->add_option("--level", f.level, "Confidence level");
    }
  }

  std::string command;
  try {
    app.parse(argc, argv);
    command = app.get_subcommands().front()->get_name();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "validation", e.what(), "", "", 1);
    return 1;
  }

  Context ctx;
  ctx.command = command;
  try {
    ctx.config = f.config.empty() ? RunConfig{} : load_config(f.config);
    auto& c = ctx.config;
    auto set_path = [](std::optional<fs::path>& dst, const std::string& v) {
      if (!v.empty()) dst = fs::path(v);
    };
    set_path(c.out, f.out);
    set_path(c.paths.ratings, f.ratings);
    set_path(c.paths.categories, f.categories);
    set_path(c.paths.features, f.features);
    set_path(c.paths.heatmaps, f.heatmaps);
    set_path(c.paths.masks, f.masks);
    set_path(c.paths.predictions, f.predictions);
    set_path(c.paths.targets, f.targets);
    set_path(c.paths.points, f.points);
    set_path(c.paths.fear, f.fear);
    if (!f.seed.empty()) {
      const auto v = csv::parse_int(f.seed);
      if (!v || *v < 0) throw ValidationError("seed must be a non-negative integer", "seed");
      c.seed = static_cast<std::uint64_t>(*v);
    }
    if (f.threads > 0) c.threads = f.threads;
    if (!f.form.empty()) c.curve.form = f.form;
    if (!f.icc_missing.empty()) c.icc.missing = reliability::missing_mode_from_string(f.icc_missing);
    if (!f.icc_sizes.empty()) c.icc.sizes = f.icc_sizes;
    if (f.icc_reps > 0) c.icc.repetitions = f.icc_reps;
    if (f.bootstrap > 0) c.error_analysis.bootstrap_replicates = f.bootstrap;
    if (f.n_trials > 0) c.cv.n_trials = f.n_trials;
    if (!f.predictor.empty()) {
      c.cv.predictor = harness::predictor_kind_from_string(f.predictor) ==
                               harness::PredictorKind::RidgeClosedForm
                           ? harness::PredictorSpec::ridge()
                           : harness::PredictorSpec::iterative();
    }
    if (f.no_tie_correction) c.error_analysis.tie_correction = false;
    if (f.no_qc) c.qc = false;

    if (command == "prop-ci") {
      const auto [low, high] = reliability::wilson_ci(f.successes, f.n, f.level);
      const json result = {{"successes", f.successes},
                           {"n", f.n},
                           {"level", jnum(f.level)},
                           {"estimate", jnum(static_cast<double>(f.successes) / static_cast<double>(f.n))},
                           {"low", jnum(low)},
                           {"high", jnum(high)}};
      out << result.dump() << '\n';
      if (c.out) {
        const OutputDir dir(*c.out);
        dir.json("prop_ci.json", result);
        write_manifest(ctx, dir);
      }
      return 0;
    }

    const auto dir = ctx.out();
    if (command == "qc") {
      stage_qc(ctx, read_ratings(ctx), dir);
    } else if (command == "split") {
      stage_split(ctx, read_ratings(ctx).first_trial, nullptr, dir);
    } else if (command == "cv") {
      stage_cv(ctx, read_ratings(ctx).first_trial, dir);
    } else if (command == "metrics") {
      const auto& pp = ctx.input(c.paths.predictions, "paths.predictions");
      const auto& tp = ctx.input(c.paths.targets, "paths.targets");
      const auto ps = with_field("paths.predictions", [&] { return load_predictions(pp); });
      const auto targets = with_field("paths.targets", [&] { return load_targets(tp); });
      stage_metrics(ps, targets, dir);
    } else if (command == "icc") {
      stage_icc(ctx, read_ratings(ctx).first_trial, dir);
    } else if (command == "curve") {
      stage_curve(ctx, dir);
    } else if (command == "overlap") {
      std::optional<std::map<std::string, double>> fear;
      if (c.paths.fear) {
        const auto& fp = ctx.input(c.paths.fear, "paths.fear");
        fear = with_field("paths.fear", [&] { return load_fear(fp); });
      }
      stage_overlap(ctx, fear ? &*fear : nullptr, dir);
    } else if (command == "error-analysis") {
      const auto& pp = ctx.input(c.paths.predictions, "paths.predictions");
      const auto& tp = ctx.input(c.paths.targets, "paths.targets");
      const auto ps = with_field("paths.predictions", [&] { return load_predictions(pp); });
      const auto targets = with_field("paths.targets", [&] { return load_targets(tp); });
      stage_error(ctx, ps, targets, dir);
    } else if (command == "synth") {
      run_synth(ctx, dir);
    } else if (command == "all") {
      run_all(ctx, dir);
    }
    write_manifest(ctx, dir);
    return 0;
  } catch (const ValidationError& e) {
    print_error(err, "validation", e.what(), e.field(), command, 1);
    return 1;
  } catch (const fs::filesystem_error& e) {
    print_error(err, "validation", e.what(), "out", command, 1);
    return 1;
  } catch (const ComputationError& e) {
    print_error(err, "computation", e.what(), "", command, 2);
    return 2;
  } catch (const std::exception& e) {
    print_error(err, "computation", e.what(), "", command, 2);
    return 2;
  }
}

}  // namespace spidereval::app
