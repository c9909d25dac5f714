#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spidereval/curvefit.hpp"
#include "spidereval/harness.hpp"

namespace spidereval::app {

namespace fs = std::filesystem;

/// Everything a command writes goes through here, rooted at --out.
class OutputDir {
 public:
  explicit OutputDir(fs::path root);

  const fs::path& root() const { return root_; }
  OutputDir sub(const std::string& name) const { return OutputDir(root_ / name); }

  void text(const std::string& name, const std::string& content) const;
  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) const;
  void json(const std::string& name, const nlohmann::json& doc) const;

 private:
  fs::path root_;
};

std::string fmt(double value);
std::string fmt_p(double p);  // "< .001" for tiny p, else 3 decimals
/// JSON number, or null when not finite.
nlohmann::json jnum(double value);

std::string sha256_file(const fs::path& path);

/// Lowercase hex digest of every regular file under a directory, keyed by relative path.
nlohmann::json digest_tree(const fs::path& dir);

/// `repetition,fold,image_id,raw` (a `clipped` column is accepted and recomputed).
harness::PredictionSet load_predictions(const fs::path& path);
/// `image_id` plus a `target` column, or the `mean_b` column of image_targets.csv.
std::map<std::string, double> load_targets(const fs::path& path);
/// `image_id,fear`.
std::map<std::string, double> load_fear(const fs::path& path);

struct PointSeries {
  std::string model;
  std::string metric;
  std::string form;  // empty: use the default form
  std::vector<curvefit::Point> points;
};

/// `n,y` with optional `model`, `metric` and `form` columns; rows are grouped
/// by (model, metric) in first-appearance order.
std::vector<PointSeries> load_points(const fs::path& path);

}  // namespace spidereval::app
