#include "outputs.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "spidereval/csv.hpp"
#include "spidereval/error.hpp"

namespace spidereval::app {

namespace {

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string(), "out");
  return out;
}

std::ifstream open_in(const fs::path& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string(), field);
  return in;
}

double need_double(const csv::Row& row, std::size_t col, const fs::path& path, const char* what) {
  const auto v = col < row.fields.size() ? csv::parse_double(row.fields[col]) : std::nullopt;
  if (!v || !std::isfinite(*v)) {
    throw ValidationError(path.filename().string() + " line " + std::to_string(row.line) +
                          ": bad " + what);
  }
  return *v;
}

std::string need_field(const csv::Row& row, std::size_t col, const fs::path& path, const char* what) {
  if (col >= row.fields.size() || row.fields[col].empty()) {
    throw ValidationError(path.filename().string() + " line " + std::to_string(row.line) +
                          ": missing " + what);
  }
  return row.fields[col];
}

}  // namespace

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) {}

void OutputDir::text(const std::string& name, const std::string& content) const {
  auto out = open_out(root_ / name);
  out << content;
}

void OutputDir::csv(const std::string& name, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) const {
  auto out = open_out(root_ / name);
  csv::write_row(out, header);
  for (const auto& r : rows) csv::write_row(out, r);
}

void OutputDir::json(const std::string& name, const nlohmann::json& doc) const {
  auto out = open_out(root_ / name);
  out << doc.dump(2) << '\n';
}

std::string fmt(double value) { return csv::format_double(value); }

std::string fmt_p(double p) {
  if (!std::isfinite(p)) return "";
  if (p < 0.001) return "< .001";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.3f", p);
  return buf;
}

nlohmann::json jnum(double value) {
  if (!std::isfinite(value)) return nullptr;
  // Round-trip through the CSV rule so JSON and CSV agree digit for digit.
  return *csv::parse_double(csv::format_double(value));
}

std::string sha256_file(const fs::path& path) {
  auto in = open_in(path, "input");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw ComputationError("SHA-256 initialisation failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

nlohmann::json digest_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[fs::relative(entry.path(), dir).generic_string()] = sha256_file(entry.path());
    }
  }
  return files;
}

harness::PredictionSet load_predictions(const fs::path& path) {
  auto in = open_in(path, "predictions");
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw ValidationError("predictions file is empty", "predictions");
  const csv::Header h(row, {"repetition", "fold", "image_id", "raw"});
  const auto rep = h.index("repetition"), fold = h.index("fold"), id = h.index("image_id"),
             raw = h.index("raw");
  harness::PredictionSet ps;
  while (reader.next(row)) {
    harness::PredictionEntry e;
    const auto r = csv::parse_int(rep < row.fields.size() ? row.fields[rep] : "");
    const auto f = csv::parse_int(fold < row.fields.size() ? row.fields[fold] : "");
    if (!r || !f) {
      throw ValidationError("predictions line " + std::to_string(row.line) +
                                ": repetition and fold must be integers",
                            "predictions");
    }
    e.repetition = static_cast<int>(*r);
    e.fold = static_cast<int>(*f);
    e.image_id = need_field(row, id, path, "image_id");
    e.raw = need_double(row, raw, path, "raw prediction");
    ps.add(std::move(e));
  }
  ps.sort();
  return ps;
}

std::map<std::string, double> load_targets(const fs::path& path) {
  auto in = open_in(path, "targets");
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw ValidationError("targets file is empty", "targets");
  const csv::Header h(row, {"image_id"});
  const auto col = h.find("target") ? h.find("target") : h.find("mean_b");
  if (!col) throw ValidationError("targets file needs a 'target' or 'mean_b' column", "targets");
  std::map<std::string, double> out;
  while (reader.next(row)) {
    const auto id = need_field(row, h.index("image_id"), path, "image_id");
    if (!out.emplace(id, need_double(row, *col, path, "target")).second) {
      throw ValidationError("duplicate target for image '" + id + "'", "targets");
    }
  }
  return out;
}

std::map<std::string, double> load_fear(const fs::path& path) {
  auto in = open_in(path, "fear");
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw ValidationError("fear file is empty", "fear");
  const csv::Header h(row, {"image_id", "fear"});
  std::map<std::string, double> out;
  while (reader.next(row)) {
    const auto id = need_field(row, h.index("image_id"), path, "image_id");
    if (!out.emplace(id, need_double(row, h.index("fear"), path, "fear")).second) {
      throw ValidationError("duplicate fear value for image '" + id + "'", "fear");
    }
  }
  return out;
}

std::vector<PointSeries> load_points(const fs::path& path) {
  auto in = open_in(path, "points");
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw ValidationError("points file is empty", "points");
  const csv::Header h(row, {"n", "y"});
  const auto model = h.find("model"), metric = h.find("metric"), form = h.find("form");
  std::vector<PointSeries> out;
  auto cell = [&](std::optional<std::size_t> c) {
    return c && *c < row.fields.size() ? row.fields[*c] : std::string();
  };
  while (reader.next(row)) {
    const std::string m = cell(model), k = cell(metric), f = cell(form);
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const PointSeries& s) { return s.model == m && s.metric == k; });
    if (it == out.end()) {
      out.push_back({m, k, f, {}});
      it = std::prev(out.end());
    } else if (it->form != f) {
      throw ValidationError("points line " + std::to_string(row.line) +
                                ": form changes within one series",
                            "points");
    }
    it->points.push_back({need_double(row, h.index("n"), path, "n"),
                          need_double(row, h.index("y"), path, "y")});
  }
  if (out.empty()) throw ValidationError("points file has no rows", "points");
  return out;
}

}  // namespace spidereval::app
