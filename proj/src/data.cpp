#include "spidereval/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>
#include <unordered_map>

#include "spidereval/csv.hpp"
#include "spidereval/error.hpp"

namespace spidereval {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'", path.string());
  return in;
}

std::string record_problem(const RatingRecord& r) {
  if (r.participant_id.empty()) return "empty participant_id";
  if (r.image_id.empty()) return "empty image_id";
  if (r.trial_index < 1) return "trial_index must be >= 1";
  if (!std::isfinite(r.rating)) return "rating is not finite";
  if (r.rating < 0.0 || r.rating > 100.0) {
    return "rating " + csv::format_double(r.rating) + " outside [0, 100]";
  }
  return {};
}

using RecordKey = std::tuple<std::string, std::string, int>;

}  // namespace

RatingsTable::RatingsTable(std::vector<RatingRecord> records) : records_(std::move(records)) {
  std::set<RecordKey> seen;
  std::set<std::string> participants;
  std::set<std::string> images;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (auto problem = record_problem(r); !problem.empty()) {
      throw ValidationError("record " + std::to_string(i) + ": " + problem);
    }
    if (!seen.emplace(r.participant_id, r.image_id, r.trial_index).second) {
      throw ValidationError("duplicate record (" + r.participant_id + ", " + r.image_id + ", " +
                            std::to_string(r.trial_index) + ")");
    }
    participants.insert(r.participant_id);
    images.insert(r.image_id);
  }
  participants_.assign(participants.begin(), participants.end());
  images_.assign(images.begin(), images.end());
}

RatingsTable RatingsTable::without_participants(const std::vector<std::string>& excluded) const {
  const std::set<std::string> drop(excluded.begin(), excluded.end());
  std::vector<RatingRecord> kept;
  kept.reserve(records_.size());
  for (const auto& r : records_) {
    if (!drop.count(r.participant_id)) kept.push_back(r);
  }
  return RatingsTable(std::move(kept));
}

RatingsLoad parse_ratings(std::istream& in, ParseMode mode) {
  csv::Reader reader(in);
  csv::Row row;
  RatingsLoad load;
  if (!reader.next(row)) return load;
  const csv::Header header(row, {"participant_id", "image_id", "trial_index", "rating"});
  const auto c_participant = header.index("participant_id");
  const auto c_image = header.index("image_id");
  const auto c_trial = header.index("trial_index");
  const auto c_rating = header.index("rating");
  const std::size_t width = header.names().size();

  std::vector<RatingRecord> records;
  std::set<RecordKey> seen;
  auto reject = [&](std::size_t line, std::string reason) {
    if (mode == ParseMode::Strict) {
      throw ValidationError("line " + std::to_string(line) + ": " + reason, "ratings");
    }
    load.rejected.push_back({line, std::move(reason)});
  };

  while (reader.next(row)) {
    ++load.input_rows;
    if (row.fields.size() != width) {
      reject(row.line, "expected " + std::to_string(width) + " fields, found " +
                           std::to_string(row.fields.size()));
      continue;
    }
    const auto trial = csv::parse_int(row.fields[c_trial]);
    const auto rating = csv::parse_double(row.fields[c_rating]);
    if (!trial) {
      reject(row.line, "trial_index '" + row.fields[c_trial] + "' is not an integer");
      continue;
    }
    if (!rating) {
      reject(row.line, "rating '" + row.fields[c_rating] + "' is not a number");
      continue;
    }
    RatingRecord record{row.fields[c_participant], row.fields[c_image], static_cast<int>(*trial),
                        *rating};
    if (auto problem = record_problem(record); !problem.empty()) {
      reject(row.line, problem);
      continue;
    }
    if (!seen.emplace(record.participant_id, record.image_id, record.trial_index).second) {
      reject(row.line, "duplicate (participant, image, trial) (" + record.participant_id + ", " +
                           record.image_id + ", " + std::to_string(record.trial_index) + ")");
      continue;
    }
    records.push_back(std::move(record));
  }
  load.table = RatingsTable(std::move(records));
  return load;
}

RatingsTable load_ratings(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_ratings(in, ParseMode::Strict).table;
}

void write_ratings(std::ostream& out, const RatingsTable& table) {
  csv::write_row(out, {"participant_id", "image_id", "trial_index", "rating"});
  for (const auto& r : table.records()) {
    csv::write_row(out, {r.participant_id, r.image_id, std::to_string(r.trial_index),
                         csv::format_double(r.rating)});
  }
}

RatingsTable first_trial_filter(const RatingsTable& table) {
  const auto& records = table.records();
  std::map<std::pair<std::string, std::string>, std::size_t> first;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto key = std::make_pair(records[i].participant_id, records[i].image_id);
    auto [it, inserted] = first.emplace(key, i);
    if (!inserted && records[i].trial_index < records[it->second].trial_index) it->second = i;
  }
  std::vector<std::size_t> keep;
  keep.reserve(first.size());
  for (const auto& [key, index] : first) keep.push_back(index);
  std::sort(keep.begin(), keep.end());
  std::vector<RatingRecord> kept;
  kept.reserve(keep.size());
  for (const auto i : keep) kept.push_back(records[i]);
  return RatingsTable(std::move(kept));
}

bool is_known_criterion(std::string_view name) {
  return std::find(kCriteria.begin(), kCriteria.end(), name) != kCriteria.end();
}

CategoryTable::CategoryTable(std::map<std::pair<std::string, std::string>, std::string> entries)
    : entries_(std::move(entries)) {
  std::set<std::string> criteria;
  std::set<std::string> images;
  for (const auto& [key, label] : entries_) {
    const auto& [image, criterion] = key;
    if (!is_known_criterion(criterion)) {
      throw ValidationError("unknown criterion '" + criterion + "'", "criterion");
    }
    if (image.empty()) throw ValidationError("empty image_id in category table", "image_id");
    if (label.empty()) {
      throw ValidationError("empty category for (" + image + ", " + criterion + ")", "category");
    }
    criteria.insert(criterion);
    images.insert(image);
  }
  for (const auto name : kCriteria) {
    if (criteria.count(std::string(name))) criteria_.emplace_back(name);
  }
  images_.assign(images.begin(), images.end());
  for (const auto& image : images_) {
    for (const auto& criterion : criteria_) {
      if (!entries_.count({image, criterion})) {
        throw ValidationError("image '" + image + "' has no category for criterion '" +
                                  criterion + "'",
                              "category");
      }
    }
  }
}

std::optional<std::string> CategoryTable::label(const std::string& image_id,
                                                const std::string& criterion) const {
  const auto it = entries_.find({image_id, criterion});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

CategoryTable parse_categories(std::istream& in) {
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) return {};
  const csv::Header header(row, {"image_id", "criterion", "category"});
  const auto c_image = header.index("image_id");
  const auto c_criterion = header.index("criterion");
  const auto c_category = header.index("category");
  std::map<std::pair<std::string, std::string>, std::string> entries;
  while (reader.next(row)) {
    if (row.fields.size() != header.names().size()) {
      throw ValidationError("line " + std::to_string(row.line) + ": wrong number of fields",
                            "categories");
    }
    auto key = std::make_pair(row.fields[c_image], row.fields[c_criterion]);
    if (!is_known_criterion(key.second)) {
      throw ValidationError(
          "line " + std::to_string(row.line) + ": unknown criterion '" + key.second + "'",
          "criterion");
    }
    if (!entries.emplace(std::move(key), row.fields[c_category]).second) {
      throw ValidationError("line " + std::to_string(row.line) + ": duplicate (image, criterion)",
                            "categories");
    }
  }
  return CategoryTable(std::move(entries));
}

CategoryTable load_categories(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_categories(in);
}

void write_categories(std::ostream& out, const CategoryTable& table) {
  csv::write_row(out, {"image_id", "criterion", "category"});
  for (const auto& image : table.image_ids()) {
    for (const auto& criterion : table.criteria()) {
      csv::write_row(out, {image, criterion, *table.label(image, criterion)});
    }
  }
}

FeatureTable::FeatureTable(std::map<std::string, std::vector<double>> rows)
    : rows_(std::move(rows)) {
  for (const auto& [image, values] : rows_) {
    if (values.empty()) throw ValidationError("feature vector for '" + image + "' is empty");
    if (dimension_ == 0) dimension_ = values.size();
    if (values.size() != dimension_) {
      throw ValidationError("feature vector for '" + image + "' has dimension " +
                            std::to_string(values.size()) + ", expected " +
                            std::to_string(dimension_));
    }
    for (const double v : values) {
      if (!std::isfinite(v)) throw ValidationError("non-finite feature for '" + image + "'");
    }
  }
}

const std::vector<double>& FeatureTable::at(const std::string& image_id) const {
  const auto it = rows_.find(image_id);
  if (it == rows_.end()) throw ValidationError("no features for image '" + image_id + "'");
  return it->second;
}

FeatureTable parse_features(std::istream& in) {
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) return {};
  const csv::Header header(row, {"image_id"});
  if (header.index("image_id") != 0) {
    throw ValidationError("features: image_id must be the first column", "features");
  }
  const std::size_t dimension = header.names().size() - 1;
  if (dimension == 0) throw ValidationError("features: no feature columns", "features");
  for (std::size_t d = 0; d < dimension; ++d) {
    if (header.names()[d + 1] != "f" + std::to_string(d)) {
      throw ValidationError("features: column " + std::to_string(d + 1) + " should be 'f" +
                                std::to_string(d) + "'",
                            "features");
    }
  }
  std::map<std::string, std::vector<double>> rows;
  while (reader.next(row)) {
    if (row.fields.size() != dimension + 1) {
      throw ValidationError("line " + std::to_string(row.line) + ": wrong number of fields",
                            "features");
    }
    std::vector<double> values(dimension);
    for (std::size_t d = 0; d < dimension; ++d) {
      const auto v = csv::parse_double(row.fields[d + 1]);
      if (!v || !std::isfinite(*v)) {
        throw ValidationError("line " + std::to_string(row.line) + ": bad value in column f" +
                                  std::to_string(d),
                              "features");
      }
      values[d] = *v;
    }
    if (!rows.emplace(row.fields[0], std::move(values)).second) {
      throw ValidationError("line " + std::to_string(row.line) + ": duplicate image_id",
                            "features");
    }
  }
  return FeatureTable(std::move(rows));
}

FeatureTable load_features(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_features(in);
}

void write_features(std::ostream& out, const FeatureTable& table) {
  std::vector<std::string> header{"image_id"};
  for (std::size_t d = 0; d < table.dimension(); ++d) header.push_back("f" + std::to_string(d));
  csv::write_row(out, header);
  for (const auto& [image, values] : table.rows()) {
    std::vector<std::string> fields{image};
    for (const double v : values) fields.push_back(csv::format_double(v));
    csv::write_row(out, fields);
  }
}

}  // namespace spidereval
