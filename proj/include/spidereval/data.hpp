#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spidereval {

/// One presentation of one image to one participant.
struct RatingRecord {
  std::string participant_id;
  std::string image_id;
  int trial_index = 1;  // 1-based position within the participant's session
  double rating = 0.0;  // fear rating on the 0-100 scale

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

/// Long-form ratings. Construction validates every record: ids non-empty,
/// trial_index >= 1, rating finite and within [0, 100], and
/// (participant, image, trial) unique.
class RatingsTable {
 public:
  RatingsTable() = default;
  explicit RatingsTable(std::vector<RatingRecord> records);

  const std::vector<RatingRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Sorted, unique.
  const std::vector<std::string>& participant_ids() const { return participants_; }
  const std::vector<std::string>& image_ids() const { return images_; }

  /// Records whose participant is not in `excluded`.
  RatingsTable without_participants(const std::vector<std::string>& excluded) const;

 private:
  std::vector<RatingRecord> records_;
  std::vector<std::string> participants_;
  std::vector<std::string> images_;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct RatingsLoad {
  RatingsTable table;
  std::vector<RejectedRow> rejected;
  std::size_t input_rows = 0;  // data rows seen (header excluded)
};

enum class ParseMode { Strict, Lenient };

/// Parses `participant_id,image_id,trial_index,rating` CSV. Strict mode
/// throws ValidationError at the first bad row ("line N: ..."); lenient mode
/// collects it in `rejected`. In both modes parsed + rejected == input rows.
RatingsLoad parse_ratings(std::istream& in, ParseMode mode = ParseMode::Strict);
RatingsTable load_ratings(const std::filesystem::path& path);
void write_ratings(std::ostream& out, const RatingsTable& table);

/// Keeps, for each (participant, image), only the record with the smallest
/// trial_index. Output order follows the input order of the kept records.
RatingsTable first_trial_filter(const RatingsTable& table);

/// The twelve annotation criteria, in the order the tables report them.
inline constexpr std::array<std::string_view, 12> kCriteria = {
    "spider in picture", "cobweb in picture", "number of spiders", "subjective distance",
    "environment",       "texture",           "eyes",              "eating prey",
    "subjective size",   "perspective",       "color of picture",  "prominent legs"};

bool is_known_criterion(std::string_view name);

/// image -> category level for each annotation criterion.
class CategoryTable {
 public:
  CategoryTable() = default;
  /// Validates criterion names, duplicate keys and completeness: every image
  /// must carry a label for every criterion present.
  explicit CategoryTable(std::map<std::pair<std::string, std::string>, std::string> entries);

  std::optional<std::string> label(const std::string& image_id, const std::string& criterion) const;
  /// Criteria present, in canonical kCriteria order.
  const std::vector<std::string>& criteria() const { return criteria_; }
  const std::vector<std::string>& image_ids() const { return images_; }
  const std::map<std::pair<std::string, std::string>, std::string>& entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::string> entries_;
  std::vector<std::string> criteria_;
  std::vector<std::string> images_;
};

CategoryTable parse_categories(std::istream& in);
CategoryTable load_categories(const std::filesystem::path& path);
void write_categories(std::ostream& out, const CategoryTable& table);

/// Precomputed per-image embeddings, all of the same dimension.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(std::map<std::string, std::vector<double>> rows);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return rows_.size(); }
  bool contains(const std::string& image_id) const { return rows_.count(image_id) != 0; }
  const std::vector<double>& at(const std::string& image_id) const;
  const std::map<std::string, std::vector<double>>& rows() const { return rows_; }

 private:
  std::map<std::string, std::vector<double>> rows_;
  std::size_t dimension_ = 0;
};

/// `image_id,f0,...,f{D-1}` CSV.
FeatureTable parse_features(std::istream& in);
FeatureTable load_features(const std::filesystem::path& path);
void write_features(std::ostream& out, const FeatureTable& table);

}  // namespace spidereval
