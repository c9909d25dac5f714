#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Minimal RFC 4180 reader/writer. Category labels contain commas
// ("artificial, painted or comic spider"), so quoting is required.
namespace spidereval::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based physical line where the record starts
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Reads the next record. Blank lines are skipped. Returns false at EOF.
  bool next(Row& row);

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

/// Maps header names to column positions; throws ValidationError naming the
/// first required column that is missing.
class Header {
 public:
  Header(const Row& row, const std::vector<std::string_view>& required);

  std::size_t index(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest form with at most 9 significant digits ("%.9g"); the single
/// serialization rule for every floating-point value the tools emit.
std::string format_double(double value);

/// Strict parse of the whole field; std::nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

}  // namespace spidereval::csv
