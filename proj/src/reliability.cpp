#include "spidereval/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "spidereval/error.hpp"
#include "spidereval/parallel.hpp"
#include "spidereval/rng.hpp"
#include "spidereval/special.hpp"
#include "spidereval/stats.hpp"

namespace spidereval::reliability {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

RatingMatrix::RatingMatrix(std::vector<std::string> images, std::vector<std::string> raters,
                           std::vector<double> cells)
    : images_(std::move(images)), raters_(std::move(raters)), cells_(std::move(cells)) {
  if (cells_.size() != images_.size() * raters_.size()) {
    throw ValidationError("rating matrix: cell count does not match rows x columns");
  }
  for (double v : cells_) {
    if (std::isinf(v)) throw ValidationError("rating matrix: infinite cell");
  }
}

RatingMatrix RatingMatrix::from_table(const RatingsTable& table) {
  const auto& images = table.image_ids();
  const auto& raters = table.participant_ids();
  std::map<std::string, std::size_t> row, col;
  for (std::size_t i = 0; i < images.size(); ++i) row[images[i]] = i;
  for (std::size_t j = 0; j < raters.size(); ++j) col[raters[j]] = j;
  std::vector<double> cells(images.size() * raters.size(), kNaN);
  for (const auto& r : table.records()) {
    auto& cell = cells[row.at(r.image_id) * raters.size() + col.at(r.participant_id)];
    if (!std::isnan(cell)) {
      throw ValidationError("rating matrix: participant '" + r.participant_id +
                            "' rated image '" + r.image_id + "' more than once; apply the first-trial filter");
    }
    cell = r.rating;
  }
  return RatingMatrix(images, raters, std::move(cells));
}

bool RatingMatrix::observed(std::size_t r, std::size_t c) const { return !std::isnan(at(r, c)); }

std::size_t RatingMatrix::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](double v) { return std::isnan(v); }));
}

RatingMatrix RatingMatrix::select_raters(const std::vector<std::size_t>& columns) const {
  std::vector<std::string> raters;
  for (auto c : columns) {
    if (c >= cols()) throw ValidationError("rating matrix: column index out of range");
    raters.push_back(raters_[c]);
  }
  std::vector<double> cells;
  cells.reserve(rows() * columns.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (auto c : columns) cells.push_back(at(r, c));
  }
  return RatingMatrix(images_, std::move(raters), std::move(cells)).drop_empty_rows();
}

RatingMatrix RatingMatrix::drop_empty_rows() const {
  std::vector<std::string> images;
  std::vector<double> cells;
  for (std::size_t r = 0; r < rows(); ++r) {
    bool any = false;
    for (std::size_t c = 0; c < cols() && !any; ++c) any = observed(r, c);
    if (!any) continue;
    images.push_back(images_[r]);
    for (std::size_t c = 0; c < cols(); ++c) cells.push_back(at(r, c));
  }
  return RatingMatrix(std::move(images), raters_, std::move(cells));
}

RatingMatrix RatingMatrix::complete_rows() const {
  std::vector<std::string> images;
  std::vector<double> cells;
  for (std::size_t r = 0; r < rows(); ++r) {
    bool all = true;
    for (std::size_t c = 0; c < cols() && all; ++c) all = observed(r, c);
    if (!all) continue;
    images.push_back(images_[r]);
    for (std::size_t c = 0; c < cols(); ++c) cells.push_back(at(r, c));
  }
  return RatingMatrix(std::move(images), raters_, std::move(cells));
}

MissingMode missing_mode_from_string(const std::string& name) {
  if (name == "impute") return MissingMode::Impute;
  if (name == "complete_case") return MissingMode::CompleteCase;
  throw ValidationError("unknown missing-data mode '" + name + "'", "icc.missing");
}

std::string to_string(MissingMode mode) {
  return mode == MissingMode::Impute ? "impute" : "complete_case";
}

AnovaTable two_way_anova(const RatingMatrix& input, MissingMode mode) {
  const RatingMatrix m =
      mode == MissingMode::CompleteCase ? input.complete_rows() : input.drop_empty_rows();
  const std::size_t n = m.rows();
  const std::size_t k = m.cols();
  if (n < 2 || k < 2) {
    throw ComputationError("ICC needs at least 2 images and 2 raters with observations (have " +
                           std::to_string(n) + " x " + std::to_string(k) + ")");
  }

  std::vector<double> y(n * k);
  std::size_t imputed = 0;
  if (m.missing_count() == 0) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) y[r * k + c] = m.at(r, c);
  } else {
    std::vector<stats::CompensatedSum> row_sum(n), col_sum(k);
    std::vector<std::size_t> row_n(n, 0), col_n(k, 0);
    stats::CompensatedSum all;
    std::size_t all_n = 0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < k; ++c) {
        if (!m.observed(r, c)) continue;
        row_sum[r].add(m.at(r, c));
        col_sum[c].add(m.at(r, c));
        all.add(m.at(r, c));
        ++row_n[r];
        ++col_n[c];
        ++all_n;
      }
    }
    const double grand = all.value() / static_cast<double>(all_n);
    for (std::size_t c = 0; c < k; ++c) {
      if (col_n[c] == 0) {
        throw ComputationError("rater '" + m.raters()[c] + "' has no observed ratings");
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      const double row_mean = row_sum[r].value() / static_cast<double>(row_n[r]);
      for (std::size_t c = 0; c < k; ++c) {
        if (m.observed(r, c)) {
          y[r * k + c] = m.at(r, c);
        } else {
          y[r * k + c] = row_mean + col_sum[c].value() / static_cast<double>(col_n[c]) - grand;
          ++imputed;
        }
      }
    }
  }

  std::vector<double> row_mean(n), col_mean(k);
  stats::CompensatedSum total;
  for (std::size_t r = 0; r < n; ++r) {
    stats::CompensatedSum s;
    for (std::size_t c = 0; c < k; ++c) s.add(y[r * k + c]);
    row_mean[r] = s.value() / static_cast<double>(k);
    total.add(s.value());
  }
  for (std::size_t c = 0; c < k; ++c) {
    stats::CompensatedSum s;
    for (std::size_t r = 0; r < n; ++r) s.add(y[r * k + c]);
    col_mean[c] = s.value() / static_cast<double>(n);
  }
  const double grand = total.value() / static_cast<double>(n * k);

  stats::CompensatedSum ss_rows, ss_cols, ss_error;
  for (std::size_t r = 0; r < n; ++r) ss_rows.add((row_mean[r] - grand) * (row_mean[r] - grand));
  for (std::size_t c = 0; c < k; ++c) ss_cols.add((col_mean[c] - grand) * (col_mean[c] - grand));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double e = y[r * k + c] - row_mean[r] - col_mean[c] + grand;
      ss_error.add(e * e);
    }
  }

  AnovaTable t;
  t.n = n;
  t.k = k;
  t.imputed = imputed;
  t.df_error = static_cast<double>((n - 1) * (k - 1)) - static_cast<double>(imputed);
  if (!(t.df_error > 0.0)) {
    throw ComputationError("degenerate ANOVA: residual df is " + std::to_string(t.df_error) +
                           " after " + std::to_string(imputed) + " imputed cells");
  }
  t.bms = static_cast<double>(k) * ss_rows.value() / static_cast<double>(n - 1);
  t.jms = static_cast<double>(n) * ss_cols.value() / static_cast<double>(k - 1);
  t.ems = ss_error.value() / t.df_error;
  return t;
}

double icc2k(const AnovaTable& a) {
  const double denom = a.bms + (a.jms - a.ems) / static_cast<double>(a.n);
  if (!(denom != 0.0) || !std::isfinite(denom)) {
    throw ComputationError("ICC(2,k) undefined: zero denominator");
  }
  return (a.bms - a.ems) / denom;
}

double icc2k(const RatingMatrix& m, MissingMode mode) { return icc2k(two_way_anova(m, mode)); }

IccBootstrapReport bootstrap_icc(const RatingMatrix& m, const BootstrapOptions& options) {
  if (options.repetitions < 1) {
    throw ValidationError("bootstrap repetitions must be >= 1", "icc.repetitions");
  }
  if (options.sizes.empty()) throw ValidationError("no bootstrap sizes given", "icc.sizes");
  for (auto s : options.sizes) {
    if (s < 2) throw ValidationError("bootstrap size must be >= 2", "icc.sizes");
    if (s > m.cols()) {
      throw ValidationError("bootstrap size " + std::to_string(s) + " exceeds the " +
                                std::to_string(m.cols()) + " available raters",
                            "icc.sizes");
    }
  }
  const auto reps = static_cast<std::size_t>(options.repetitions);
  const auto& sizes = options.sizes;
  std::vector<double> values(sizes.size() * reps);
  parallel_for(values.size(), options.threads, [&](std::size_t i) {
    const auto size = sizes[i / reps];
    const auto rep = i % reps;
    auto rng = make_rng(derive_seed(options.seed, "icc.size", size), "icc.rep", rep);
    const auto columns = sample_without_replacement(m.cols(), size, rng);
    values[i] = icc2k(m.select_raters(columns), options.mode);
  });

  IccBootstrapReport report;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    IccSizeSummary summary;
    summary.size = sizes[s];
    summary.values.assign(values.begin() + static_cast<std::ptrdiff_t>(s * reps),
                          values.begin() + static_cast<std::ptrdiff_t>((s + 1) * reps));
    summary.mean = stats::mean(summary.values);
    summary.sd = reps > 1 ? stats::sd(summary.values) : 0.0;
    report.sizes.push_back(std::move(summary));
  }
  std::vector<std::size_t> order(sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sizes[a] < sizes[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto& prev = report.sizes[order[i - 1]];
    const auto& cur = report.sizes[order[i]];
    if (cur.mean < prev.mean) {
      report.warnings.push_back("mean ICC decreases from size " + std::to_string(prev.size) +
                                " to size " + std::to_string(cur.size));
    }
  }
  return report;
}

std::pair<double, double> wilson_ci(long successes, long n, double level) {
  if (n < 1) throw ValidationError("n must be >= 1", "n");
  if (successes < 0 || successes > n) throw ValidationError("successes must lie in [0, n]", "successes");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)", "level");
  const double z = special::normal_quantile(1.0 - (1.0 - level) / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  const double low = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double high = successes == n ? 1.0 : std::min(1.0, centre + half);
  return {low, high};
}

}  // namespace spidereval::reliability
