#include "spidereval/rater_qc.hpp"

#include <algorithm>
#include <cmath>

#include "spidereval/error.hpp"
#include "spidereval/parallel.hpp"
#include "spidereval/stats.hpp"

namespace spidereval::qc {

namespace {

constexpr double kFence = 1.5;

struct ParticipantRatings {
  std::vector<double> ratings;
  std::vector<double> consensus;
};

std::map<std::string, ParticipantRatings> pair_with_consensus(const RatingsTable& table,
                                                              const ConsensusVector& consensus) {
  std::map<std::string, ParticipantRatings> out;
  for (const auto& r : table.records()) {
    const auto it = consensus.find(r.image_id);
    if (it == consensus.end()) {
      throw ValidationError("no consensus value for image '" + r.image_id + "'");
    }
    auto& entry = out[r.participant_id];
    entry.ratings.push_back(r.rating);
    entry.consensus.push_back(it->second);
  }
  return out;
}

std::optional<double> try_spearman(const ParticipantRatings& p) {
  if (p.ratings.size() < 3) return std::nullopt;
  try {
    return spearman_rho(p.ratings, p.consensus);
  } catch (const ComputationError&) {
    return std::nullopt;
  }
}

}  // namespace

ConsensusVector consensus_median(const RatingsTable& table) {
  std::map<std::string, std::vector<double>> by_image;
  for (const auto& r : table.records()) by_image[r.image_id].push_back(r.rating);
  ConsensusVector out;
  for (const auto& [image, ratings] : by_image) out.emplace(image, stats::median(ratings));
  return out;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman_rho: length mismatch");
  if (x.size() < 3) throw ValidationError("spearman_rho: need at least 3 pairs");
  const auto rx = stats::average_ranks(x);
  const auto ry = stats::average_ranks(y);
  return stats::pearson(rx, ry);
}

FenceResult flag_correlation_outliers(const std::map<std::string, double>& rhos) {
  if (rhos.size() < 4) {
    throw ValidationError("correlation outlier rule needs at least 4 participants");
  }
  std::vector<double> values;
  values.reserve(rhos.size());
  for (const auto& [id, rho] : rhos) values.push_back(rho);
  const auto q = stats::quartiles(values);
  FenceResult result;
  result.q1 = q.q1;
  result.q3 = q.q3;
  result.threshold = q.q1 - kFence * q.iqr();
  for (const auto& [id, rho] : rhos) {
    if (rho < result.threshold) result.flagged.insert(id);
  }
  return result;
}

std::map<std::string, double> mad_scores(const RatingsTable& table,
                                         const ConsensusVector& consensus) {
  std::map<std::string, double> scores;
  for (auto& [id, p] : pair_with_consensus(table, consensus)) {
    std::vector<double> deviations(p.ratings.size());
    for (std::size_t i = 0; i < deviations.size(); ++i) {
      deviations[i] = std::abs(p.ratings[i] - p.consensus[i]);
    }
    scores.emplace(id, stats::median(deviations));
  }
  return scores;
}

FenceResult flag_mad_outliers(const RatingsTable& table, const ConsensusVector& consensus) {
  const auto scores = mad_scores(table, consensus);
  if (scores.empty()) throw ValidationError("MAD rule: no participants");
  std::vector<double> values;
  for (const auto& [id, s] : scores) values.push_back(s);
  const auto q = stats::quartiles(values);
  FenceResult result;
  result.q1 = q.q1;
  result.q3 = q.q3;
  result.threshold = q.q3 + kFence * q.iqr();
  for (const auto& [id, s] : scores) {
    if (s > result.threshold) result.flagged.insert(id);
  }
  return result;
}

QcReport run_qc(const RatingsTable& table, int threads) {
  const auto consensus = consensus_median(table);
  const auto paired = pair_with_consensus(table, consensus);

  QcReport report;
  report.participants.resize(paired.size());
  std::vector<const std::pair<const std::string, ParticipantRatings>*> entries;
  for (const auto& entry : paired) entries.push_back(&entry);

  parallel_for(entries.size(), threads, [&](std::size_t i) {
    const auto& [id, p] = *entries[i];
    auto& out = report.participants[i];
    out.participant_id = id;
    out.n_ratings = p.ratings.size();
    out.rho = try_spearman(p);
  });

  std::map<std::string, double> rhos;
  for (const auto& p : report.participants) {
    if (p.rho) rhos.emplace(p.participant_id, *p.rho);
  }
  report.correlation = flag_correlation_outliers(rhos);
  for (const auto& p : report.participants) {
    if (!p.rho) report.correlation.flagged.insert(p.participant_id);
  }
  report.mad = flag_mad_outliers(table, consensus);
  const auto scores = mad_scores(table, consensus);

  for (auto& p : report.participants) {
    p.mad_score = scores.at(p.participant_id);
    p.corr_flag = report.correlation.flagged.count(p.participant_id) != 0;
    p.mad_flag = report.mad.flagged.count(p.participant_id) != 0;
    p.excluded = p.corr_flag || p.mad_flag;
    if (p.excluded) {
      report.excluded.push_back(p.participant_id);
      report.ratings_removed += p.n_ratings;
    }
  }
  report.ratings_before = table.size();
  report.ratings_after = report.ratings_before - report.ratings_removed;
  return report;
}

RatingsTable apply_exclusions(const RatingsTable& table, const QcReport& report) {
  auto filtered = table.without_participants(report.excluded);
  if (filtered.size() != report.ratings_after) {
    throw ComputationError("QC bookkeeping mismatch: expected " +
                           std::to_string(report.ratings_after) + " ratings, kept " +
                           std::to_string(filtered.size()));
  }
  return filtered;
}

}  // namespace spidereval::qc
