#include "spidereval/metrics.hpp"

#include <cmath>

#include "spidereval/error.hpp"
#include "spidereval/stats.hpp"

namespace spidereval::metrics {

namespace {

void check_sizes(std::span<const double> pred, std::span<const double> obs) {
  if (pred.size() != obs.size()) throw ValidationError("prediction and target lengths differ");
  if (obs.size() < 2) throw ValidationError("need at least two observations");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!std::isfinite(pred[i]) || !std::isfinite(obs[i])) {
      throw ValidationError("non-finite value at position " + std::to_string(i));
    }
  }
}

double mse(std::span<const double> pred, std::span<const double> obs) {
  stats::CompensatedSum s;
  for (std::size_t i = 0; i < obs.size(); ++i) s.add((pred[i] - obs[i]) * (pred[i] - obs[i]));
  return s.value() / static_cast<double>(obs.size());
}

// Aligned (prediction, target) vectors for one repetition.
struct Aligned {
  std::vector<double> pred;
  std::vector<double> obs;
};

Aligned align(const std::map<std::string, double>& preds,
              const std::map<std::string, double>& targets) {
  Aligned a;
  for (const auto& [id, p] : preds) {
    const auto t = targets.find(id);
    if (t == targets.end()) throw ValidationError("no evaluation target for image '" + id + "'");
    a.pred.push_back(p);
    a.obs.push_back(t->second);
  }
  return a;
}

std::map<int, std::map<std::string, double>> checked_repetitions(const harness::PredictionSet& ps) {
  if (ps.size() == 0) throw ValidationError("prediction set is empty");
  auto by_rep = ps.clipped_by_repetition();
  const auto images = ps.image_ids();
  for (const auto& [rep, preds] : by_rep) {
    if (preds.size() == images.size()) continue;
    for (const auto& id : images) {
      if (!preds.count(id)) {
        throw ValidationError("repetition " + std::to_string(rep) + " has no prediction for image '" +
                              id + "'");
      }
    }
  }
  return by_rep;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> obs) {
  check_sizes(pred, obs);
  stats::CompensatedSum s;
  for (std::size_t i = 0; i < obs.size(); ++i) s.add(std::abs(pred[i] - obs[i]));
  return s.value() / static_cast<double>(obs.size());
}

double rmse(std::span<const double> pred, std::span<const double> obs) {
  check_sizes(pred, obs);
  return std::sqrt(mse(pred, obs));
}

double r2(std::span<const double> pred, std::span<const double> obs) {
  check_sizes(pred, obs);
  const double m = stats::mean(obs);
  stats::CompensatedSum sse, sst;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    sse.add((pred[i] - obs[i]) * (pred[i] - obs[i]));
    sst.add((obs[i] - m) * (obs[i] - m));
  }
  if (!(sst.value() > 0.0)) throw ComputationError("R^2 undefined: observed values have zero variance");
  if (sse.value() == 0.0) return 1.0;
  return 1.0 - sse.value() / sst.value();
}

MetricTriple evaluate(std::span<const double> pred, std::span<const double> obs) {
  return {r2(pred, obs), mae(pred, obs), rmse(pred, obs)};
}

RepetitionMetrics repetition_metrics(const harness::PredictionSet& ps,
                                     const std::map<std::string, double>& targets) {
  RepetitionMetrics out;
  for (const auto& [rep, preds] : checked_repetitions(ps)) {
    const auto a = align(preds, targets);
    out.per_repetition[rep] = evaluate(a.pred, a.obs);
  }
  stats::CompensatedSum r, m, s;
  for (const auto& [rep, t] : out.per_repetition) {
    r.add(t.r2);
    m.add(t.mae);
    s.add(t.rmse);
  }
  const auto k = static_cast<double>(out.per_repetition.size());
  out.mean = {r.value() / k, m.value() / k, s.value() / k};
  return out;
}

MetricTriple ensemble_metrics(const harness::PredictionSet& ps,
                              const std::map<std::string, double>& targets) {
  const auto by_rep = checked_repetitions(ps);
  std::map<std::string, stats::CompensatedSum> sums;
  for (const auto& [rep, preds] : by_rep) {
    for (const auto& [id, p] : preds) sums[id].add(p);
  }
  std::map<std::string, double> averaged;
  const auto k = static_cast<double>(by_rep.size());
  for (const auto& [id, s] : sums) averaged[id] = s.value() / k;
  const auto a = align(averaged, targets);
  return evaluate(a.pred, a.obs);
}

MetricReport metric_report(const harness::PredictionSet& ps,
                           const std::map<std::string, double>& targets) {
  MetricReport report;
  report.single = repetition_metrics(ps, targets);
  report.ensemble = ensemble_metrics(ps, targets);
  report.n_images = ps.image_ids().size();

  stats::CompensatedSum mean_mse;
  for (const auto& [rep, t] : report.single.per_repetition) mean_mse.add(t.rmse * t.rmse);
  const double k = static_cast<double>(report.single.per_repetition.size());
  const double tol = 1e-9;
  if (report.ensemble.mae > report.single.mean.mae * (1.0 + tol) + tol) {
    throw ComputationError("ensemble MAE exceeds mean repetition MAE");
  }
  if (report.ensemble.rmse * report.ensemble.rmse > (mean_mse.value() / k) * (1.0 + tol) + tol) {
    throw ComputationError("ensemble MSE exceeds mean repetition MSE");
  }
  return report;
}

}  // namespace spidereval::metrics
