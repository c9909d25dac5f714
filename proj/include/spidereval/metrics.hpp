#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "spidereval/harness.hpp"

namespace spidereval::metrics {

double mae(std::span<const double> pred, std::span<const double> obs);
double rmse(std::span<const double> pred, std::span<const double> obs);
/// 1 - SSE/SST with SST about mean(obs). Throws ComputationError when obs is constant.
double r2(std::span<const double> pred, std::span<const double> obs);

struct MetricTriple {
  double r2 = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

MetricTriple evaluate(std::span<const double> pred, std::span<const double> obs);

struct RepetitionMetrics {
  std::map<int, MetricTriple> per_repetition;
  MetricTriple mean;  // component-wise mean over repetitions
};

/// Metrics on the clipped held-out predictions of each repetition, then averaged.
/// Every repetition must cover the same image set, and each image needs a target.
RepetitionMetrics repetition_metrics(const harness::PredictionSet& ps,
                                     const std::map<std::string, double>& targets);

/// Per image, average the clipped predictions over repetitions, then score.
MetricTriple ensemble_metrics(const harness::PredictionSet& ps,
                              const std::map<std::string, double>& targets);

struct MetricReport {
  RepetitionMetrics single;
  MetricTriple ensemble;
  std::size_t n_images = 0;
};

/// Both of the above plus the Jensen check (ensemble MAE and MSE never exceed
/// the repetition means); a violation is a ComputationError.
MetricReport metric_report(const harness::PredictionSet& ps,
                           const std::map<std::string, double>& targets);

}  // namespace spidereval::metrics
