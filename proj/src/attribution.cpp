#include "spidereval/attribution.hpp"

#include <cmath>

#include "spidereval/error.hpp"
#include "spidereval/rater_qc.hpp"
#include "spidereval/special.hpp"
#include "spidereval/stats.hpp"

namespace spidereval::attribution {

FloatGrid composite_heatmap(std::span<const FloatGrid> grids) {
  if (grids.empty()) throw ValidationError("composite heatmap needs at least one grid");
  const auto w = grids.front().width;
  const auto h = grids.front().height;
  for (std::size_t g = 1; g < grids.size(); ++g) {
    if (grids[g].width != w || grids[g].height != h) {
      throw ValidationError("heatmap " + std::to_string(g) + " is " + std::to_string(grids[g].width) +
                            "x" + std::to_string(grids[g].height) + ", expected " +
                            std::to_string(w) + "x" + std::to_string(h));
    }
  }
  std::vector<double> values(w * h);
  const double count = static_cast<double>(grids.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    stats::CompensatedSum s;
    for (const auto& g : grids) s.add(g.values[i]);
    values[i] = s.value() / count;
  }
  return FloatGrid(w, h, std::move(values));
}

OverlapRecord overlap_stats(const FloatGrid& heatmap, const BinaryMask& mask, std::string image_id) {
  if (heatmap.width != mask.width || heatmap.height != mask.height) {
    throw ValidationError("mask size " + std::to_string(mask.width) + "x" +
                          std::to_string(mask.height) + " differs from heatmap size " +
                          std::to_string(heatmap.width) + "x" + std::to_string(heatmap.height) +
                          (image_id.empty() ? "" : " for image '" + image_id + "'"));
  }
  stats::CompensatedSum in, out;
  std::size_t n_in = 0;
  for (std::size_t i = 0; i < heatmap.values.size(); ++i) {
    if (mask.bits[i]) {
      in.add(heatmap.values[i]);
      ++n_in;
    } else {
      out.add(heatmap.values[i]);
    }
  }
  const std::size_t total = heatmap.values.size();
  if (n_in == 0 || n_in == total) {
    throw ValidationError("mask" + (image_id.empty() ? std::string() : " for image '" + image_id + "'") +
                          " must contain both spider and background pixels");
  }
  OverlapRecord r;
  r.image_id = std::move(image_id);
  r.mu_in = in.value() / static_cast<double>(n_in);
  r.mu_out = out.value() / static_cast<double>(total - n_in);
  r.delta = r.mu_in - r.mu_out;
  r.mask_fraction = static_cast<double>(n_in) / static_cast<double>(total);
  return r;
}

PairedTestResult paired_one_sided_t(std::span<const double> differences) {
  if (differences.size() < 2) throw ValidationError("paired t-test needs at least two pairs");
  PairedTestResult r;
  r.n = differences.size();
  r.mean_diff = stats::mean(differences);
  r.sd_diff = stats::sd(differences);
  if (!(r.sd_diff > 0.0)) throw ComputationError("paired t-test undefined: differences have zero variance");
  r.df = static_cast<double>(r.n - 1);
  r.t = r.mean_diff / (r.sd_diff / std::sqrt(static_cast<double>(r.n)));
  r.one_sided_p = special::student_t_sf(r.t, r.df);
  r.cohen_d = r.mean_diff / r.sd_diff;
  return r;
}

PairedTestResult paired_one_sided_t(std::span<const OverlapRecord> records) {
  std::vector<double> d;
  d.reserve(records.size());
  for (const auto& r : records) d.push_back(r.delta);
  return paired_one_sided_t(d);
}

RepresentativeExamples representative_examples(std::span<const OverlapRecord> records,
                                               const std::map<std::string, double>* observed_fear,
                                               double fear_threshold) {
  const OverlapRecord* hi = nullptr;
  const OverlapRecord* zero = nullptr;
  const OverlapRecord* lo = nullptr;
  RepresentativeExamples out;
  for (const auto& r : records) {
    if (observed_fear) {
      const auto f = observed_fear->find(r.image_id);
      if (f == observed_fear->end() || f->second < fear_threshold) continue;
    }
    ++out.candidates;
    auto better = [&](const OverlapRecord* cur, double key, double cur_key, bool larger) {
      if (!cur) return true;
      if (key != cur_key) return larger ? key > cur_key : key < cur_key;
      return r.image_id < cur->image_id;
    };
    if (better(hi, r.delta, hi ? hi->delta : 0.0, true)) hi = &r;
    if (better(zero, std::abs(r.delta), zero ? std::abs(zero->delta) : 0.0, false)) zero = &r;
    if (better(lo, r.delta, lo ? lo->delta : 0.0, false)) lo = &r;
  }
  if (!hi) {
    throw ValidationError(observed_fear ? "no image passes the observed-fear filter"
                                        : "no overlap records");
  }
  out.max_delta = hi->image_id;
  out.nearest_zero = zero->image_id;
  out.min_delta = lo->image_id;
  return out;
}

DeltaFearCorrelation delta_fear_correlation(std::span<const OverlapRecord> records,
                                            const std::map<std::string, double>& observed_fear) {
  std::vector<double> d, f;
  for (const auto& r : records) {
    const auto it = observed_fear.find(r.image_id);
    if (it == observed_fear.end()) continue;
    d.push_back(r.delta);
    f.push_back(it->second);
  }
  if (d.size() < 3) throw ValidationError("delta-fear correlation needs at least three images");
  DeltaFearCorrelation c;
  c.n = d.size();
  c.pearson = stats::pearson(d, f);
  c.spearman = qc::spearman_rho(d, f);
  return c;
}

}  // namespace spidereval::attribution
