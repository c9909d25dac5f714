#include "spidereval/error_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spidereval/error.hpp"
#include "spidereval/parallel.hpp"
#include "spidereval/rng.hpp"
#include "spidereval/special.hpp"
#include "spidereval/stats.hpp"

namespace spidereval::error_analysis {

namespace {

double tie_sum(std::span<const double> pooled) {
  double s = 0.0;
  for (auto t : stats::tie_group_sizes(pooled)) {
    const double tt = static_cast<double>(t);
    s += tt * tt * tt - tt;
  }
  return s;
}

std::vector<double> pool(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  return all;
}

}  // namespace

ImageErrors image_errors(const harness::PredictionSet& ps, const std::map<std::string, double>& targets) {
  const auto by_rep = ps.clipped_by_repetition();
  if (by_rep.empty()) throw ValidationError("prediction set is empty");
  const auto images = ps.image_ids();
  ImageErrors out;
  for (const auto& id : images) {
    const auto t = targets.find(id);
    if (t == targets.end()) throw ValidationError("no evaluation target for image '" + id + "'");
    stats::CompensatedSum s;
    for (const auto& [rep, preds] : by_rep) {
      const auto p = preds.find(id);
      if (p == preds.end()) {
        throw ValidationError("repetition " + std::to_string(rep) + " has no prediction for image '" +
                              id + "'");
      }
      s.add(std::abs(p->second - t->second));
    }
    out[id] = s.value() / static_cast<double>(by_rep.size());
  }
  return out;
}

KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups, bool tie_correction) {
  if (groups.size() < 2) throw ValidationError("Kruskal-Wallis needs at least two groups");
  for (const auto& g : groups) {
    if (g.empty()) throw ValidationError("Kruskal-Wallis group is empty");
  }
  const auto all = pool(groups);
  const double n = static_cast<double>(all.size());
  if (all.size() < 3) throw ValidationError("Kruskal-Wallis needs at least three observations");
  const auto ranks = stats::average_ranks(all);

  double sum_term = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r += ranks[offset + i];
    offset += g.size();
    sum_term += r * r / static_cast<double>(g.size());
  }
  double h = 12.0 / (n * (n + 1.0)) * sum_term - 3.0 * (n + 1.0);
  if (tie_correction) {
    const double c = 1.0 - tie_sum(all) / (n * n * n - n);
    if (!(c > 0.0)) throw ComputationError("Kruskal-Wallis undefined: all values are identical");
    h /= c;
  }
  h = std::max(h, 0.0);
  KruskalResult r;
  r.h = h;
  r.n = all.size();
  r.k = groups.size();
  r.p = special::chi_square_sf(h, static_cast<double>(groups.size() - 1));
  return r;
}

double epsilon_squared(double h, std::size_t n, std::size_t k) {
  if (n <= k) throw ValidationError("epsilon squared needs N > k");
  return (h - static_cast<double>(k) + 1.0) / static_cast<double>(n - k);
}

std::vector<double> bh_fdr(std::span<const double> p) {
  const std::size_t m = p.size();
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> adjusted(m);
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    const double v = p[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1);
    running = std::min(running, v);
    adjusted[order[i]] = std::min(running, 1.0);
  }
  return adjusted;
}

std::vector<DunnPair> dunn_posthoc(const std::map<std::string, std::vector<double>>& groups,
                                   bool tie_correction) {
  if (groups.size() < 2) throw ValidationError("Dunn test needs at least two groups");
  std::vector<std::vector<double>> values;
  std::vector<std::string> names;
  for (const auto& [name, g] : groups) {
    if (g.empty()) throw ValidationError("Dunn test group '" + name + "' is empty");
    names.push_back(name);
    values.push_back(g);
  }
  const auto all = pool(values);
  const double n = static_cast<double>(all.size());
  const auto ranks = stats::average_ranks(all);
  std::vector<double> mean_rank;
  std::size_t offset = 0;
  for (const auto& g : values) {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r += ranks[offset + i];
    offset += g.size();
    mean_rank.push_back(r / static_cast<double>(g.size()));
  }
  double base = n * (n + 1.0) / 12.0;
  if (tie_correction) base -= tie_sum(all) / (12.0 * (n - 1.0));

  std::vector<DunnPair> pairs;
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      DunnPair d;
      d.group_a = names[a];
      d.group_b = names[b];
      d.n_a = values[a].size();
      d.n_b = values[b].size();
      d.mean_rank_a = mean_rank[a];
      d.mean_rank_b = mean_rank[b];
      const double diff = mean_rank[a] - mean_rank[b];
      const double se =
          std::sqrt(base * (1.0 / static_cast<double>(d.n_a) + 1.0 / static_cast<double>(d.n_b)));
      if (diff == 0.0) {
        d.z = 0.0;
      } else if (!(se > 0.0)) {
        throw ComputationError("Dunn test undefined: zero rank variance");
      } else {
        d.z = diff / se;
      }
      d.p = std::min(1.0, 2.0 * special::normal_sf(std::abs(d.z)));
      pairs.push_back(std::move(d));
    }
  }
  std::vector<double> raw;
  for (const auto& d : pairs) raw.push_back(d.p);
  const auto adj = bh_fdr(raw);
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].p_fdr = adj[i];
  return pairs;
}

std::map<std::string, std::map<std::string, std::vector<double>>> group_errors(
    const ImageErrors& errors, const CategoryTable& categories) {
  std::map<std::string, std::map<std::string, std::vector<double>>> out;
  for (const auto& criterion : categories.criteria()) {
    auto& by_cat = out[criterion];
    for (const auto& [id, e] : errors) {
      const auto label = categories.label(id, criterion);
      if (!label) {
        throw ValidationError("image '" + id + "' has no category for criterion '" + criterion + "'",
                              "categories");
      }
      by_cat[*label].push_back(e);
    }
  }
  return out;
}

std::vector<CategorySummary> category_summaries(const ImageErrors& errors,
                                                const CategoryTable& categories, std::size_t min_n) {
  if (errors.empty()) throw ValidationError("no image errors");
  const auto grouped = group_errors(errors, categories);
  double total_error = 0.0;
  {
    stats::CompensatedSum s;
    for (const auto& [id, e] : errors) s.add(e);
    total_error = s.value();
  }
  const double n_total = static_cast<double>(errors.size());
  std::vector<CategorySummary> out;
  for (const auto& criterion : categories.criteria()) {
    for (const auto& [category, values] : grouped.at(criterion)) {
      CategorySummary s;
      s.criterion = criterion;
      s.category = category;
      s.n = values.size();
      s.freq = static_cast<double>(s.n) / n_total;
      s.mean_ae = stats::mean(values);
      if (s.n >= 2) s.sd_ae = stats::sd(values);
      const auto q = stats::quartiles(values);
      s.median_ae = q.median;
      s.iqr_ae = q.iqr();
      s.share = total_error > 0.0 ? stats::sum(values) / total_error : s.freq;
      s.delta = s.share - s.freq;
      s.descriptive_only = s.n < min_n;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::map<std::string, BootstrapCi> stratified_bootstrap_ci(const ImageErrors& errors,
                                                           const CategoryTable& categories,
                                                           const std::string& criterion,
                                                           int replicates, double level,
                                                           std::uint64_t seed, int threads) {
  if (replicates < 100) throw ValidationError("bootstrap needs at least 100 replicates", "bootstrap.replicates");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)", "bootstrap.level");
  const auto grouped = group_errors(errors, categories);
  const auto it = grouped.find(criterion);
  if (it == grouped.end()) throw ValidationError("unknown criterion '" + criterion + "'", "criterion");
  std::vector<std::string> names;
  std::vector<std::vector<double>> strata;
  for (const auto& [name, v] : it->second) {
    if (v.empty()) throw ValidationError("category '" + name + "' is empty");
    names.push_back(name);
    strata.push_back(v);
  }
  const std::size_t k = strata.size();
  const auto b_count = static_cast<std::size_t>(replicates);
  // Row-major: replicate b, category c.
  std::vector<double> means(b_count * k), shares(b_count * k);
  parallel_for(b_count, threads, [&](std::size_t b) {
    auto rng = make_rng(derive_seed(seed, "error.bootstrap." + criterion), "replicate", b);
    std::vector<double> sums(k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const auto& s = strata[c];
      stats::CompensatedSum acc;
      for (std::size_t i = 0; i < s.size(); ++i) {
        acc.add(s[rng.bounded(static_cast<std::uint32_t>(s.size()))]);
      }
      sums[c] = acc.value();
      total += sums[c];
      means[b * k + c] = sums[c] / static_cast<double>(s.size());
    }
    for (std::size_t c = 0; c < k; ++c) {
      shares[b * k + c] = total > 0.0 ? sums[c] / total : 1.0 / static_cast<double>(k);
    }
  });
  const double lo = (1.0 - level) / 2.0;
  const double hi = 1.0 - lo;
  std::map<std::string, BootstrapCi> out;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> m(b_count), s(b_count);
    for (std::size_t b = 0; b < b_count; ++b) {
      m[b] = means[b * k + c];
      s[b] = shares[b * k + c];
    }
    out[names[c]] = {stats::quantile(m, lo), stats::quantile(m, hi), stats::quantile(s, lo),
                     stats::quantile(s, hi)};
  }
  return out;
}

std::vector<OmnibusResult> omnibus_tests(const ImageErrors& errors, const CategoryTable& categories,
                                         const OmnibusOptions& options) {
  const auto grouped = group_errors(errors, categories);
  std::vector<OmnibusResult> out;
  std::vector<std::size_t> tested;
  std::vector<double> raw;
  for (const auto& criterion : categories.criteria()) {
    const auto& by_cat = grouped.at(criterion);
    OmnibusResult r;
    r.criterion = criterion;
    r.k = by_cat.size();
    r.min_n = std::numeric_limits<std::size_t>::max();
    std::vector<std::vector<double>> groups;
    for (const auto& [name, v] : by_cat) {
      r.n += v.size();
      r.min_n = std::min(r.min_n, v.size());
      groups.push_back(v);
    }
    if (r.k < 2) {
      r.skip_reason = "single category";
    } else if (r.min_n < options.min_n) {
      r.skip_reason = "small cells (min_n=" + std::to_string(options.min_n) + ")";
    } else {
      const auto kw = kruskal_wallis(groups, options.tie_correction);
      r.h = kw.h;
      r.p = kw.p;
      r.epsilon_sq = epsilon_squared(kw.h, kw.n, kw.k);
      tested.push_back(out.size());
      raw.push_back(kw.p);
    }
    out.push_back(std::move(r));
  }
  const auto adj = bh_fdr(raw);
  for (std::size_t i = 0; i < tested.size(); ++i) {
    auto& r = out[tested[i]];
    r.p_fdr = adj[i];
    r.significant = r.p_fdr < options.alpha;
  }
  return out;
}

std::vector<OmnibusResult> rank_top_criteria(std::span<const OmnibusResult> results, std::size_t count) {
  std::vector<OmnibusResult> sig;
  for (const auto& r : results) {
    if (!r.skipped() && r.significant) sig.push_back(r);
  }
  std::stable_sort(sig.begin(), sig.end(), [](const auto& a, const auto& b) {
    if (a.epsilon_sq != b.epsilon_sq) return a.epsilon_sq > b.epsilon_sq;
    return a.p_fdr < b.p_fdr;
  });
  if (sig.size() > count) sig.resize(count);
  return sig;
}

ErrorAnalysisReport run_error_analysis(const ImageErrors& errors, const CategoryTable& categories,
                                       const ErrorAnalysisOptions& options) {
  ErrorAnalysisReport report;
  report.descriptives = category_summaries(errors, categories, options.omnibus.min_n);
  std::map<std::string, std::map<std::string, BootstrapCi>> cis;
  for (const auto& criterion : categories.criteria()) {
    cis[criterion] = stratified_bootstrap_ci(errors, categories, criterion,
                                             options.bootstrap_replicates, options.level,
                                             options.seed, options.threads);
  }
  for (auto& s : report.descriptives) {
    const auto& ci = cis.at(s.criterion).at(s.category);
    s.mean_ci_low = ci.mean_low;
    s.mean_ci_high = ci.mean_high;
    s.share_ci_low = ci.share_low;
    s.share_ci_high = ci.share_high;
  }
  report.omnibus = omnibus_tests(errors, categories, options.omnibus);
  const auto grouped = group_errors(errors, categories);
  for (const auto& r : report.omnibus) {
    if (r.skipped()) continue;
    for (auto& pair : dunn_posthoc(grouped.at(r.criterion), options.omnibus.tie_correction)) {
      report.posthoc.push_back({r.criterion, std::move(pair)});
    }
  }
  report.top = rank_top_criteria(report.omnibus);
  return report;
}

}  // namespace spidereval::error_analysis
