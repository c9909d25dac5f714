// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "../../src/app/commands.hpp"
#include "reference_tables.hpp"
#include "spidereval/attribution.hpp"
#include "spidereval/curvefit.hpp"
#include "spidereval/error_analysis.hpp"
#include "spidereval/harness.hpp"
#include "spidereval/metrics.hpp"
#include "spidereval/partition.hpp"
#include "spidereval/reliability.hpp"
#include "spidereval/rng.hpp"
#include "spidereval/special.hpp"
#include "spidereval/synth.hpp"

namespace fs = std::filesystem;
using namespace spidereval;
using namespace acceptance;

namespace {

struct Check {
  bool ok = true;
  std::vector<std::string> notes;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (notes.size() < 8) notes.push_back(what);
    }
  }
};

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<std::string(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.notes.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) c.require(false, "runtime " + num(secs, 3) + " s over " + num(limit_s) + " s");
  std::printf("%s criterion %d: %s [%s; %.2f s]\n", c.ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str(), secs);
  for (const auto& n : c.notes) std::printf("    %s\n", n.c_str());
  if (!c.ok) ++failures;
  std::fflush(stdout);
}

// ---- 1 ---------------------------------------------------------------------

std::string formula_tables(Check& c) {
  std::size_t eps_rows = 0, fdr_rows = 0, desc_rows = 0;
  for (const auto& r : kOmnibus) {
    const double e = error_analysis::epsilon_squared(r.h, r.n, r.k);
    c.require(std::abs(e - r.epsilon_sq) < 1e-5, r.model + "/" + r.criterion + " eps2 " + num(e));
    ++eps_rows;
  }
  std::map<std::string, std::vector<const OmnibusRow*>> by_model;
  for (const auto& r : kOmnibus) by_model[r.model].push_back(&r);
  for (const auto& [model, rows] : by_model) {
    std::vector<double> p;
    for (const auto* r : rows) p.push_back(special::chi_square_sf(r->h, r->k - 1));
    const auto adj = error_analysis::bh_fdr(p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = *rows[i];
      if (r.p == kBelow) {
        c.require(p[i] < 0.001, model + "/" + r.criterion + " raw p " + num(p[i]));
      } else {
        c.require(std::abs(p[i] - r.p) < 1e-5, model + "/" + r.criterion + " raw p " + num(p[i]));
      }
      if (r.p_fdr == kBelow) {
        c.require(adj[i] < 0.001, model + "/" + r.criterion + " fdr " + num(adj[i]));
      } else {
        c.require(std::abs(adj[i] - r.p_fdr) < 1e-5, model + "/" + r.criterion + " fdr " + num(adj[i]));
      }
      ++fdr_rows;
    }
  }
  for (const auto& r : kDescriptives) {
    const double freq = r.n / 313.0;
    c.require(std::abs(freq - r.freq) < 1e-5, r.model + "/" + r.category + " freq " + num(freq));
    c.require(std::abs((r.share - freq) - r.delta) < 1e-5, r.model + "/" + r.category + " delta");
    ++desc_rows;
  }
  c.require(eps_rows >= 6 && desc_rows >= 10, "too few reference rows");
  return std::to_string(eps_rows) + " eps2 rows, " + std::to_string(fdr_rows) + " FDR rows, " +
         std::to_string(desc_rows) + " descriptive rows";
}

// ---- 2 ---------------------------------------------------------------------

std::string curve_refits(Check& c) {
  double worst = 0;
  for (const auto& s : kCurves) {
    std::vector<curvefit::Point> pts;
    for (std::size_t i = 0; i < 7; ++i) pts.push_back({kCurveSizes[i], s.y[i]});
    const auto form = s.metric == "R2" ? curvefit::CurveForm::Rise : curvefit::CurveForm::Decay;
    const double tol = s.metric == "R2" ? 0.10 : 0.05;
    const auto fit = curvefit::fit_learning_curve(form, pts);
    c.require(fit.converged, s.model + " " + s.metric + " did not converge");
    for (int k = 0; k < 3; ++k) {
      const double rel = std::abs(fit.params[k] - s.params[k]) / std::abs(s.params[k]);
      worst = std::max(worst, rel);
      c.require(rel <= tol, s.model + " " + s.metric + " param " + std::to_string(k) + " = " +
                                num(fit.params[k]) + " vs " + num(s.params[k]));
    }
  }
  return std::to_string(kCurves.size()) + " fits, worst relative deviation " + num(worst, 3);
}

// ---- 3 ---------------------------------------------------------------------

std::string wilson(Check& c) {
  struct Row {
    long s, n;
    double low, high;
  };
  // top-1 and top-5 rows of the feature-visualisation summary
  const std::vector<Row> rows{{419, 500, 0.803, 0.868}, {65, 500, 0.103, 0.162},
                              {486, 500, 0.954, 0.983}, {165, 500, 0.290, 0.372}};
  std::string out;
  for (const auto& r : rows) {
    const auto [lo, hi] = reliability::wilson_ci(r.s, r.n);
    c.require(std::abs(lo - r.low) < 5e-4 && std::abs(hi - r.high) < 5e-4,
              std::to_string(r.s) + "/" + std::to_string(r.n) + " -> (" + num(lo, 4) + ", " + num(hi, 4) + ")");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%ld/%ld=(%.3f, %.3f)", out.empty() ? "" : " ", r.s, r.n, lo, hi);
    out += buf;
  }
  return out;
}

// ---- 4 ---------------------------------------------------------------------

synth::SynthData components(std::size_t raters, std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.n_images = 300;
  spec.n_raters = raters;
  spec.var_image = 100;
  spec.var_rater = 25;
  spec.var_residual = 25;
  spec.seed = seed;
  return synth::generate(spec);
}

std::string icc_oracle(Check& c) {
  constexpr int kReplicates = 40;
  std::string out;
  for (const std::size_t k : {5, 10, 20}) {
    // rater variance enters the absolute-agreement denominator
    const double analytic = 100.0 / (100.0 + (25.0 + 25.0) / static_cast<double>(k));
    double sum = 0;
    for (int r = 0; r < kReplicates; ++r) {
      const auto d = components(k, derive_seed(4, "icc.oracle", k * 100 + r));
      sum += reliability::icc2k(reliability::RatingMatrix::from_table(d.ratings));
    }
    const double mean = sum / kReplicates;
    c.require(std::abs(mean - analytic) < 0.02, "k=" + std::to_string(k) + " mean " + num(mean) +
                                                    " vs " + num(analytic));
    out += "k=" + std::to_string(k) + ": " + num(mean, 4) + " vs " + num(analytic, 4) + "; ";
  }
  const auto d = components(80, 9);
  reliability::BootstrapOptions o;
  o.repetitions = 100;
  o.seed = 9;
  o.threads = 2;
  const auto report = reliability::bootstrap_icc(reliability::RatingMatrix::from_table(d.ratings), o);
  for (std::size_t i = 1; i < report.sizes.size(); ++i)
    c.require(report.sizes[i].mean >= report.sizes[i - 1].mean,
              "bootstrap mean drops at size " + std::to_string(report.sizes[i].size));
  out += "bootstrap means " + num(report.sizes.front().mean, 4) + " .. " + num(report.sizes.back().mean, 4);
  return out;
}

// ---- 5 ---------------------------------------------------------------------

std::string harness_suite(Check& c) {
  synth::SynthSpec spec;
  spec.n_images = 313;
  spec.feature_dim = 16;
  spec.feature_signal = 1.0;
  spec.var_residual = 25;  // noise sd 5
  spec.seed = 5;
  const auto data = synth::generate(spec);
  const auto split = split_participants(data.ratings.participant_ids(), 5);
  const auto targets = image_group_means(data.ratings, split);
  const auto plan = make_cv_plan(targets.image_ids(), 5);
  const auto audit = leakage_audit(plan, split, &targets, &data.ratings);
  c.require(audit.ok(), std::to_string(audit.violations.size()) + " leakage violations");

  harness::NestedCvOptions o;
  o.n_trials = 30;
  o.seed = 5;
  o.threads = 2;
  const auto result = harness::run_nested_cv(plan, targets, data.features, harness::PredictorSpec::ridge(), o);
  std::map<std::string, int> count;
  for (const auto& e : result.predictions.entries()) ++count[e.image_id];
  c.require(count.size() == 313, "predictions cover " + std::to_string(count.size()) + " images");
  for (const auto& [id, n] : count) c.require(n == 5, id + " has " + std::to_string(n) + " predictions");
  const auto m = metrics::metric_report(result.predictions, targets.means_b());

  Pcg32 rng(derive_seed(5, "acceptance.jensen"));
  int jensen_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    harness::PredictionSet ps;
    std::map<std::string, double> t;
    const int images = 5 + static_cast<int>(rng.bounded(40));
    const int reps = 2 + static_cast<int>(rng.bounded(5));
    for (int i = 0; i < images; ++i) t["i" + std::to_string(i)] = rng.uniform(0, 100);
    for (int r = 0; r < reps; ++r)
      for (int i = 0; i < images; ++i) ps.add({r, 0, "i" + std::to_string(i), rng.normal(50, 40), 0});
    const auto rep = metrics::repetition_metrics(ps, t);
    const auto ens = metrics::ensemble_metrics(ps, t);
    if (ens.mae <= rep.mean.mae + 1e-12) ++jensen_ok;
  }
  c.require(jensen_ok == 100, "Jensen held on " + std::to_string(jensen_ok) + "/100 sets");
  return "0 violations, 313x5 predictions, ensemble R2 " + num(m.ensemble.r2, 4) + ", Jensen " +
         std::to_string(jensen_ok) + "/100";
}

// ---- 6 ---------------------------------------------------------------------

std::vector<double> brute_ranks(const std::vector<double>& v, double& tie_sum) {
  std::vector<double> r;
  tie_sum = 0;
  for (double x : v) {
    double less = 0, equal = 0;
    for (double y : v) less += y < x, equal += y == x;
    r.push_back(less + (equal + 1) / 2);
  }
  std::set<double> distinct(v.begin(), v.end());
  for (double x : distinct) {
    const double t = static_cast<double>(std::count(v.begin(), v.end(), x));
    tie_sum += t * t * t - t;
  }
  return r;
}

std::string statistics_oracles(Check& c) {
  const auto kw = error_analysis::kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  c.require(std::abs(kw.h - 7.2) < 1e-12, "H = " + num(kw.h, 12));
  const std::vector<double> d{1, 2, 3};
  const auto t = attribution::paired_one_sided_t(d);
  c.require(std::abs(t.t - 3.4641) < 1e-4, "t = " + num(t.t));
  c.require(std::abs(t.one_sided_p - 0.0371) < 1e-4, "p = " + num(t.one_sided_p));
  c.require(std::abs(t.cohen_d - 2.0) < 1e-12, "d = " + num(t.cohen_d));

  Pcg32 rng(derive_seed(6, "acceptance.ranks"));
  double worst = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::map<std::string, std::vector<double>> groups;
    const int k = 2 + static_cast<int>(rng.bounded(3));
    for (int g = 0; g < k; ++g) {
      std::vector<double> v(2 + rng.bounded(7));
      for (auto& x : v) x = std::floor(rng.uniform(0, 10));
      groups[std::string(1, static_cast<char>('a' + g))] = v;
    }
    std::vector<double> all;
    std::vector<std::vector<double>> lists;
    for (const auto& [name, g] : groups) {
      all.insert(all.end(), g.begin(), g.end());
      lists.push_back(g);
    }
    double ties = 0;
    const auto ranks = brute_ranks(all, ties);
    const double n = all.size();
    if (ties == n * n * n - n) {
      --rep;
      continue;
    }
    std::map<std::string, double> mean_rank;
    double h = 0;
    std::size_t pos = 0;
    for (const auto& [name, g] : groups) {
      double s = 0;
      for (std::size_t i = 0; i < g.size(); ++i) s += ranks[pos++];
      mean_rank[name] = s / g.size();
      h += s * s / g.size();
    }
    h = (12 / (n * (n + 1)) * h - 3 * (n + 1)) / (1 - ties / (n * n * n - n));
    const auto got = error_analysis::kruskal_wallis(lists);
    worst = std::max(worst, std::abs(got.h - std::max(h, 0.0)));
    c.require(std::abs(got.h - std::max(h, 0.0)) < 1e-9, "KW H mismatch on dataset " + std::to_string(rep));

    const double s2 = n * (n + 1) / 12 - ties / (12 * (n - 1));
    for (const auto& pr : error_analysis::dunn_posthoc(groups)) {
      const double z = (mean_rank[pr.group_a] - mean_rank[pr.group_b]) /
                       std::sqrt(s2 * (1.0 / groups[pr.group_a].size() + 1.0 / groups[pr.group_b].size()));
      const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
      worst = std::max({worst, std::abs(pr.z - z), std::abs(pr.p - p)});
      c.require(std::abs(pr.z - z) < 1e-9 && std::abs(pr.p - p) < 1e-9,
                "Dunn mismatch on dataset " + std::to_string(rep) + " " + pr.group_a + "-" + pr.group_b);
    }
  }
  return "H=" + num(kw.h) + ", t=" + num(t.t) + ", p=" + num(t.one_sided_p, 4) + ", d=" + num(t.cohen_d) +
         ", 50 random datasets max |diff| " + num(worst, 3);
}

// ---- 7 ---------------------------------------------------------------------

std::string numerical_kernels(Check& c) {
  // a and c enter linearly, so a unit step is exact; b uses Richardson-
  // extrapolated central differences with a step scaled to 1/n.
  double worst_jac = 0;
  Pcg32 rng(derive_seed(7, "acceptance.jacobian"));
  for (int rep = 0; rep < 200; ++rep) {
    const auto form = rep % 2 ? curvefit::CurveForm::Rise : curvefit::CurveForm::Decay;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const curvefit::Params p{sign * rng.uniform(0.1, 10), rng.uniform(0.001, 0.03), rng.uniform(-20, 20)};
    const double n = rng.uniform(10, 400);
    const auto j = curvefit::jacobian_row(form, p, n);
    auto central = [&](int k, double h) {
      auto up = p, down = p;
      up[k] += h;
      down[k] -= h;
      return (curvefit::evaluate(form, up, n) - curvefit::evaluate(form, down, n)) / (2 * h);
    };
    for (int k = 0; k < 3; ++k) {
      double fd;
      if (k == 1) {
        const double h = 1e-3 / n;
        fd = (4 * central(k, h / 2) - central(k, h)) / 3;
      } else {
        fd = central(k, 1.0);
      }
      const double rel = std::abs(j[k] - fd) / std::abs(fd);
      worst_jac = std::max(worst_jac, rel);
    }
  }
  c.require(worst_jac < 1e-4, "Jacobian relative error " + num(worst_jac));

  double worst_chi = 0, worst_t = 0;
  for (const auto& r : kChiSquareTails) {
    const double v = special::chi_square_sf(r.x, r.df);
    const double rel = std::abs(v - r.upper) / r.upper;
    worst_chi = std::max(worst_chi, rel);
    c.require(rel < 1e-10, "chi2 df=" + num(r.df) + " x=" + num(r.x) + " rel err " + num(rel));
  }
  for (const auto& r : kStudentTails) {
    const double v = special::student_t_sf(r.x, r.df);
    const double rel = std::abs(v - r.upper) / r.upper;
    worst_t = std::max(worst_t, rel);
    c.require(rel < 1e-10, "t df=" + num(r.df) + " t=" + num(r.x) + " rel err " + num(rel));
  }
  return "Jacobian " + num(worst_jac, 3) + ", chi2 tails " + num(worst_chi, 3) + ", t tails " + num(worst_t, 3) +
         " (max relative error)";
}

// ---- 8 ---------------------------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spidereval");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = app::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).generic_string()] = s.str();
  }
  return files;
}

std::string reproducibility(Check& c) {
  const fs::path root = fs::temp_directory_path() / ("spidereval_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string data = (root / "data").string();
  c.require(cli({"synth", "--out", data, "--seed", "8"}) == 0, "synth failed");
  const std::vector<std::pair<std::string, std::string>> runs{{"a", "1"}, {"b", "1"}, {"c", "8"}};
  for (const auto& [name, threads] : runs) {
    c.require(cli({"all", "--config", data + "/run.json", "--out", (root / name).string(), "--threads", threads}) == 0,
              "run " + name + " failed");
  }
  const auto a = tree(root / "a"), b = tree(root / "b"), t8 = tree(root / "c");
  std::size_t differing = 0;
  for (const auto* other : {&b, &t8}) {
    if (other->size() != a.size()) c.require(false, "file count differs");
    for (const auto& [name, bytes] : a) {
      const auto it = other->find(name);
      if (it == other->end() || it->second != bytes) {
        ++differing;
        c.require(false, "differs: " + name);
      }
    }
  }
  c.require(a.size() > 20, "suspiciously small output tree");
  fs::remove_all(root);
  return std::to_string(a.size()) + " files compared across threads 1/1/8, " + std::to_string(differing) +
         " differing";
}

}  // namespace

int main() {
  report(1, "formula cross-checks against published tables", 1.0, formula_tables);
  report(2, "learning-curve refits", 1.0, curve_refits);
  report(3, "Wilson intervals", 1.0, wilson);
  report(4, "ICC variance-component oracle", 30.0, icc_oracle);
  report(5, "harness end-to-end properties", 60.0, harness_suite);
  report(6, "statistics oracles", 10.0, statistics_oracles);
  report(7, "numerical kernels", 5.0, numerical_kernels);
  report(8, "byte-identical outputs across runs and thread counts", 0.0, reproducibility);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
