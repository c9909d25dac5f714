#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "spidereval/attribution.hpp"
#include "spidereval/curvefit.hpp"
#include "spidereval/error.hpp"
#include "spidereval/error_analysis.hpp"
#include "spidereval/harness.hpp"
#include "spidereval/metrics.hpp"
#include "spidereval/rater_qc.hpp"
#include "spidereval/reliability.hpp"
#include "spidereval/special.hpp"
#include "spidereval/synth.hpp"

namespace py = pybind11;
using namespace spidereval;

namespace {

using Record = std::tuple<std::string, std::string, int, double>;

RatingsTable to_table(const std::vector<Record>& records) {
  std::vector<RatingRecord> out;
  out.reserve(records.size());
  for (const auto& [p, i, t, r] : records) out.push_back({p, i, t, r});
  return RatingsTable(std::move(out));
}

py::dict triple(const curvefit::FitResult& f) {
  py::dict d;
  d["a"] = f.params[0];
  d["b"] = f.params[1];
  d["c"] = f.params[2];
  d["rss"] = f.rss;
  d["iterations"] = f.iterations;
  d["converged"] = f.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "spidereval statistics core";
  m.attr("__version__") = "0.1.0";

  // Translators run newest-first, so the subclasses are registered after the base.
  auto& base = py::register_exception<Error>(m, "SpiderEvalError");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ComputationError>(m, "ComputationError", base.ptr());

  m.def("mae", [](std::vector<double> p, std::vector<double> o) { return metrics::mae(p, o); },
        py::arg("pred"), py::arg("obs"));
  m.def("rmse", [](std::vector<double> p, std::vector<double> o) { return metrics::rmse(p, o); },
        py::arg("pred"), py::arg("obs"));
  m.def("r2", [](std::vector<double> p, std::vector<double> o) { return metrics::r2(p, o); },
        py::arg("pred"), py::arg("obs"));

  m.def("wilson_ci", &reliability::wilson_ci, py::arg("successes"), py::arg("n"),
        py::arg("level") = 0.95);

  m.def(
      "icc2k",
      [](const std::vector<std::vector<double>>& rows, const std::string& missing) {
        if (rows.empty()) throw ValidationError("empty matrix");
        std::vector<std::string> images, raters;
        std::vector<double> cells;
        for (std::size_t j = 0; j < rows.front().size(); ++j) raters.push_back(std::to_string(j));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (rows[i].size() != raters.size()) throw ValidationError("ragged matrix");
          images.push_back(std::to_string(i));
          cells.insert(cells.end(), rows[i].begin(), rows[i].end());
        }
        const reliability::RatingMatrix mat(images, raters, cells);
        return reliability::icc2k(mat, reliability::missing_mode_from_string(missing));
      },
      py::arg("matrix"), py::arg("missing") = "impute",
      "ICC(2,k) of an images x raters matrix; NaN marks a missing cell.");

  m.def(
      "kruskal_wallis",
      [](const std::vector<std::vector<double>>& groups, bool ties) {
        const auto r = error_analysis::kruskal_wallis(groups, ties);
        return std::make_pair(r.h, r.p);
      },
      py::arg("groups"), py::arg("tie_correction") = true);
  m.def("epsilon_squared", &error_analysis::epsilon_squared, py::arg("h"), py::arg("n"), py::arg("k"));
  m.def("bh_fdr", [](std::vector<double> p) { return error_analysis::bh_fdr(p); }, py::arg("p_values"));
  m.def(
      "dunn_posthoc",
      [](const std::map<std::string, std::vector<double>>& groups, bool ties) {
        py::list out;
        for (const auto& d : error_analysis::dunn_posthoc(groups, ties)) {
          py::dict row;
          row["group_a"] = d.group_a;
          row["group_b"] = d.group_b;
          row["z"] = d.z;
          row["p"] = d.p;
          row["p_fdr"] = d.p_fdr;
          out.append(row);
        }
        return out;
      },
      py::arg("groups"), py::arg("tie_correction") = true);

  m.def(
      "fit_learning_curve",
      [](const std::vector<double>& n, const std::vector<double>& y, const std::string& form) {
        if (n.size() != y.size()) throw ValidationError("n and y differ in length");
        std::vector<curvefit::Point> pts;
        for (std::size_t i = 0; i < n.size(); ++i) pts.push_back({n[i], y[i]});
        return triple(curvefit::fit_learning_curve(curvefit::curve_form_from_string(form), pts));
      },
      py::arg("n"), py::arg("y"), py::arg("form") = "decay");

  m.def(
      "paired_one_sided_t",
      [](std::vector<double> d) {
        const auto r = attribution::paired_one_sided_t(std::span<const double>(d));
        py::dict out;
        out["n"] = r.n;
        out["t"] = r.t;
        out["df"] = r.df;
        out["p"] = r.one_sided_p;
        out["d"] = r.cohen_d;
        return out;
      },
      py::arg("deltas"));
  m.def(
      "overlap_stats",
      [](const Eigen::MatrixXd& heatmap, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
        if (heatmap.rows() != mask.rows() || heatmap.cols() != mask.cols()) {
          throw ValidationError("heatmap and mask shapes differ");
        }
        const auto h = static_cast<std::size_t>(heatmap.rows());
        const auto w = static_cast<std::size_t>(heatmap.cols());
        std::vector<double> v(w * h);
        std::vector<std::uint8_t> b(w * h);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            v[y * w + x] = heatmap(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x));
            b[y * w + x] = mask(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) ? 1 : 0;
          }
        }
        const auto r = attribution::overlap_stats(FloatGrid(w, h, v), BinaryMask(w, h, b));
        py::dict out;
        out["mu_in"] = r.mu_in;
        out["mu_out"] = r.mu_out;
        out["delta"] = r.delta;
        out["mask_fraction"] = r.mask_fraction;
        return out;
      },
      py::arg("heatmap"), py::arg("mask"));

  m.def(
      "fit_ridge",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
        const auto model = harness::fit_ridge(x, y, lambda);
        return std::make_pair(Eigen::VectorXd(model.weights()), model.intercept());
      },
      py::arg("x"), py::arg("y"), py::arg("lam"));

  m.def(
      "run_qc",
      [](const std::vector<Record>& records) {
        const auto table = first_trial_filter(to_table(records));
        const auto report = qc::run_qc(table);
        py::dict out;
        out["excluded"] = report.excluded;
        out["ratings_before"] = report.ratings_before;
        out["ratings_after"] = report.ratings_after;
        out["correlation_flagged"] =
            std::vector<std::string>(report.correlation.flagged.begin(), report.correlation.flagged.end());
        out["mad_flagged"] = std::vector<std::string>(report.mad.flagged.begin(), report.mad.flagged.end());
        return out;
      },
      py::arg("records"), "records: (participant_id, image_id, trial_index, rating) tuples");

  m.def(
      "synth_ratings",
      [](std::size_t n_images, std::size_t n_raters, double var_image, double var_rater,
         double var_residual, std::size_t outliers, std::uint64_t seed) {
        synth::SynthSpec spec;
        spec.n_images = n_images;
        spec.n_raters = n_raters;
        spec.var_image = var_image;
        spec.var_rater = var_rater;
        spec.var_residual = var_residual;
        spec.outlier_count = outliers;
        spec.seed = seed;
        const auto data = synth::generate(spec);
        std::vector<Record> out;
        for (const auto& r : data.ratings.records()) {
          out.emplace_back(r.participant_id, r.image_id, r.trial_index, r.rating);
        }
        return std::make_pair(out, data.truth.outliers);
      },
      py::arg("n_images") = 100, py::arg("n_raters") = 40, py::arg("var_image") = 100.0,
      py::arg("var_rater") = 25.0, py::arg("var_residual") = 25.0, py::arg("outliers") = 0,
      py::arg("seed") = 0);

  m.def("chi_square_sf", &special::chi_square_sf, py::arg("x"), py::arg("df"));
  m.def("student_t_sf", &special::student_t_sf, py::arg("t"), py::arg("df"));
  m.def("normal_quantile", &special::normal_quantile, py::arg("p"));
}
