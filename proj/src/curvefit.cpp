#include "spidereval/curvefit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "spidereval/error.hpp"
#include "spidereval/stats.hpp"

namespace spidereval::curvefit {

namespace {

void validate_points(std::span<const Point> points, std::size_t minimum) {
  if (points.size() < minimum) {
    throw ValidationError("curve fit needs at least " + std::to_string(minimum) + " points");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.n) || !std::isfinite(p.y)) throw ValidationError("non-finite curve point");
  }
}

double residual_ss(CurveForm form, std::span<const Point> points, const Params& p) {
  stats::CompensatedSum s;
  for (const auto& pt : points) {
    const double r = pt.y - evaluate(form, p, pt.n);
    s.add(r * r);
  }
  return s.value();
}

// Solves the 3x3 system by Gaussian elimination with partial pivoting.
bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (!(std::abs(a[pivot][col]) > 0.0)) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

}  // namespace

CurveForm curve_form_from_string(const std::string& name) {
  if (name == "decay") return CurveForm::Decay;
  if (name == "rise") return CurveForm::Rise;
  throw ValidationError("unknown curve form '" + name + "' (expected decay or rise)", "form");
}

std::string to_string(CurveForm form) { return form == CurveForm::Decay ? "decay" : "rise"; }

double evaluate(CurveForm form, const Params& p, double n) {
  const double e = std::exp(-p[1] * n);
  return form == CurveForm::Decay ? p[0] * e + p[2] : p[0] * (1.0 - e) + p[2];
}

std::array<double, 3> jacobian_row(CurveForm form, const Params& p, double n) {
  const double e = std::exp(-p[1] * n);
  if (form == CurveForm::Decay) return {e, -p[0] * n * e, 1.0};
  return {1.0 - e, p[0] * n * e, 1.0};
}

FitResult levenberg_marquardt(CurveForm form, std::span<const Point> points, const Params& init,
                              const LmOptions& options) {
  validate_points(points, 4);
  FitResult fit;
  fit.params = init;
  fit.rss = residual_ss(form, points, init);
  if (!std::isfinite(fit.rss)) throw ComputationError("model is non-finite at the initial parameters");
  fit.rss_trace.push_back(fit.rss);

  double lambda = 1e-3;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::array<std::array<double, 3>, 3> jtj{};
    std::array<double, 3> jtr{};
    for (const auto& pt : points) {
      const auto row = jacobian_row(form, fit.params, pt.n);
      const double r = pt.y - evaluate(form, fit.params, pt.n);
      for (int i = 0; i < 3; ++i) {
        jtr[i] += row[i] * r;
        for (int j = 0; j < 3; ++j) jtj[i][j] += row[i] * row[j];
      }
    }
    fit.gradient_norm = std::max({std::abs(jtr[0]), std::abs(jtr[1]), std::abs(jtr[2])});
    if (!std::isfinite(fit.gradient_norm)) throw ComputationError("non-finite Jacobian");
    if (fit.gradient_norm < options.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    const double max_diag = std::max({jtj[0][0], jtj[1][1], jtj[2][2]});

    bool accepted = false;
    while (!accepted) {
      if (lambda > 1e16) {
        if (fit.iterations > 0) return fit;  // stalled: cannot improve further
        throw ComputationError("normal matrix singular at every damping level");
      }
      auto a = jtj;
      for (int i = 0; i < 3; ++i) a[i][i] += lambda * std::max(jtj[i][i], 1e-12 * max_diag);
      std::array<double, 3> step{};
      if (!solve3(a, jtr, step)) {
        lambda *= 10.0;
        continue;
      }
      const Params trial{fit.params[0] + step[0], fit.params[1] + step[1], fit.params[2] + step[2]};
      const double rss = residual_ss(form, points, trial);
      if (std::isfinite(rss) && rss <= fit.rss) {
        const double previous = fit.rss;
        fit.params = trial;
        fit.rss = rss;
        fit.rss_trace.push_back(rss);
        ++fit.iterations;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (previous - rss <= options.rss_tolerance * std::max(previous, 1e-300)) {
          fit.converged = true;
          return fit;
        }
      } else {
        lambda *= 10.0;
      }
    }
  }
  return fit;
}

Params default_init(CurveForm form, std::span<const Point> points) {
  validate_points(points, 2);
  std::set<double> distinct;
  for (const auto& p : points) distinct.insert(p.n);
  if (distinct.size() < 2) throw ValidationError("default init needs at least two distinct n");
  const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                            [](const Point& a, const Point& b) { return a.n < b.n; });
  std::vector<double> ns;
  for (const auto& p : points) ns.push_back(p.n);
  const double med = stats::median(ns);
  const double b = med != 0.0 ? 1.0 / med : 1.0;
  if (form == CurveForm::Decay) return {lo->y - hi->y, b, hi->y};
  return {hi->y - lo->y, b, lo->y};
}

FitResult fit_learning_curve(CurveForm form, std::span<const Point> points, const LmOptions& options) {
  const Params init = default_init(form, points);
  std::optional<FitResult> best;
  std::string last_error;
  auto attempt = [&](const Params& p) {
    try {
      auto fit = levenberg_marquardt(form, points, p, options);
      if (fit.converged && (!best || fit.rss < best->rss)) best = std::move(fit);
    } catch (const ComputationError& e) {
      last_error = e.what();
    }
  };
  attempt(init);
  if (!best) {
    for (double scale : {0.1, 0.3, 3.0, 10.0, 30.0}) attempt({init[0], init[1] * scale, init[2]});
  }
  if (!best) {
    throw ComputationError("learning-curve fit did not converge from any start" +
                           (last_error.empty() ? std::string() : ": " + last_error));
  }
  return *best;
}

}  // namespace spidereval::curvefit
