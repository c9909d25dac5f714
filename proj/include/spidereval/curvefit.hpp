#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace spidereval::curvefit {

enum class CurveForm { Decay, Rise };

CurveForm curve_form_from_string(const std::string& name);
std::string to_string(CurveForm form);

using Params = std::array<double, 3>;  // a, b, c

struct Point {
  double n = 0.0;
  double y = 0.0;
};

/// decay: a exp(-b n) + c; rise: a (1 - exp(-b n)) + c.
double evaluate(CurveForm form, const Params& p, double n);
/// d f / d(a, b, c).
std::array<double, 3> jacobian_row(CurveForm form, const Params& p, double n);

struct FitResult {
  Params params{};
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;  // stopped on the gradient or relative-RSS criterion
  double gradient_norm = 0.0;  // infinity norm of J'r at the solution
  std::vector<double> rss_trace;  // RSS after each accepted step, starting at the initial point
};

struct LmOptions {
  int max_iterations = 500;
  double rss_tolerance = 1e-12;       // relative change in RSS
  double gradient_tolerance = 1e-10;  // infinity norm
};

/// Levenberg-Marquardt with analytic Jacobian. Throws ComputationError when
/// the damped normal matrix stays singular or the model goes non-finite.
FitResult levenberg_marquardt(CurveForm form, std::span<const Point> points, const Params& init,
                              const LmOptions& options = {});

/// decay: a = y(min n) - y(max n), c = y(max n); rise: a = y(max n) - y(min n),
/// c = y(min n); b = 1 / median(n) for both.
Params default_init(CurveForm form, std::span<const Point> points);

/// Fit from default_init; if that fails or does not converge, retries with b
/// scaled by {0.1, 0.3, 3, 10, 30} and keeps the lowest-RSS converged fit.
FitResult fit_learning_curve(CurveForm form, std::span<const Point> points,
                             const LmOptions& options = {});

}  // namespace spidereval::curvefit
