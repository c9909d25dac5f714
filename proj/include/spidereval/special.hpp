#pragma once

// Special functions and distribution tails. Implemented from the classic
// series / continued-fraction expansions (modified Lentz) so the library
// carries no numerical dependency beyond <cmath>.
namespace spidereval::special {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly.
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

double normal_cdf(double x);
/// Upper tail 1 - Phi(x) without cancellation.
double normal_sf(double x);
/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// one Halley step against erfc, giving full double precision on (0, 1).
double normal_quantile(double p);

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_sf(double x, double df);

/// Upper tail P(T > t) of Student's t with `df` degrees of freedom.
double student_t_sf(double t, double df);

}  // namespace spidereval::special
