#pragma once

namespace synlungs {

// Regularized lower incomplete gamma P(a, x) (series + Lentz continued
// fraction), good to ~1e-12 for the parameter ranges used here.
double regularized_gamma_p(double a, double x);

// CDF of Gamma(shape, rate) at x.
double gamma_cdf(double shape, double rate, double x);

// Density of Gamma(shape, rate) at x; 0 for x <= 0.
double gamma_pdf(double shape, double rate, double x);

}  // namespace synlungs
