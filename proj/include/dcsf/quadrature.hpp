#pragma once

// Adaptive Gauss-Legendre quadrature with dyadic subdivision, plus the graded
// endpoint substitutions that remove integrable power-law singularities before
// the adaptive rule sees them.

#include <functional>

namespace dcsf {

struct QuadratureControl {
    double rel_tol = 1e-8;
    int max_depth = 40;
    // absolute floor on the acceptance threshold; lets callers declare the
    // scale below which the integral is indistinguishable from rounding noise
    double abs_tol = 0.0;
};

// integral of f over [a, b]; f smooth (or at worst mildly kinked) inside
double adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                          const QuadratureControl& ctl = {});

// integral of f over [a, b] where f(s) ~ c |s - a|^p near a with p > -1:
// the substitution s = a + (b-a) tau^(1/(1+p)) flattens the singular factor
// exactly, after which the adaptive rule applies
double integrate_power_endpoint(const std::function<double(double)>& f, double a, double b,
                                double p, const QuadratureControl& ctl = {});

// fixed 15-point Gauss-Legendre panel (used as the base rule and exposed for
// cumulative arc-length tables)
double gauss15(const std::function<double(double)>& f, double a, double b);

} // namespace dcsf
