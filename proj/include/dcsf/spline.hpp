#pragma once

// Cubic spline interpolation in one variable with clamped, natural, or
// periodic end conditions. Moment (second-derivative) formulation; third
// derivatives are piecewise constant.

#include <vector>

#include "dcsf/errors.hpp"

namespace dcsf {

class CubicSpline {
  public:
    enum class EndCondition { natural, clamped, periodic };

    CubicSpline() = default;

    // ts strictly increasing; for periodic data ys.front() must equal ys.back()
    CubicSpline(std::vector<double> ts, std::vector<double> ys, EndCondition bc,
                double slope_a = 0.0, double slope_b = 0.0);

    // clamped spline with end slopes estimated from one-sided 4-point fits
    static CubicSpline with_estimated_slopes(std::vector<double> ts, std::vector<double> ys);

    double value(double t) const { return eval(t, 0); }
    double derivative(double t) const { return eval(t, 1); }
    double second_derivative(double t) const { return eval(t, 2); }
    double third_derivative(double t) const { return eval(t, 3); }

    double t_min() const { return ts_.front(); }
    double t_max() const { return ts_.back(); }

  private:
    double eval(double t, int order) const;
    std::size_t segment(double t) const;

    std::vector<double> ts_;
    std::vector<double> ys_;
    std::vector<double> m_; // second derivatives at the knots
};

// Thomas solve of a tridiagonal system; diagonals (lower, diag, upper) are
// overwritten. Exposed because the flow stepper uses the same kernel.
void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                       std::vector<double>& upper, std::vector<double>& rhs);

// cyclic variant (corner entries couple first and last unknowns)
void solve_cyclic_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                              std::vector<double> upper, double corner_low, double corner_up,
                              std::vector<double>& rhs);

} // namespace dcsf
