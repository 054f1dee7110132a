#pragma once

// Conformal metrics with isolated conical singularities on a planar chart.
// The metric is exp(2h) * prod_j |z - p_j|^(2 beta_j) |dz|^2 with each order
// beta_j in (-1, 0) and h a polynomial.

#include <cstddef>
#include <optional>
#include <vector>

#include "dcsf/errors.hpp"
#include "dcsf/polynomial.hpp"
#include "dcsf/vec2.hpp"

namespace dcsf {

struct ConePoint {
    Vec2 position;
    double beta; // cone order, in (-1, 0)
};

class ConicalMetric {
  public:
    ConicalMetric() = default;
    ConicalMetric(std::vector<ConePoint> cones, BivariatePolynomial h);

    const std::vector<ConePoint>& cone_points() const { return cones_; }
    const BivariatePolynomial& log_smooth_part() const { return h_; }

    // lambda(z); throws domain_error at a cone point
    double conformal_factor(const Vec2& z) const;
    double sqrt_conformal_factor(const Vec2& z) const;

    // phi = h + sum_j beta_j log|z - p_j| so that lambda = exp(2 phi)
    double log_density(const Vec2& z) const;
    Vec2 log_density_gradient(const Vec2& z) const;

    // K = -(Laplacian h) / lambda away from the cone points
    double gauss_curvature(const Vec2& z) const;

    std::optional<std::size_t> singular_index_at(const Vec2& z,
                                                 double tol = 1e-12) const;

    // flat away from the cone points iff h is harmonic
    bool is_flat() const { return h_.is_harmonic(); }

  private:
    std::vector<ConePoint> cones_;
    BivariatePolynomial h_;
};

// Area of a closed, positively oriented, simple polygonal region in the
// metric. Cone points may sit in the interior or at polygon vertices; the
// integration is arranged so singular points only ever appear at triangle
// corners, where a radial power substitution removes the singularity.
double metric_area(const ConicalMetric& metric, const std::vector<Vec2>& polygon,
                   double rel_tol = 1e-9);

// pointwise length density of a parametrized curve
inline double metric_speed(const ConicalMetric& metric, const Vec2& pos, const Vec2& velocity) {
    return metric.sqrt_conformal_factor(pos) * velocity.norm();
}

} // namespace dcsf
