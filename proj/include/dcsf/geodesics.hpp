#pragma once

// Closed-form geodesic families of the pure cone metric |z|^(2 beta) |dz|^2,
// the polar ODE their distance function satisfies, and a chart-coordinate
// shooter that integrates geodesics of a general conical metric.

#include <utility>
#include <vector>

#include "dcsf/curve.hpp"
#include "dcsf/metric.hpp"
#include "dcsf/vec2.hpp"

namespace dcsf {

struct GeodesicFamilyParams {
    double beta = 0.0; // cone order; the cosine family needs beta != -1
    double m1 = 1.0;   // scale, positive
    double m2 = 0.0;   // rotation phase
};

// r and its first two phi derivatives along a polar curve
struct PolarJet {
    double r = 0.0;
    double r_phi = 0.0;
    double r_phiphi = 0.0;
};

// distance function of the family r^(beta+1) cos((beta+1) phi - m2) = m1^(beta+1);
// throws domain_error once (beta+1) phi - m2 leaves (-pi/2, pi/2)
double geodesic_r(const GeodesicFamilyParams& params, double phi);

// same point with exact phi derivatives
PolarJet geodesic_polar_jet(const GeodesicFamilyParams& params, double phi);

// the beta = -1 family: circles around the origin and logarithmic spirals
double spiral_r(double m1, double m2, double phi);

// pointwise defect |r r_pp - (beta+2) r_p^2 - (beta+1) r^2| / r^2; the
// normalization makes the value invariant under dilations of the curve
double geodesic_ode_defect(double beta, const PolarJet& jet);

// worst defect over the interior samples, phi derivatives taken from a
// clamped spline with data-estimated end slopes; needs >= 5 samples with
// strictly increasing phi and positive r
double geodesic_residual(double beta,
                         const std::vector<std::pair<double, double>>& polar_samples);

struct ShootResult {
    SampledCurve curve;           // params carry metric arc length from the start
    bool hit_singularity = false; // stopped short of the requested length at a cone
};

// fourth-order integration of the geodesic starting at a non-singular chart
// point with the given direction, run for the requested metric length
ShootResult geodesic_shoot(const ConicalMetric& metric, const Vec2& start,
                           const Vec2& direction, double length);

} // namespace dcsf
