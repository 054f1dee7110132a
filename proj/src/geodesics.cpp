#include "dcsf/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dcsf/errors.hpp"
#include "dcsf/spline.hpp"

namespace dcsf {

namespace {

// admissible-angle check shared by the closed-form evaluators
double family_angle(const GeodesicFamilyParams& params, double phi) {
    if (params.beta == -1.0)
        throw domain_error("geodesic_r: beta = -1 is the spiral family, use spiral_r");
    if (!(params.m1 > 0.0)) throw input_error("geodesic_r: m1 must be positive");
    const double theta = (params.beta + 1.0) * phi - params.m2;
    if (!(std::abs(theta) < 0.5 * std::numbers::pi))
        throw domain_error("geodesic_r: angle outside the admissible interval");
    return theta;
}

struct ChartState {
    Vec2 z;
    Vec2 v;
};

// geodesic acceleration of a conformal metric e^(2 phi) |dz|^2 in chart
// coordinates, for any affine parameter
ChartState chart_rhs(const ConicalMetric& metric, const ChartState& s) {
    const Vec2 g = metric.log_density_gradient(s.z);
    const double q = s.v.x * s.v.x - s.v.y * s.v.y;
    const double m = s.v.x * s.v.y;
    return {s.v, {-g.x * q - 2.0 * g.y * m, g.y * q - 2.0 * g.x * m}};
}

ChartState rk4_step(const ConicalMetric& metric, const ChartState& s, double h) {
    const ChartState k1 = chart_rhs(metric, s);
    const ChartState k2 = chart_rhs(metric, {s.z + 0.5 * h * k1.z, s.v + 0.5 * h * k1.v});
    const ChartState k3 = chart_rhs(metric, {s.z + 0.5 * h * k2.z, s.v + 0.5 * h * k2.v});
    const ChartState k4 = chart_rhs(metric, {s.z + h * k3.z, s.v + h * k3.v});
    const double c = h / 6.0;
    return {s.z + c * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
            s.v + c * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

double nearest_cone_distance(const ConicalMetric& metric, const Vec2& z) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : metric.cone_points()) best = std::min(best, (z - c.position).norm());
    return best;
}

} // namespace

double geodesic_r(const GeodesicFamilyParams& params, double phi) {
    const double theta = family_angle(params, phi);
    return params.m1 * std::pow(std::cos(theta), -1.0 / (params.beta + 1.0));
}

PolarJet geodesic_polar_jet(const GeodesicFamilyParams& params, double phi) {
    const double theta = family_angle(params, phi);
    const double c = std::cos(theta);
    const double tn = std::tan(theta);
    PolarJet jet;
    jet.r = params.m1 * std::pow(c, -1.0 / (params.beta + 1.0));
    jet.r_phi = jet.r * tn;
    jet.r_phiphi = jet.r * tn * tn + (params.beta + 1.0) * jet.r / (c * c);
    return jet;
}

double spiral_r(double m1, double m2, double phi) {
    if (!(m1 > 0.0)) throw input_error("spiral_r: m1 must be positive");
    return m1 * std::exp(m2 * phi);
}

double geodesic_ode_defect(double beta, const PolarJet& jet) {
    if (!(jet.r > 0.0)) throw domain_error("geodesic_ode_defect: needs r > 0");
    const double defect = jet.r * jet.r_phiphi - (beta + 2.0) * jet.r_phi * jet.r_phi -
                          (beta + 1.0) * jet.r * jet.r;
    return std::abs(defect) / (jet.r * jet.r);
}

double geodesic_residual(double beta,
                         const std::vector<std::pair<double, double>>& polar_samples) {
    const std::size_t n = polar_samples.size();
    if (n < 5) throw input_error("geodesic_residual: need at least 5 samples");
    std::vector<double> phi(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = polar_samples[i].first;
        r[i] = polar_samples[i].second;
        if (!(r[i] > 0.0)) throw input_error("geodesic_residual: r samples must be positive");
        if (i > 0 && !(phi[i] > phi[i - 1]))
            throw input_error("geodesic_residual: phi must be strictly increasing");
    }
    const CubicSpline rs = CubicSpline::with_estimated_slopes(phi, r);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const PolarJet jet{r[i], rs.derivative(phi[i]), rs.second_derivative(phi[i])};
        worst = std::max(worst, geodesic_ode_defect(beta, jet));
    }
    return worst;
}

ShootResult geodesic_shoot(const ConicalMetric& metric, const Vec2& start,
                           const Vec2& direction, double length) {
    if (!(length > 0.0)) throw input_error("geodesic_shoot: length must be positive");
    if (!(direction.norm() > 0.0)) throw input_error("geodesic_shoot: zero direction");
    if (metric.singular_index_at(start))
        throw domain_error("geodesic_shoot: start lies on a cone point");

    // metric arc length is an affine parameter, so unit metric speed at the
    // start is preserved by the equations up to integration error
    ChartState s{start, normalized(direction) / metric.sqrt_conformal_factor(start)};

    const double initial_gap = nearest_cone_distance(metric, start);
    const double singular_gap = 1e-9 * std::max(1.0, initial_gap);
    const double h_coarse = length / 800.0;

    ShootResult out;
    out.curve.nodes.push_back(s.z);
    out.curve.params.push_back(0.0);

    double tau = 0.0;
    const long step_cap = 4'000'000;
    for (long step = 0; step < step_cap && tau < length; ++step) {
        const double gap = nearest_cone_distance(metric, s.z);
        if (gap < singular_gap) {
            out.hit_singularity = true;
            break;
        }
        // the coefficients vary on the metric scale of the cone distance, so
        // steps shrink with it; e^phi turns the euclidean gap into that scale
        double h = h_coarse;
        if (std::isfinite(gap)) h = std::min(h, 0.02 * metric.sqrt_conformal_factor(s.z) * gap);
        if (h < 1e-13 * length) {
            out.hit_singularity = true;
            break;
        }
        h = std::min(h, length - tau);
        s = rk4_step(metric, s, h);
        tau += h;
        if (length - tau <= 1e-12 * length) tau = length;
        out.curve.nodes.push_back(s.z);
        out.curve.params.push_back(tau);
    }
    if (tau < length && !out.hit_singularity)
        throw accuracy_error("geodesic_shoot: step budget exhausted");
    return out;
}

} // namespace dcsf
