#include "dcsf/metric.hpp"

#include <cmath>

#include "dcsf/quadrature.hpp"

namespace dcsf {

ConicalMetric::ConicalMetric(std::vector<ConePoint> cones, BivariatePolynomial h)
    : cones_(std::move(cones)), h_(std::move(h)) {
    for (const auto& c : cones_) {
        if (!(c.beta > -1.0 && c.beta < 0.0))
            throw input_error("cone order must lie in (-1, 0)");
    }
    for (std::size_t i = 0; i < cones_.size(); ++i) {
        for (std::size_t j = i + 1; j < cones_.size(); ++j) {
            if ((cones_[i].position - cones_[j].position).norm() < 1e-12)
                throw input_error("cone points must be distinct");
        }
    }
}

std::optional<std::size_t> ConicalMetric::singular_index_at(const Vec2& z, double tol) const {
    for (std::size_t j = 0; j < cones_.size(); ++j) {
        if ((z - cones_[j].position).norm() <= tol * (1.0 + z.norm())) return j;
    }
    return std::nullopt;
}

double ConicalMetric::log_density(const Vec2& z) const {
    double phi = h_.value(z);
    for (const auto& c : cones_) {
        const double r = (z - c.position).norm();
        if (r == 0.0) throw domain_error("log density evaluated at a cone point");
        phi += c.beta * std::log(r);
    }
    return phi;
}

Vec2 ConicalMetric::log_density_gradient(const Vec2& z) const {
    Vec2 g = h_.gradient(z);
    for (const auto& c : cones_) {
        const Vec2 d = z - c.position;
        const double r2 = d.norm2();
        if (r2 == 0.0) throw domain_error("log density gradient at a cone point");
        g = g + d * (c.beta / r2);
    }
    return g;
}

double ConicalMetric::conformal_factor(const Vec2& z) const {
    return std::exp(2.0 * log_density(z));
}

double ConicalMetric::sqrt_conformal_factor(const Vec2& z) const {
    return std::exp(log_density(z));
}

double ConicalMetric::gauss_curvature(const Vec2& z) const {
    return -h_.laplacian(z) / conformal_factor(z);
}

namespace {

double polygon_signed_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += wedge(p, q);
    }
    return 0.5 * a;
}

bool point_in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
    const double w0 = wedge(b - a, p - a);
    const double w1 = wedge(c - b, p - b);
    const double w2 = wedge(a - c, p - c);
    return (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) || (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
}

// Integral of lambda over the triangle (a, b, c) via the Duffy map
// z = a + u (b - a) + u v (c - b). If a is a cone point of order beta the
// radial substitution u = tau^(1/(2 beta + 2)) makes the integrand bounded.
double triangle_integral(const ConicalMetric& metric, const Vec2& a, const Vec2& b, const Vec2& c,
                         double beta_at_a, double rel_tol) {
    const double jac0 = std::abs(wedge(b - a, c - a));
    if (jac0 < 1e-30) return 0.0;
    const double m = 1.0 / (2.0 * beta_at_a + 2.0);

    QuadratureControl inner_ctl{rel_tol * 0.1, 32};
    QuadratureControl outer_ctl{rel_tol, 32};

    auto outer = [&](double tau) {
        const double u = (m == 1.0) ? tau : std::pow(tau, m);
        const double du_dtau = (m == 1.0) ? 1.0 : m * std::pow(tau, m - 1.0);
        auto inner = [&](double v) {
            const Vec2 z = a + (b - a) * u + (c - b) * (u * v);
            return metric.conformal_factor(z);
        };
        const double iv = adaptive_integrate(inner, 0.0, 1.0, inner_ctl);
        return iv * u * jac0 * du_dtau;
    };
    return adaptive_integrate(outer, 0.0, 1.0, outer_ctl);
}

struct Tri {
    Vec2 a, b, c;      // a carries the singularity if any
    double beta_at_a;  // 0 when the corner is regular
};

void push_triangle(const ConicalMetric& metric, Vec2 a, Vec2 b, Vec2 c, double beta_at_a,
                   std::vector<Tri>& out) {
    // split recursively until every cone point strictly inside lands on a corner
    for (const auto& cp : metric.cone_points()) {
        const Vec2& p = cp.position;
        const bool at_corner = (p - a).norm() < 1e-12 || (p - b).norm() < 1e-12 ||
                               (p - c).norm() < 1e-12;
        if (at_corner) continue;
        if (point_in_triangle(p, a, b, c)) {
            push_triangle(metric, p, a, b, cp.beta, out);
            push_triangle(metric, p, b, c, cp.beta, out);
            push_triangle(metric, p, c, a, cp.beta, out);
            return;
        }
    }
    out.push_back({a, b, c, beta_at_a});
}

} // namespace

double metric_area(const ConicalMetric& metric, const std::vector<Vec2>& polygon, double rel_tol) {
    if (polygon.size() < 3) throw input_error("metric_area: polygon needs at least 3 vertices");
    if (polygon_signed_area(polygon) <= 0.0)
        throw input_error("metric_area: polygon must be positively oriented");

    // fan from an interior cone point when there is one so the dominant
    // singularity sits at a shared corner, otherwise from the vertex centroid
    Vec2 center{0.0, 0.0};
    for (const auto& v : polygon) center = center + v;
    center = center / static_cast<double>(polygon.size());
    double center_beta = 0.0;
    for (const auto& cp : metric.cone_points()) {
        bool is_vertex = false;
        for (const auto& v : polygon)
            if ((v - cp.position).norm() < 1e-12) is_vertex = true;
        if (is_vertex) continue;
        // cheap winding test via crossing count
        int crossings = 0;
        for (std::size_t i = 0; i < polygon.size(); ++i) {
            const Vec2& p = polygon[i];
            const Vec2& q = polygon[(i + 1) % polygon.size()];
            if ((p.y > cp.position.y) != (q.y > cp.position.y)) {
                const double xint = p.x + (cp.position.y - p.y) * (q.x - p.x) / (q.y - p.y);
                if (xint > cp.position.x) ++crossings;
            }
        }
        if (crossings % 2 == 1) {
            center = cp.position;
            center_beta = cp.beta;
            break;
        }
    }

    std::vector<Tri> tris;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const Vec2& b = polygon[i];
        const Vec2& c = polygon[(i + 1) % polygon.size()];
        if ((b - center).norm() < 1e-14 || (c - center).norm() < 1e-14) continue;
        double beta_a = center_beta;
        Vec2 a = center, bb = b, cc = c;
        // a polygon vertex that is itself a cone point must be the Duffy corner
        if (center_beta == 0.0) {
            for (const auto& cp : metric.cone_points()) {
                if ((b - cp.position).norm() < 1e-12) {
                    a = b; bb = c; cc = center; beta_a = cp.beta;
                    break;
                }
                if ((c - cp.position).norm() < 1e-12) {
                    a = c; bb = center; cc = b; beta_a = cp.beta;
                    break;
                }
            }
        }
        push_triangle(metric, a, bb, cc, beta_a, tris);
    }

    double total = 0.0;
    for (const auto& t : tris) {
        const double sign = wedge(t.b - t.a, t.c - t.a) >= 0.0 ? 1.0 : -1.0;
        total += sign * triangle_integral(metric, t.a, t.b, t.c, t.beta_at_a, rel_tol);
    }
    return total;
}

} // namespace dcsf
