#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "dcsf/curve.hpp"
#include "dcsf/fixtures.hpp"
#include "dcsf/metric.hpp"

using namespace dcsf;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent route for k_g: covariant derivative of the metric-unit tangent
// by finite differences, projected on the metric-unit normal. Uses only
// log_density evaluations, none of the closed-form bracket.
double fd_geodesic_curvature(const ConicalMetric& m, const CurveEval& c, double s) {
    const double hs = 1e-5;
    auto metric_tangent = [&](double t) -> Vec2 {
        const CurveJet j = c.jet(t);
        return jet_tangent(j) * std::exp(-m.log_density(j.p));
    };
    auto dphi = [&](const Vec2& z) -> Vec2 {
        const double he = 1e-6;
        return {(m.log_density({z.x + he, z.y}) - m.log_density({z.x - he, z.y})) / (2.0 * he),
                (m.log_density({z.x, z.y + he}) - m.log_density({z.x, z.y - he})) / (2.0 * he)};
    };
    const CurveJet j = c.jet(s);
    const double speed = j.d1.norm();
    const double lam_half = std::exp(m.log_density(j.p));
    // d T / d s_g, with s_g the metric arc length
    const Vec2 dT = (metric_tangent(s + hs) - metric_tangent(s - hs)) / (2.0 * hs * speed * lam_half);
    const Vec2 T = metric_tangent(s);
    const Vec2 g = dphi(j.p);
    // Gamma^i_{jk} T^j T^k for the conformal metric e^{2 phi} delta
    const double tdotg = dot(T, g);
    const Vec2 christoffel = T * (2.0 * tdotg) - g * T.norm2();
    const Vec2 cov = dT + christoffel;
    const Vec2 N = rot90(jet_tangent(j)) / lam_half;
    // g(cov, N) = lambda <cov, N>
    return lam_half * lam_half * (cov.x * N.x + cov.y * N.y);
}

} // namespace

TEST_CASE("analytic circle jets give exact curvature") {
    auto circ = std::make_shared<CircleCurve>(Vec2{0.5, -0.25}, 2.0);
    const CurveEval ev(circ, true);
    for (double s : {0.1, 1.0, 3.0, 5.5}) {
        CHECK(curvature(ev, s) == doctest::Approx(0.5).epsilon(1e-13));
    }
    auto cw = std::make_shared<CircleCurve>(Vec2{0.0, 0.0}, 2.0, false);
    CHECK(curvature(CurveEval(cw, true), 0.7) == doctest::Approx(-0.5).epsilon(1e-13));
}

TEST_CASE("sampled circle curvature through splines converges at second order") {
    for (double s : {0.5, 2.0, 4.0}) {
        const double e256 = std::abs(curvature(circle_fixture({0, 0}, 1.0, 256), s) - 1.0);
        const double e1024 = std::abs(curvature(circle_fixture({0, 0}, 1.0, 1024), s) - 1.0);
        CHECK(e256 < 5e-5);
        CHECK(e1024 < 5e-6);
    }
}

TEST_CASE("straight segments have zero curvature and zero rho through the line") {
    const SampledCurve seg = segment_fixture({0.2, 0.1}, {2.0, 1.0}, 64);
    CHECK(curvature(seg, 0.4) == doctest::Approx(0.0).epsilon(1e-12));
    // p on the segment's supporting line, outside the segment
    const Vec2 p{-1.6, -0.8};
    for (double s : {0.1, 0.5, 0.9}) {
        CHECK(std::abs(rho(seg, s, p)) < 1e-10);
    }
}

TEST_CASE("rho of a circle about its center") {
    auto circ = std::make_shared<CircleCurve>(Vec2{0.0, 0.0}, 2.0);
    const CurveEval ev(circ, true);
    CHECK(rho(ev, 1.3, {0.0, 0.0}) == doctest::Approx(-0.5).epsilon(1e-13));
}

TEST_CASE("tear-drop identities with analytic jets") {
    auto td = std::make_shared<TeardropCurve>();
    const CurveEval ev(td, false, 0, 0);
    double max_k_minus_3r = 0.0;
    double max_3rho_plus_k = 0.0;
    // the signed identities hold on the first lobe; skip the cancellation
    // window right at the origin where the quotient has no digits left
    for (int i = 1; i < 2000; ++i) {
        const double s = kPi * i / 2000.0;
        const CurveJet j = ev.jet(s);
        if (j.p.norm() < 1e-3) continue;
        const double k = jet_curvature(j);
        max_k_minus_3r = std::max(max_k_minus_3r, std::abs(k - 3.0 * j.p.norm()));
        max_3rho_plus_k = std::max(max_3rho_plus_k, std::abs(3.0 * rho(ev, s, {0, 0}) + k));
    }
    CHECK(max_k_minus_3r < 1e-8);
    CHECK(max_3rho_plus_k < 1e-8);
}

TEST_CASE("rho approaches the endpoint limit with the arc correction") {
    auto td = std::make_shared<TeardropCurve>();
    const CurveEval ev(td, false, 0, 0);
    // k(0) = 0 for the tear drop, so rho(0) = -k(0)/2 = 0
    CHECK(std::abs(rho(ev, 0.0, {0, 0})) < 1e-12);
    // approaching the anchor, rho ~ -arc distance (k = 3 ell, dk/ds = 3)
    for (double s : {1e-6, 1e-4, 1e-3}) {
        const double ell = ev.jet(s).p.norm(); // chord ~ arc here
        CHECK(rho(ev, s, {0, 0}) == doctest::Approx(-ell).epsilon(2e-2));
    }
}

TEST_CASE("rho throws on an interior pass through the reference point") {
    auto td = std::make_shared<TeardropCurve>();
    const CurveEval ev(td, false, 0, 0);
    CHECK_THROWS_AS(rho(ev, kPi, {0, 0}), domain_error);
}

TEST_CASE("geodesic curvature of a radial ray through the cone point is zero") {
    const ConicalMetric m({{{0, 0}, -0.5}}, BivariatePolynomial());
    SampledCurve ray = segment_fixture({0, 0}, {2.0, 1.0}, 64);
    ray.anchor_start = 0;
    for (double s : {0.05, 0.3, 0.77, 1.0}) {
        CHECK(std::abs(geodesic_curvature(m, ray, s)) < 1e-10);
    }
}

TEST_CASE("geodesic curvature of a circle around one cone point") {
    for (const double beta : {-0.2, -0.5, -0.9}) {
        const ConicalMetric m({{{0, 0}, beta}}, BivariatePolynomial());
        auto circ = std::make_shared<CircleCurve>(Vec2{0.0, 0.0}, 1.7);
        const CurveEval ev(circ, true);
        const double expected = (1.0 + beta) * std::pow(1.7, -1.0 - beta);
        for (double s : {0.3, 2.0, 4.4}) {
            CHECK(geodesic_curvature(m, ev, s) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("tear-drop geodesic curvature closed form in |z|^{2 beta}") {
    const double beta = -0.5;
    const ConicalMetric m({{{0, 0}, beta}}, BivariatePolynomial());
    auto td = std::make_shared<TeardropCurve>();
    const CurveEval ev(td, false, 0, 0);
    for (int i = 1; i < 40; ++i) {
        const double s = kPi * i / 40.0;
        const double r = ev.jet(s).p.norm();
        if (r < 0.1) continue;
        const double expected = std::pow(r, 1.0 - beta) * (beta + 3.0);
        CHECK(geodesic_curvature(m, ev, s) == doctest::Approx(expected).epsilon(1e-8));
    }
}

TEST_CASE("anchored endpoints report exactly zero geodesic curvature") {
    const ConicalMetric m({{{0, 0}, -0.5}}, BivariatePolynomial());
    const SampledCurve lobe = tear_drop_lobe_fixture(256);
    CHECK(geodesic_curvature(m, lobe, lobe.params.front()) == 0.0);
    CHECK(geodesic_curvature(m, lobe, lobe.params.back()) == 0.0);
}

TEST_CASE("closed-form bracket agrees with the covariant-derivative oracle") {
    // general position: two cone points and a non-harmonic smooth part
    const ConicalMetric m({{{0, 0}, -0.5}, {{1.5, 0.4}, -0.3}},
                          BivariatePolynomial(2, {0.0, 0.1, 0.2, 0.0, -0.15, 0.05}));
    auto td = std::make_shared<TeardropCurve>();
    const CurveEval ev(td, false, 0, 0);
    for (double s : {0.6, 1.2, 1.9, 2.6}) {
        const double kg = geodesic_curvature(m, ev, s);
        const double kg_fd = fd_geodesic_curvature(m, ev, s);
        CHECK(kg == doctest::Approx(kg_fd).epsilon(1e-4));
    }
}

TEST_CASE("euclidean reparametrization gives uniform spacing with fixed endpoints") {
    // deliberately nonuniform (but regular) parameter samples of a segment
    SampledCurve c;
    for (int i = 0; i <= 40; ++i) {
        const double q = static_cast<double>(i) / 40.0;
        const double t = q * (0.6 + 0.4 * q);
        c.params.push_back(static_cast<double>(i));
        c.nodes.push_back({t * 2.0, t * -1.0});
    }
    const SampledCurve r = arclength_reparam(c, ReparamMode::euclidean);
    CHECK(r.nodes.front().x == 0.0);
    CHECK(r.nodes.back().x == doctest::Approx(2.0).epsilon(1e-12));
    const double want = std::sqrt(5.0) / 40.0;
    for (std::size_t i = 0; i + 1 < r.nodes.size(); ++i) {
        CHECK((r.nodes[i + 1] - r.nodes[i]).norm() == doctest::Approx(want).epsilon(1e-3));
    }
}

TEST_CASE("already uniform circle is left essentially unchanged") {
    const SampledCurve c = circle_fixture({0, 0}, 1.0, 128);
    const SampledCurve r = arclength_reparam(c, ReparamMode::euclidean);
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        CHECK((r.nodes[i] - c.nodes[i]).norm() < 1e-6);
    }
}

TEST_CASE("metric reparametrization of a radial segment") {
    const double beta = -0.5, R = 2.0;
    const ConicalMetric m({{{0, 0}, beta}}, BivariatePolynomial());
    SampledCurve seg = segment_fixture({0, 0}, {R, 0.0}, 128);
    seg.anchor_start = 0;
    const SampledCurve r = arclength_reparam(seg, ReparamMode::metric, &m);
    const double total = std::pow(R, 1.0 + beta) / (1.0 + beta);
    CHECK(r.params.back() == doctest::Approx(total).epsilon(1e-8));
    // uniform in metric length: cumulative params equispaced by construction,
    // so check the nodes land where the antiderivative says they should
    for (std::size_t i = 1; i + 1 < r.nodes.size(); ++i) {
        const double ell = r.params[i];
        const double x_expected = std::pow(ell * (1.0 + beta), 1.0 / (1.0 + beta));
        CHECK(r.nodes[i].x == doctest::Approx(x_expected).epsilon(1e-6));
    }
}

TEST_CASE("arc-length view of the lobe") {
    auto lobe = std::make_shared<TeardropCurve>(true);
    const ArcLengthCurve arc(lobe);
    CHECK(arc.length() == doctest::Approx(2.6220575543).epsilon(1e-8));
    const ArcJet aj = arc.arc_jet(arc.length() / 2.0);
    CHECK(aj.tau.norm() == doctest::Approx(1.0).epsilon(1e-12));
    // the lobe apex sits at (-1, 0) with curvature 3 |gamma| = 3
    CHECK(aj.gamma.x == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(std::abs(aj.gamma.y) < 1e-9);
    CHECK(aj.k == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("fixture input validation") {
    CHECK_THROWS_AS(tear_drop_fixture(8), input_error);
    const SampledCurve td = tear_drop_fixture(64);
    CHECK(td.nodes.front().norm() == 0.0);
    CHECK(td.nodes.back().norm() == 0.0);
    // s -> 2pi - s is the point reflection, s -> pi - s mirrors across the x axis
    const SampledCurve td2 = tear_drop_fixture(65);
    const Vec2 a = td2.nodes[10];
    const Vec2 b = td2.nodes[64 - 10];
    CHECK(a.x == doctest::Approx(-b.x).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(-b.y).epsilon(1e-12));
    const Vec2 c2 = td2.nodes[32 - 10];
    CHECK(a.x == doctest::Approx(c2.x).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(-c2.y).epsilon(1e-12));
}
