#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "dcsf/curve.hpp"
#include "dcsf/fixtures.hpp"
#include "dcsf/flow.hpp"
#include "dcsf/metric.hpp"

using namespace dcsf;

namespace {

constexpr double kPi = std::numbers::pi;

ConicalMetric origin_cone(double beta) {
    return ConicalMetric({{{0.0, 0.0}, beta}}, BivariatePolynomial{});
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

TEST_CASE("cutoff equals the edge distance near the ends and stays above 1/4") {
    CHECK(d_cutoff(0.0) == 0.0);
    CHECK(d_cutoff(0.1) == 0.1);
    CHECK(d_cutoff(0.25) == 0.25);
    CHECK(d_cutoff(0.9) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(d_cutoff(1.0) == 0.0);
    CHECK(d_cutoff(0.5) == doctest::Approx(0.375).epsilon(1e-15));
    for (int i = 0; i <= 200; ++i) {
        double s = 0.25 + 0.5 * i / 200.0;
        CHECK(d_cutoff(s) >= 0.25 - 1e-15);
        CHECK(d_cutoff(s) == doctest::Approx(d_cutoff(1.0 - s)).epsilon(1e-14));
    }
}

TEST_CASE("cutoff derivatives are consistent and continuous across the blend") {
    const double h = 1e-6;
    for (double s : {0.1, 0.2499, 0.2501, 0.3, 0.42, 0.5, 0.61, 0.7499, 0.7501, 0.9}) {
        double fd1 = (d_cutoff(s + h) - d_cutoff(s - h)) / (2.0 * h);
        CHECK(d_cutoff_d1(s) == doctest::Approx(fd1).epsilon(1e-6));
        double fd2 = (d_cutoff(s + h) - 2.0 * d_cutoff(s) + d_cutoff(s - h)) / (h * h);
        CHECK(d_cutoff_d2(s) == doctest::Approx(fd2).scale(1.0).epsilon(2e-3));
    }
    // two-sided derivative match at the patch joints
    CHECK(std::abs(d_cutoff_d1(0.25 - 1e-12) - d_cutoff_d1(0.25 + 1e-12)) < 1e-10);
    CHECK(std::abs(d_cutoff_d2(0.25 - 1e-12) - d_cutoff_d2(0.25 + 1e-12)) < 1e-8);
}

TEST_CASE("grid map round trip and monotonicity") {
    const double pairs[][2] = {{-0.5, -0.5}, {-0.9, -0.2}, {-0.2, -0.9}, {0.0, 0.0}, {-0.7, 0.0}};
    for (auto& bb : pairs) {
        double b0 = bb[0], b1 = bb[1];
        double prev = 0.0;
        for (int i = 1; i <= 2000; ++i) {
            double s = static_cast<double>(i) / 2000.0;
            double x = x_of_s(s, b0, b1);
            CHECK(s_of_x(x, b0, b1) == doctest::Approx(s).scale(1.0).epsilon(1e-12));
            CHECK(x > prev);
            prev = x;
        }
    }
}

TEST_CASE("grid map reduces to the identity for order zero") {
    for (double x : {0.01, 0.2, 0.37, 0.5, 0.77, 0.99}) {
        CHECK(s_of_x(x, 0.0, 0.0) == doctest::Approx(x).epsilon(1e-14));
        CHECK(ds_dx(x, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("grid map matches the endpoint power law and its derivatives") {
    double b0 = -0.6, b1 = -0.3;
    for (double x : {0.01, 0.1, 0.2}) {
        double ref = std::pow((1.0 + b0) * x, 1.0 / (1.0 + b0));
        CHECK(s_of_x(x, b0, b1) == doctest::Approx(ref).epsilon(1e-15));
        double h = 1e-7;
        double fd = (s_of_x(x + h, b0, b1) - s_of_x(x - h, b0, b1)) / (2.0 * h);
        CHECK(ds_dx(x, b0, b1) == doctest::Approx(fd).epsilon(1e-7));
        double fd2 =
            (ds_dx(x + h, b0, b1) - ds_dx(x - h, b0, b1)) / (2.0 * h);
        CHECK(d2s_dx2(x, b0, b1) == doctest::Approx(fd2).epsilon(1e-6));
    }
    // blend interior derivative consistency
    for (double x : {0.3, 0.5, 0.7}) {
        double h = 1e-6;
        double fd = (s_of_x(x + h, b0, b1) - s_of_x(x - h, b0, b1)) / (2.0 * h);
        CHECK(ds_dx(x, b0, b1) == doctest::Approx(fd).epsilon(1e-8));
    }
}

TEST_CASE("graph curvature reduces to the base curvature at zero offset") {
    CHECK(graph_curvature(1.7, 0.3, 0.0, 0.0, 0.0) == doctest::Approx(1.7).epsilon(1e-15));
    CHECK(graph_curvature(-0.4, 0.1, 0.0, 0.0, 0.0) == doctest::Approx(-0.4).epsilon(1e-15));
}

TEST_CASE("constant offset of the unit circle gives the offset circle curvature") {
    // exact jets: k = 1, k_s = 0
    for (double c : {0.1, 0.3, 0.5}) {
        CHECK(graph_curvature(1.0, 0.0, c, 0.0, 0.0) ==
              doctest::Approx(1.0 / (1.0 - c)).epsilon(1e-14));
    }
    // sampled-base route
    SampledCurve circ = circle_fixture({0.0, 0.0}, 1.0, 512);
    CHECK(graph_curvature(circ, 0.3, 0.0, 0.0, 1.0) ==
          doctest::Approx(1.0 / 0.7).epsilon(1e-4));
    CHECK_THROWS_AS(graph_curvature(1.0, 0.0, 1.0, 0.0, 0.0), domain_error);
}

TEST_CASE("graph curvature agrees with resampling the offset curve") {
    auto base = std::make_shared<CircleCurve>(Vec2{0.0, 0.0}, 1.0);
    ArcLengthCurve arc(base);
    const double L = arc.length();
    auto wf = [](double s) { return 0.05 * std::sin(2.0 * s) + 0.02 * std::cos(5.0 * s); };
    auto wf1 = [](double s) { return 0.10 * std::cos(2.0 * s) - 0.10 * std::sin(5.0 * s); };
    auto wf2 = [](double s) { return -0.20 * std::sin(2.0 * s) - 0.50 * std::cos(5.0 * s); };
    // direct sigma samples (params carry the base arc length; curvature is
    // parametrization invariant so the spline route is comparable pointwise)
    const std::size_t m = 4000;
    SampledCurve sig;
    sig.closed = true;
    for (std::size_t i = 0; i <= m; ++i) {
        double s = L * static_cast<double>(i) / m;
        ArcJet j = arc.arc_jet(s);
        Vec2 xi = rot90(j.tau);
        sig.nodes.push_back(j.gamma + wf(s) * xi);
        sig.params.push_back(s);
    }
    sig.nodes.back() = sig.nodes.front();

    SampledCurve base_nodes = circle_fixture({0.0, 0.0}, 1.0, 1024);
    for (double s : {0.4, 1.3, 2.8, 4.0, 5.9}) {
        double direct = graph_curvature(base_nodes, wf(s), wf1(s), wf2(s), s);
        double resampled = curvature(sig, s);
        CHECK(direct == doctest::Approx(resampled).epsilon(1e-4));
    }
}

TEST_CASE("graph geodesic curvature agrees with the reconstructed curve") {
    ConicalMetric metric({{{2.0, 0.0}, -0.5}},
                         BivariatePolynomial(2, {0.0, 0.0, 0.05, 0.1, 0.0, 0.0}));
    auto base = std::make_shared<CircleCurve>(Vec2{0.0, 0.0}, 1.0);
    ArcLengthCurve arc(base);
    const double L = arc.length();
    auto wf = [](double s) { return 0.04 * std::sin(3.0 * s) + 0.03 * std::cos(2.0 * s); };
    auto wf1 = [](double s) { return 0.12 * std::cos(3.0 * s) - 0.06 * std::sin(2.0 * s); };
    auto wf2 = [](double s) { return -0.36 * std::sin(3.0 * s) - 0.12 * std::cos(2.0 * s); };
    const std::size_t m = 4000;
    SampledCurve sig;
    sig.closed = true;
    for (std::size_t i = 0; i <= m; ++i) {
        double s = L * static_cast<double>(i) / m;
        ArcJet j = arc.arc_jet(s);
        sig.nodes.push_back(j.gamma + wf(s) * rot90(j.tau));
        sig.params.push_back(s);
    }
    sig.nodes.back() = sig.nodes.front();

    SampledCurve base_nodes = circle_fixture({0.0, 0.0}, 1.0, 1024);
    for (double s : {0.7, 1.9, 3.3, 5.1}) {
        double direct = graph_geodesic_curvature(metric, base_nodes, wf(s), wf1(s), wf2(s), s);
        double resampled = geodesic_curvature(metric, sig, s);
        CHECK(direct == doctest::Approx(resampled).scale(1.0).epsilon(1e-4));
    }
}

TEST_CASE("flow config validation") {
    FlowConfig cfg;
    cfg.cells = 16;
    CHECK_THROWS_AS(validate(cfg), input_error);
    cfg = {};
    cfg.cfl = 1.5;
    CHECK_THROWS_AS(validate(cfg), input_error);
    cfg = {};
    cfg.dt_min = 1.0;
    CHECK_THROWS_AS(validate(cfg), input_error);
    cfg = {};
    CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("flow setup rejects an unanchored base") {
    ConicalMetric metric = origin_cone(-0.5);
    auto seg = std::make_shared<SegmentCurve>(Vec2{0.0, 0.0}, Vec2{1.0, 0.0});
    FlowConfig cfg;
    CHECK_THROWS_AS(FlowSetup(metric, seg, cfg), input_error);
}

TEST_CASE("segment between two cone points is a stationary flow") {
    ConicalMetric metric({{{0.0, 0.0}, -0.4}, {{1.0, 0.0}, -0.6}}, BivariatePolynomial{});
    auto seg = std::make_shared<SegmentCurve>(Vec2{0.0, 0.0}, Vec2{1.0, 0.0});
    FlowConfig cfg;
    cfg.cells = 64;
    cfg.t_end = 1.0;
    cfg.dt0 = 1e-4;
    auto setup = std::make_shared<FlowSetup>(metric, seg, cfg);
    GraphFlowState st = initial_state(setup);

    CHECK(max_abs(rhs(st)) < 1e-12);

    for (int i = 0; i < 100; ++i) {
        StepOutcome out = step(st);
        REQUIRE(out.ok);
        CHECK(max_abs(st.u) < 1e-12);
    }
    CHECK(st.t > 0.0);
}

TEST_CASE("zero offset right-hand side matches the pointwise geodesic curvature") {
    ConicalMetric metric = origin_cone(-0.5);
    auto lobe = std::make_shared<TeardropCurve>(true);
    FlowConfig cfg;
    cfg.cells = 128;
    auto setup = std::make_shared<FlowSetup>(metric, lobe, cfg);
    GraphFlowState st = initial_state(setup);
    RhsEval ev = evaluate_rhs(st);
    REQUIRE(ev.finite);
    REQUIRE(ev.graph_ok);
    REQUIRE(!ev.degenerate);

    CurveEval eval(lobe, false, 0, 0);
    double worst = 0.0;
    for (std::size_t i = 0; i < setup->n; ++i) {
        double t = setup->arc->param_of_arc(setup->sphys[i]);
        double kg_ref = geodesic_curvature(metric, eval, t);
        worst = std::max(worst, std::abs(ev.kg_sigma[i] - kg_ref));
        // w_t = lambda^{-1/2} k_g when w == 0
        double wt_ref = std::exp(-metric.log_density(ev.sigma[i])) * kg_ref;
        worst = std::max(worst, std::abs(ev.w_t[i] - wt_ref));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("single step is first-order consistent with the right-hand side") {
    ConicalMetric metric = origin_cone(-0.5);
    auto lobe = std::make_shared<TeardropCurve>(true);
    FlowConfig cfg;
    cfg.cells = 64;
    cfg.t_end = 1.0;

    auto one_step_error = [&](double dt0) {
        FlowConfig c = cfg;
        c.dt0 = dt0;
        auto setup = std::make_shared<FlowSetup>(metric, lobe, c);
        GraphFlowState st = initial_state(setup);
        std::vector<double> r0 = rhs(st);
        StepOutcome out = step(st);
        REQUIRE(out.ok);
        REQUIRE(st.dt == dt0); // small enough to not be clipped by stability
        double err = 0.0;
        for (std::size_t i = 0; i < st.u.size(); ++i)
            err = std::max(err, std::abs(st.u[i] - dt0 * r0[i]));
        return err;
    };

    double e1 = one_step_error(1e-6);
    double e2 = one_step_error(5e-7);
    CHECK(e2 < 0.35 * e1);
}

TEST_CASE("tear drop run shortens, keeps convexity, and pins the endpoints") {
    ConicalMetric metric = origin_cone(-0.5);
    auto lobe = std::make_shared<TeardropCurve>(true);
    FlowConfig cfg;
    cfg.cells = 64;
    cfg.t_end = 0.002;
    cfg.output_every = 10;
    Trajectory tr = run(metric, lobe, cfg);

    CHECK(tr.stop == StopReason::horizon);
    CHECK(tr.final_time == doctest::Approx(cfg.t_end).epsilon(1e-12));
    CHECK(tr.loop);
    REQUIRE(tr.diagnostics.size() >= 3);
    for (std::size_t i = 1; i < tr.diagnostics.size(); ++i)
        CHECK(tr.diagnostics[i].length < tr.diagnostics[i - 1].length);

    double d0 = tr.diagnostics.front().d_max;
    CHECK(d0 == doctest::Approx(1.0).epsilon(5e-3));
    for (const auto& rec : tr.diagnostics) {
        CHECK(rec.kg_min >= -1e-4);
        CHECK(rec.d_max <= d0 + 1e-3);
        CHECK(rec.d_max >= 2.0 * rec.t - 1e-12);
    }

    // opening angle of the tear drop at the tip is pi/2
    CHECK(tr.diagnostics.front().alpha0 == doctest::Approx(kPi / 2.0).epsilon(1e-8));

    for (const auto& snap : tr.snapshots) {
        CHECK(snap.pos.front().x == 0.0);
        CHECK(snap.pos.front().y == 0.0);
        CHECK(snap.pos.back().x == 0.0);
        CHECK(snap.pos.back().y == 0.0);
        CHECK(snap.w.front() == 0.0);
        CHECK(snap.kg.back() == 0.0);
    }
}

TEST_CASE("enclosed area routes agree on the initial tear drop") {
    ConicalMetric metric = origin_cone(-0.5);
    auto lobe = std::make_shared<TeardropCurve>(true);
    FlowConfig cfg;
    cfg.cells = 128;
    auto setup = std::make_shared<FlowSetup>(metric, lobe, cfg);
    GraphFlowState st = initial_state(setup);
    RhsEval ev = evaluate_rhs(st);
    DiagnosticsRecord rec = diagnostics(st, ev);

    std::vector<Vec2> poly;
    poly.push_back({0.0, 0.0});
    for (const auto& p : ev.sigma) poly.push_back(p);
    double shoelace = 0.0;
    for (std::size_t e = 0; e + 1 < poly.size(); ++e) shoelace += wedge(poly[e], poly[e + 1]);
    shoelace += wedge(poly.back(), poly.front());
    if (shoelace < 0.0) std::reverse(poly.begin() + 1, poly.end());
    double duffy = metric_area(metric, poly, 1e-8);
    CHECK(rec.area == doctest::Approx(duffy).epsilon(1e-6));
}

TEST_CASE("curvature threshold stops the run before the horizon") {
    // the lobe starts with max |k_g| = 2.5, so a budget of 2 trips the
    // threshold on the first accepted step while the graph is still healthy
    ConicalMetric metric = origin_cone(-0.5);
    auto lobe = std::make_shared<TeardropCurve>(true);
    FlowConfig cfg;
    cfg.cells = 48;
    cfg.t_end = 10.0;
    cfg.k_max = 2.0;
    cfg.output_every = 200;
    Trajectory tr = run(metric, lobe, cfg);
    CHECK(tr.stop == StopReason::curvature_blowup);
    CHECK(tr.final_time < 0.5);
    CHECK(tr.final_time > 0.0);
    CHECK(tr.snapshots.back().t == doctest::Approx(tr.final_time));
}

TEST_CASE("tangential speed vanishes at zero offset and reconstruction matches the base") {
    ConicalMetric metric = origin_cone(-0.5);
    auto lobe = std::make_shared<TeardropCurve>(true);
    FlowConfig cfg;
    cfg.cells = 64;
    auto setup = std::make_shared<FlowSetup>(metric, lobe, cfg);
    GraphFlowState st = initial_state(setup);

    CHECK(max_abs(tangential_phi(st)) < 1e-15);

    SampledCurve rec = reconstruct(st);
    CHECK(rec.nodes.front().x == 0.0);
    CHECK(rec.nodes.back().y == 0.0);
    REQUIRE(rec.nodes.size() == setup->n + 2);
    for (std::size_t i = 0; i < setup->n; ++i) {
        Vec2 ref = setup->jets[i].gamma;
        CHECK((rec.nodes[i + 1] - ref).norm() < 1e-14);
    }
    CHECK(rec.anchor_start.has_value());
    CHECK(rec.anchor_end.has_value());
}
