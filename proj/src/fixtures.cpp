#include "dcsf/fixtures.hpp"

#include <cmath>
#include <numbers>

#include "dcsf/taylor.hpp"

namespace dcsf {

namespace {

CurveJet jet_from_taylor(const Taylor3& x, const Taylor3& y) {
    CurveJet j;
    j.p = {x.value(), y.value()};
    j.d1 = {x.d1(), y.d1()};
    j.d2 = {x.d2(), y.d2()};
    j.d3 = {x.d3(), y.d3()};
    return j;
}

} // namespace

double TeardropCurve::t_end() const { return single_lobe_ ? std::numbers::pi : 2.0 * std::numbers::pi; }

CurveJet TeardropCurve::jet(double t) const {
    const Taylor3 s = Taylor3::variable(t);
    const Taylor3 sn = sin(s), cs = cos(s);
    const Taylor3 inv_den = inv(cs * cs + 1.0);
    return jet_from_taylor((sn * inv_den) * (-1.0), sn * cs * inv_den);
}

CircleCurve::CircleCurve(Vec2 center, double radius, bool counterclockwise, double angle0,
                         double angle1)
    : center_(center), radius_(radius), orient_(counterclockwise ? 1.0 : -1.0), a0_(angle0),
      a1_(angle1) {
    if (radius_ <= 0.0) throw input_error("circle radius must be positive");
    if (a1_ <= a0_) a1_ = a0_ + 2.0 * std::numbers::pi;
}

CurveJet CircleCurve::jet(double t) const {
    const Taylor3 a = Taylor3::variable(a0_ + orient_ * (t - a0_));
    const Taylor3 x = cos(a) * radius_ + center_.x;
    const Taylor3 y = sin(a) * radius_ + center_.y;
    CurveJet j = jet_from_taylor(x, y);
    if (orient_ < 0.0) {
        // chain rule through t -> 2 a0 - t flips odd derivatives
        j.d1 = j.d1 * -1.0;
        j.d3 = j.d3 * -1.0;
    }
    return j;
}

CurveJet DropletCurve::jet(double t) const {
    const Taylor3 s = Taylor3::variable(t);
    const double pi = std::numbers::pi;
    const Taylor3 sp = sin(s * pi);
    const Taylor3 x = sin(s * (2.0 * pi)) * sp * sp * c_;
    return jet_from_taylor(x, sp);
}

namespace {

SampledCurve sample_param_curve(const ParamCurve& c, std::size_t resolution, bool closed) {
    if (resolution < 16) throw input_error("fixture resolution must be at least 16");
    SampledCurve out;
    out.closed = closed;
    out.nodes.resize(resolution);
    out.params.resize(resolution);
    const double a = c.t_begin(), b = c.t_end();
    for (std::size_t i = 0; i < resolution; ++i) {
        const double t = a + (b - a) * static_cast<double>(i) / static_cast<double>(resolution - 1);
        out.params[i] = t;
        out.nodes[i] = c.jet(t).p;
    }
    return out;
}

} // namespace

SampledCurve tear_drop_fixture(std::size_t resolution) {
    const TeardropCurve c;
    SampledCurve out = sample_param_curve(c, resolution, false);
    // pin the endpoint samples to the anchor exactly
    out.nodes.front() = {0.0, 0.0};
    out.nodes.back() = {0.0, 0.0};
    out.anchor_start = 0;
    out.anchor_end = 0;
    return out;
}

SampledCurve tear_drop_lobe_fixture(std::size_t resolution) {
    const TeardropCurve c(true);
    SampledCurve out = sample_param_curve(c, resolution, false);
    out.nodes.front() = {0.0, 0.0};
    out.nodes.back() = {0.0, 0.0};
    out.anchor_start = 0;
    out.anchor_end = 0;
    return out;
}

SampledCurve circle_fixture(Vec2 center, double radius, std::size_t resolution,
                            bool counterclockwise) {
    const CircleCurve c(center, radius, counterclockwise);
    SampledCurve out = sample_param_curve(c, resolution, true);
    out.nodes.back() = out.nodes.front();
    return out;
}

SampledCurve segment_fixture(Vec2 a, Vec2 b, std::size_t resolution) {
    const SegmentCurve c(a, b);
    return sample_param_curve(c, resolution, false);
}

} // namespace dcsf
