#include "dcsf/curve.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "dcsf/quadrature.hpp"

namespace dcsf {

namespace {
constexpr double kRegularityTol = 1e-12;
// below this euclidean distance to an anchor the raw rho quotient has lost
// too many digits and the one-sided expansion takes over
constexpr double kRhoSwitch = 1e-5;
} // namespace

double jet_speed(const CurveJet& j) { return j.d1.norm(); }

Vec2 jet_tangent(const CurveJet& j) {
    const double sp = j.d1.norm();
    if (sp < kRegularityTol) throw domain_error("curve jet is degenerate (zero speed)");
    return j.d1 / sp;
}

Vec2 jet_left_normal(const CurveJet& j) { return rot90(jet_tangent(j)); }

double jet_curvature(const CurveJet& j) {
    const double sp = j.d1.norm();
    if (sp < kRegularityTol) throw domain_error("curve jet is degenerate (zero speed)");
    return wedge(j.d1, j.d2) / (sp * sp * sp);
}

double jet_curvature_derivative_arc(const CurveJet& j) {
    const double sp = j.d1.norm();
    if (sp < kRegularityTol) throw domain_error("curve jet is degenerate (zero speed)");
    const double sp2 = sp * sp;
    const double num = wedge(j.d1, j.d3) * sp2 - 3.0 * wedge(j.d1, j.d2) * dot(j.d1, j.d2);
    return num / (sp2 * sp2 * sp2);
}

CurveEval::CurveEval(const SampledCurve& c)
    : closed_(c.closed), anchor_start_(c.anchor_start), anchor_end_(c.anchor_end) {
    const std::size_t n = c.nodes.size();
    if (n < 2 || c.params.size() != n) throw input_error("sampled curve: bad node arrays");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(c.params[i + 1] > c.params[i]))
            throw input_error("sampled curve: params must be strictly increasing");
    t0_ = c.params.front();
    t1_ = c.params.back();

    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = c.nodes[i].x;
        ys[i] = c.nodes[i].y;
    }
    if (c.closed) {
        if ((c.nodes.front() - c.nodes.back()).norm() > 1e-9 * (1.0 + c.nodes.front().norm()))
            throw input_error("closed sampled curve must repeat its first node at the end");
        xs.back() = xs.front();
        ys.back() = ys.front();
        sx_ = CubicSpline(c.params, xs, CubicSpline::EndCondition::periodic);
        sy_ = CubicSpline(c.params, ys, CubicSpline::EndCondition::periodic);
    } else {
        sx_ = CubicSpline::with_estimated_slopes(c.params, xs);
        sy_ = CubicSpline::with_estimated_slopes(c.params, ys);
    }
}

CurveEval::CurveEval(std::shared_ptr<const ParamCurve> curve, bool closed,
                     std::optional<std::size_t> anchor_start,
                     std::optional<std::size_t> anchor_end)
    : analytic_(std::move(curve)), closed_(closed), anchor_start_(anchor_start),
      anchor_end_(anchor_end) {
    if (!analytic_) throw input_error("null analytic curve");
    t0_ = analytic_->t_begin();
    t1_ = analytic_->t_end();
}

CurveJet CurveEval::jet(double t) const {
    if (analytic_) return analytic_->jet(t);
    CurveJet j;
    j.p = {sx_->value(t), sy_->value(t)};
    j.d1 = {sx_->derivative(t), sy_->derivative(t)};
    j.d2 = {sx_->second_derivative(t), sy_->second_derivative(t)};
    j.d3 = {sx_->third_derivative(t), sy_->third_derivative(t)};
    return j;
}

double curvature(const CurveEval& c, double s) { return jet_curvature(c.jet(s)); }

double curvature(const SampledCurve& c, double s) { return curvature(CurveEval(c), s); }

double rho(const CurveEval& c, double s, const Vec2& p) {
    const CurveJet j = c.jet(s);
    const double scale = 1.0 + p.norm();
    const double d = (j.p - p).norm();
    const double span = c.t_end() - c.t_begin();

    const bool start_at_p = (c.jet(c.t_begin()).p - p).norm() <= 1e-9 * scale;
    const bool end_at_p = (c.jet(c.t_end()).p - p).norm() <= 1e-9 * scale;
    const bool near_start = start_at_p && std::abs(s - c.t_begin()) <= 0.05 * span;
    const bool near_end = end_at_p && std::abs(s - c.t_end()) <= 0.05 * span;

    if (d < kRhoSwitch * scale && (near_start || near_end)) {
        // one-sided expansion rho = -k/2 + (dk/ds) * delta / 6 from the anchor
        const double k = jet_curvature(j);
        const double ks = jet_curvature_derivative_arc(j);
        const double sign = near_start ? 1.0 : -1.0;
        return -0.5 * k + sign * ks * d / 6.0;
    }
    if (d <= 1e-13 * scale)
        throw domain_error("rho evaluated at an interior curve point equal to the reference point");
    const Vec2 xi = jet_left_normal(j);
    return dot(j.p - p, xi) / (d * d);
}

double rho(const SampledCurve& c, double s, const Vec2& p) { return rho(CurveEval(c), s, p); }

double geodesic_curvature(const ConicalMetric& metric, const CurveEval& c, double s) {
    const CurveJet j = c.jet(s);
    const double span = c.t_end() - c.t_begin();
    const bool at_start = std::abs(s - c.t_begin()) <= 1e-12 * span;
    const bool at_end = std::abs(s - c.t_end()) <= 1e-12 * span;
    if (at_start || at_end) {
        const bool pinned_meta = at_start ? c.anchor_start().has_value() : c.anchor_end().has_value();
        const bool pinned_geo = metric.singular_index_at(j.p, 1e-9).has_value();
        if (pinned_meta || pinned_geo) return 0.0;
    }
    if (metric.singular_index_at(j.p, 1e-12).has_value())
        throw domain_error("geodesic curvature at an interior singular point");

    const double k = jet_curvature(j);
    const Vec2 xi = jet_left_normal(j);
    double bracket = k - dot(metric.log_smooth_part().gradient(j.p), xi);
    for (const auto& cone : metric.cone_points()) {
        bracket -= cone.beta * rho(c, s, cone.position);
    }
    return std::exp(-metric.log_density(j.p)) * bracket;
}

double geodesic_curvature(const ConicalMetric& metric, const SampledCurve& c, double s) {
    return geodesic_curvature(metric, CurveEval(c), s);
}

namespace {

// cumulative arc-length machinery shared by reparametrization and length;
// panels that touch a cone point get the power substitution so the graded
// weight lambda^{1/2} ~ dist^beta integrates to full accuracy
struct PanelTable {
    std::vector<double> edges;
    std::vector<double> powers;   // singular exponent at the panel's singular end, 0 if regular
    std::vector<int> power_side;  // -1 left end singular, +1 right end, 0 regular
    std::vector<double> integrals;
    std::vector<double> cumulative;
};

PanelTable build_panels(const CurveEval& ev, const SampledCurve& c, ReparamMode mode,
                        const ConicalMetric* metric) {
    if (mode == ReparamMode::metric && metric == nullptr)
        throw input_error("metric arc length requested without a metric");

    auto weight = [&](double t) -> double {
        const CurveJet j = ev.jet(t);
        const double sp = j.d1.norm();
        if (sp < kRegularityTol) throw domain_error("curve not regular");
        if (mode == ReparamMode::euclidean) return sp;
        return metric->sqrt_conformal_factor(j.p) * sp;
    };

    // nodes sitting exactly on cone points mark singular panel ends
    std::vector<double> node_power(c.nodes.size(), 0.0);
    if (mode == ReparamMode::metric) {
        for (std::size_t i = 0; i < c.nodes.size(); ++i) {
            if (auto idx = metric->singular_index_at(c.nodes[i], 1e-9))
                node_power[i] = metric->cone_points()[*idx].beta;
        }
    }

    constexpr int kSub = 4;
    PanelTable tab;
    for (std::size_t i = 0; i + 1 < c.params.size(); ++i) {
        for (int q = 0; q < kSub; ++q) {
            const double a = c.params[i] + (c.params[i + 1] - c.params[i]) * q / kSub;
            tab.edges.push_back(a);
            double pw = 0.0;
            int side = 0;
            if (q == 0 && node_power[i] != 0.0) {
                pw = node_power[i];
                side = -1;
            } else if (q == kSub - 1 && node_power[i + 1] != 0.0) {
                pw = node_power[i + 1];
                side = +1;
            }
            tab.powers.push_back(pw);
            tab.power_side.push_back(side);
        }
    }
    tab.edges.push_back(c.params.back());

    QuadratureControl ctl{1e-10, 36};
    tab.integrals.resize(tab.powers.size());
    for (std::size_t k = 0; k < tab.powers.size(); ++k) {
        const double a = tab.edges[k], b = tab.edges[k + 1];
        if (tab.power_side[k] == 0) {
            tab.integrals[k] = adaptive_integrate(weight, a, b, ctl);
        } else if (tab.power_side[k] < 0) {
            tab.integrals[k] = integrate_power_endpoint(weight, a, b, tab.powers[k], ctl);
        } else {
            auto rev = [&](double x) { return weight(b - (x - a)); };
            tab.integrals[k] = integrate_power_endpoint(rev, a, b, tab.powers[k], ctl);
        }
    }
    tab.cumulative.resize(tab.integrals.size() + 1, 0.0);
    for (std::size_t k = 0; k < tab.integrals.size(); ++k)
        tab.cumulative[k + 1] = tab.cumulative[k] + tab.integrals[k];
    return tab;
}

double panel_partial(const CurveEval& ev, ReparamMode mode, const ConicalMetric* metric,
                     const PanelTable& tab, std::size_t k, double t) {
    auto weight = [&](double x) -> double {
        const CurveJet j = ev.jet(x);
        const double sp = j.d1.norm();
        if (mode == ReparamMode::euclidean) return sp;
        return metric->sqrt_conformal_factor(j.p) * sp;
    };
    const double a = tab.edges[k], b = tab.edges[k + 1];
    QuadratureControl ctl{1e-10, 36};
    if (t <= a) return 0.0;
    if (tab.power_side[k] < 0) return integrate_power_endpoint(weight, a, t, tab.powers[k], ctl);
    if (tab.power_side[k] > 0) {
        // integrate the regular left part directly; the singularity sits at b
        auto rev = [&](double x) { return weight(b - (x - a)); };
        const double whole = integrate_power_endpoint(rev, a, b, tab.powers[k], ctl);
        if (t >= b) return whole;
        const double tail = integrate_power_endpoint(rev, a, a + (b - t), tab.powers[k], ctl);
        return whole - tail;
    }
    return adaptive_integrate(weight, a, std::min(t, b), ctl);
}

} // namespace

double curve_length(const SampledCurve& c, ReparamMode mode, const ConicalMetric* metric) {
    CurveEval ev(c);
    return build_panels(ev, c, mode, metric).cumulative.back();
}

SampledCurve arclength_reparam(const SampledCurve& c, ReparamMode mode,
                               const ConicalMetric* metric, std::size_t n_out) {
    CurveEval ev(c);
    const PanelTable tab = build_panels(ev, c, mode, metric);
    const double total = tab.cumulative.back();
    if (!(total > 0.0)) throw domain_error("curve has zero length");

    const std::size_t n = n_out ? n_out : c.nodes.size();
    if (n < 2) throw input_error("reparametrization needs at least two output nodes");

    SampledCurve out;
    out.closed = c.closed;
    out.anchor_start = c.anchor_start;
    out.anchor_end = c.anchor_end;
    out.nodes.resize(n);
    out.params.resize(n);

    out.nodes.front() = c.nodes.front();
    out.params.front() = 0.0;
    out.nodes.back() = c.nodes.back();
    out.params.back() = total;

    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double target = total * static_cast<double>(i) / static_cast<double>(n - 1);
        const auto it = std::upper_bound(tab.cumulative.begin(), tab.cumulative.end(), target);
        std::size_t k = static_cast<std::size_t>(std::distance(tab.cumulative.begin(), it));
        k = (k == 0) ? 0 : k - 1;
        if (k >= tab.integrals.size()) k = tab.integrals.size() - 1;

        const double want = target - tab.cumulative[k];
        double lo = tab.edges[k], hi = tab.edges[k + 1];
        for (int iter = 0; iter < 52; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (panel_partial(ev, mode, metric, tab, k, mid) < want)
                lo = mid;
            else
                hi = mid;
        }
        const double t = 0.5 * (lo + hi);
        out.nodes[i] = ev.jet(t).p;
        out.params[i] = target;
    }
    return out;
}

ArcLengthCurve::ArcLengthCurve(std::shared_ptr<const ParamCurve> curve, std::size_t table_size)
    : curve_(std::move(curve)) {
    if (!curve_) throw input_error("null curve");
    const double a = curve_->t_begin(), b = curve_->t_end();
    const std::size_t n = std::max<std::size_t>(table_size, 8);
    params_.resize(n + 1);
    lengths_.resize(n + 1);
    auto speed = [&](double t) { return curve_->jet(t).d1.norm(); };
    params_[0] = a;
    lengths_[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        params_[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
        lengths_[i] = lengths_[i - 1] + gauss15(speed, params_[i - 1], params_[i]);
    }
}

double ArcLengthCurve::param_of_arc(double ell) const {
    const double total = lengths_.back();
    double target = std::clamp(ell, 0.0, total);
    const auto it = std::upper_bound(lengths_.begin(), lengths_.end(), target);
    std::size_t i = static_cast<std::size_t>(std::distance(lengths_.begin(), it));
    i = (i == 0) ? 0 : i - 1;
    if (i + 1 >= params_.size()) i = params_.size() - 2;

    auto speed = [&](double t) { return curve_->jet(t).d1.norm(); };
    double t = params_[i];
    double base = lengths_[i];
    // Newton with bisection fallback inside the table cell
    double lo = params_[i], hi = params_[i + 1];
    for (int iter = 0; iter < 40; ++iter) {
        const double f = base + gauss15(speed, params_[i], t) - target;
        if (std::abs(f) < 1e-14 * (1.0 + total)) break;
        if (f > 0.0)
            hi = t;
        else
            lo = t;
        const double sp = speed(t);
        double tn = t - f / sp;
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        t = tn;
    }
    return t;
}

ArcJet ArcLengthCurve::arc_jet(double ell) const {
    const CurveJet j = curve_->jet(param_of_arc(ell));
    ArcJet a;
    a.gamma = j.p;
    a.tau = jet_tangent(j);
    a.k = jet_curvature(j);
    a.k_s = jet_curvature_derivative_arc(j);
    return a;
}

} // namespace dcsf
