#include "dcsf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "dcsf/quadrature.hpp"
#include "dcsf/spline.hpp"

namespace dcsf {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kRhoSwitch = 1e-5;  // relative radius for the anchor expansion of rho
constexpr double kGuardMid = 1e-6;   // absolute clearance from off-anchor singular points
constexpr double kGuardTip = 0.1;    // |sigma - p| / |gamma - p| floor near the anchors

// cutoff blend on [1/4, 1/2]: value 1/4 + pb(m - 1/4), C^2 against both patches
double pb(double t) { return t - 16.0 * t * t * t + 32.0 * t * t * t * t; }
double pb1(double t) { return 1.0 - 48.0 * t * t + 128.0 * t * t * t; }
double pb2(double t) { return -96.0 * t + 384.0 * t * t; }

// cutoff from the distance m = min(s, 1-s) to the nearer endpoint; sgn is the
// derivative orientation (+1 on the left half, -1 on the right)
void cutoff_from_edge(double m, double sgn, double& d, double& d1, double& d2) {
    if (m <= 0.25) {
        d = m;
        d1 = sgn;
        d2 = 0.0;
    } else {
        double t = m - 0.25;
        d = 0.25 + pb(t);
        d1 = sgn * pb1(t);
        d2 = pb2(t);
    }
}

// quintic Hermite basis on [0,1] and its first two derivatives
struct QuinticBasis {
    double h00, h10, h20, h01, h11, h21;
    double g00, g10, g20, g01, g11, g21; // d/dtau
    double f00, f10, f20, f01, f11, f21; // d^2/dtau^2
};

QuinticBasis quintic_basis(double t) {
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    QuinticBasis b;
    b.h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    b.h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    b.h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    b.h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    b.h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    b.h21 = 0.5 * t3 - t4 + 0.5 * t5;
    b.g00 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    b.g10 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    b.g20 = t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
    b.g01 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    b.g11 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    b.g21 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;
    b.f00 = -60.0 * t + 180.0 * t2 - 120.0 * t3;
    b.f10 = -36.0 * t + 96.0 * t2 - 60.0 * t3;
    b.f20 = 1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3;
    b.f01 = 60.0 * t - 180.0 * t2 + 120.0 * t3;
    b.f11 = -24.0 * t + 84.0 * t2 - 60.0 * t3;
    b.f21 = 3.0 * t - 8.0 * t2 + 5.0 * t3;
    return b;
}

void check_orders(double b0, double b1) {
    if (!(b0 > -1.0 && b0 <= 0.0 && b1 > -1.0 && b1 <= 0.0))
        throw input_error("endpoint orders must lie in (-1, 0]");
}

// grid map evaluation; send = 1 - s is carried separately so the right tip
// never goes through the cancelling form 1 - (1 - tiny)
struct SPoint {
    double s;
    double send;
    double s1;
    double s2;
};

SPoint smap_eval(double x, double b0, double b1) {
    check_orders(b0, b1);
    SPoint r;
    if (x <= 0.25) {
        double g = (1.0 + b0) * x;
        r.s = std::pow(g, 1.0 / (1.0 + b0));
        r.send = 1.0 - r.s;
        r.s1 = std::pow(g, -b0 / (1.0 + b0));
        r.s2 = -b0 * std::pow(g, -(1.0 + 2.0 * b0) / (1.0 + b0));
        return r;
    }
    if (x >= 0.75) {
        double g = (1.0 + b1) * (1.0 - x);
        r.send = std::pow(g, 1.0 / (1.0 + b1));
        r.s = 1.0 - r.send;
        r.s1 = std::pow(g, -b1 / (1.0 + b1));
        r.s2 = b1 * std::pow(g, -(1.0 + 2.0 * b1) / (1.0 + b1));
        return r;
    }
    // blend data at x = 1/4 and x = 3/4 from the two patches
    double ga = 0.25 * (1.0 + b0);
    double ya = std::pow(ga, 1.0 / (1.0 + b0));
    double d1a = std::pow(ga, -b0 / (1.0 + b0));
    double d2a = -b0 * std::pow(ga, -(1.0 + 2.0 * b0) / (1.0 + b0));
    double gb = 0.25 * (1.0 + b1);
    double sendb = std::pow(gb, 1.0 / (1.0 + b1));
    double yb = 1.0 - sendb;
    double d1b = std::pow(gb, -b1 / (1.0 + b1));
    double d2b = b1 * std::pow(gb, -(1.0 + 2.0 * b1) / (1.0 + b1));

    double h = 0.5;
    double tau = (x - 0.25) / h;
    QuinticBasis q = quintic_basis(tau);
    double slope = h * (d1a * q.h10 + d1b * q.h11) + h * h * (d2a * q.h20 + d2b * q.h21);
    double direct = ya * q.h00 + yb * q.h01 + slope;
    // complementary form: 1 - H with h00 + h01 == 1, stable at the right edge
    double comp = (1.0 - ya) * q.h00 + sendb * q.h01 - slope;
    r.s = (comp < 0.25) ? 1.0 - comp : direct;
    r.send = (direct < 0.25) ? 1.0 - direct : comp;
    r.s1 = (ya * q.g00 + yb * q.g01) / h + (d1a * q.g10 + d1b * q.g11) +
           h * (d2a * q.g20 + d2b * q.g21);
    r.s2 = (ya * q.f00 + yb * q.f01) / (h * h) + (d1a * q.f10 + d1b * q.f11) / h +
           (d2a * q.f20 + d2b * q.f21);
    return r;
}

// robust |sigma - p| at an anchor: bd is the base distance, rho_b the base
// normal quotient, w the graph offset
double graph_anchor_dist(double bd, double w, double rho_b) {
    double d2 = bd * bd * (1.0 + 2.0 * w * rho_b) + w * w;
    return d2 > 0.0 ? std::sqrt(d2) : 0.0;
}

struct TriOp {
    std::vector<double> lo, di, up;
    double max_diff = 0.0; // largest frozen diffusion coefficient
};

// frozen structural operator A = D d_xx + V d_x(upwinded), mirror ghosts folded
TriOp structural_operator(const FlowSetup& fs, const RhsEval& ev) {
    std::size_t n = fs.n;
    double hx = fs.hx, hx2 = fs.hx * fs.hx;
    TriOp A;
    A.lo.assign(n, 0.0);
    A.di.assign(n, 0.0);
    A.up.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double diff = ev.lambda_inv[i] * fs.a[i] * fs.a[i] / ev.q[i];
        double drift = ev.lambda_inv[i] * (fs.b[i] + 2.0 * fs.d1p[i] * fs.a[i] / fs.d[i]) / ev.q[i];
        A.max_diff = std::max(A.max_diff, diff);
        double lo = diff / hx2, up = diff / hx2;
        double di = -2.0 * diff / hx2 - std::abs(drift) / hx;
        if (drift >= 0.0)
            up += drift / hx;
        else
            lo += -drift / hx;
        if (i == 0) {
            di += lo;
            lo = 0.0;
        }
        if (i + 1 == n) {
            di += up;
            up = 0.0;
        }
        A.lo[i] = lo;
        A.di[i] = di;
        A.up[i] = up;
    }
    return A;
}

std::vector<double> apply_operator(const TriOp& A, const std::vector<double>& u) {
    std::size_t n = u.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = A.di[i] * u[i];
        if (i > 0) v += A.lo[i] * u[i - 1];
        if (i + 1 < n) v += A.up[i] * u[i + 1];
        out[i] = v;
    }
    return out;
}

double quad_extrapolate(double x0, double y0, double x1, double y1, double x2, double y2,
                        double xq) {
    double l0 = (xq - x1) * (xq - x2) / ((x0 - x1) * (x0 - x2));
    double l1 = (xq - x0) * (xq - x2) / ((x1 - x0) * (x1 - x2));
    double l2 = (xq - x0) * (xq - x1) / ((x2 - x0) * (x2 - x1));
    return l0 * y0 + l1 * y1 + l2 * y2;
}

class SampledParamCurve final : public ParamCurve {
  public:
    explicit SampledParamCurve(const SampledCurve& c) : ev_(c) {}
    CurveJet jet(double t) const override { return ev_.jet(t); }
    double t_begin() const override { return ev_.t_begin(); }
    double t_end() const override { return ev_.t_end(); }

  private:
    CurveEval ev_;
};

} // namespace

double d_cutoff(double s) {
    double d, d1, d2;
    double m = std::min(s, 1.0 - s);
    cutoff_from_edge(m, s <= 0.5 ? 1.0 : -1.0, d, d1, d2);
    return d;
}

double d_cutoff_d1(double s) {
    double d, d1, d2;
    double m = std::min(s, 1.0 - s);
    cutoff_from_edge(m, s <= 0.5 ? 1.0 : -1.0, d, d1, d2);
    return d1;
}

double d_cutoff_d2(double s) {
    double d, d1, d2;
    double m = std::min(s, 1.0 - s);
    cutoff_from_edge(m, s <= 0.5 ? 1.0 : -1.0, d, d1, d2);
    return d2;
}

double s_of_x(double x, double beta0, double beta1) { return smap_eval(x, beta0, beta1).s; }
double ds_dx(double x, double beta0, double beta1) { return smap_eval(x, beta0, beta1).s1; }
double d2s_dx2(double x, double beta0, double beta1) { return smap_eval(x, beta0, beta1).s2; }

double x_of_s(double s, double beta0, double beta1) {
    check_orders(beta0, beta1);
    if (!(s >= 0.0 && s <= 1.0)) throw input_error("s outside [0, 1]");
    double ya = std::pow(0.25 * (1.0 + beta0), 1.0 / (1.0 + beta0));
    double sendb = std::pow(0.25 * (1.0 + beta1), 1.0 / (1.0 + beta1));
    if (s <= ya) return std::pow(s, 1.0 + beta0) / (1.0 + beta0);
    if (1.0 - s <= sendb) return 1.0 - std::pow(1.0 - s, 1.0 + beta1) / (1.0 + beta1);
    // safeguarded Newton on the blend
    double lo = 0.25, hi = 0.75, x = 0.5;
    for (int it = 0; it < 100; ++it) {
        SPoint p = smap_eval(x, beta0, beta1);
        double f = p.s - s;
        if (f > 0.0)
            hi = x;
        else
            lo = x;
        double xn = x - f / p.s1;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::abs(xn - x) < 1e-16) return xn;
        x = xn;
    }
    return x;
}

double graph_curvature(double k, double k_s, double w, double w_s, double w_ss) {
    double one = 1.0 - k * w;
    if (!(one > 0.0)) throw domain_error("graph leaves the tubular neighborhood of the base");
    double q = one * one + w_s * w_s;
    return (one * w_ss + 2.0 * k * w_s * w_s + k_s * w_s * w + k * one * one) /
           (q * std::sqrt(q));
}

double graph_curvature(const SampledCurve& base, double w, double w_s, double w_ss, double s) {
    auto pc = std::make_shared<SampledParamCurve>(base);
    ArcLengthCurve arc(pc);
    ArcJet j = arc.arc_jet(s);
    return graph_curvature(j.k, j.k_s, w, w_s, w_ss);
}

double graph_geodesic_curvature(const ConicalMetric& metric, const SampledCurve& base, double w,
                                double w_s, double w_ss, double s) {
    auto pc = std::make_shared<SampledParamCurve>(base);
    ArcLengthCurve arc(pc);
    ArcJet j = arc.arc_jet(s);
    double k_sig = graph_curvature(j.k, j.k_s, w, w_s, w_ss);
    double one = 1.0 - j.k * w;
    double q = one * one + w_s * w_s;
    Vec2 xi = rot90(j.tau);
    Vec2 sigma = j.gamma + w * xi;
    Vec2 xi_sig = (one * xi - w_s * j.tau) / std::sqrt(q);
    double bracket = k_sig;
    for (const auto& cone : metric.cone_points()) {
        Vec2 rel = sigma - cone.position;
        double dist = rel.norm();
        double scale = 1.0 + cone.position.norm();
        if (dist < 1e-13 * scale) throw domain_error("graph point lies on a singular point");
        double r = (dist < kRhoSwitch * scale) ? -0.5 * k_sig : dot(rel, xi_sig) / (dist * dist);
        bracket -= cone.beta * r;
    }
    bracket -= dot(metric.log_smooth_part().gradient(sigma), xi_sig);
    return std::exp(-metric.log_density(sigma)) * bracket;
}

void validate(const FlowConfig& cfg) {
    if (cfg.cells < 32) throw input_error("flow grid needs at least 32 cells");
    if (!(cfg.cfl > 0.0 && cfg.cfl < 1.0)) throw input_error("cfl must lie in (0, 1)");
    if (!(cfg.dt_min < cfg.dt0)) throw input_error("dt_min must be below dt0");
    if (!(cfg.dt0 > 0.0)) throw input_error("dt0 must be positive");
    if (!(cfg.t_end > 0.0)) throw input_error("t_end must be positive");
    if (!(cfg.k_max > 0.0)) throw input_error("k_max must be positive");
    if (cfg.output_every == 0) throw input_error("output_every must be positive");
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::horizon: return "horizon";
        case StopReason::curvature_blowup: return "curvature-blowup";
        case StopReason::step_underflow: return "step-underflow";
        case StopReason::graph_validity: return "graph-validity";
        case StopReason::degeneracy: return "degeneracy";
        case StopReason::invariant_abort: return "invariant-abort";
    }
    return "unknown";
}

FlowSetup::FlowSetup(ConicalMetric m, std::shared_ptr<const ParamCurve> base, FlowConfig cfg)
    : metric(std::move(m)), config(cfg) {
    validate(config);
    if (!base) throw input_error("flow base curve is null");
    arc = std::make_shared<ArcLengthCurve>(base, std::max<std::size_t>(512, 2 * config.cells));
    L = arc->length();
    ArcJet j0 = arc->arc_jet(0.0);
    ArcJet j1 = arc->arc_jet(L);
    auto i0 = metric.singular_index_at(j0.gamma, 1e-9);
    auto i1 = metric.singular_index_at(j1.gamma, 1e-9);
    if (!i0 || !i1) throw input_error("flow base must start and end at cone points");
    anchor0 = *i0;
    anchor1 = *i1;
    loop = anchor0 == anchor1;
    const auto& cones = metric.cone_points();
    beta0 = cones[anchor0].beta;
    beta1 = cones[anchor1].beta;

    Vec2 lo = j0.gamma, hi = j0.gamma;
    for (int k = 0; k <= 128; ++k) {
        Vec2 g = arc->arc_jet(L * k / 128.0).gamma;
        lo.x = std::min(lo.x, g.x);
        lo.y = std::min(lo.y, g.y);
        hi.x = std::max(hi.x, g.x);
        hi.y = std::max(hi.y, g.y);
    }
    diam = (hi - lo).norm();
    if (!(diam > 0.0)) throw input_error("flow base is degenerate");

    n = config.cells;
    hx = 1.0 / static_cast<double>(n);
    x.resize(n);
    shat.resize(n);
    sphys.resize(n);
    jets.resize(n);
    d.resize(n);
    d1p.resize(n);
    d2p.resize(n);
    a.resize(n);
    b.resize(n);
    send_.resize(n);
    side_.resize(n);
    bd_anchor_.resize(n);
    rho_base_.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        x[i] = (static_cast<double>(i) + 0.5) * hx;
        SPoint sp = smap_eval(x[i], beta0, beta1);
        if (!(sp.s > 1e-300) || !(sp.send > 1e-300))
            throw input_error("grid map underflow; reduce cells or soften the cone orders");
        shat[i] = sp.s;
        send_[i] = sp.send;
        side_[i] = x[i] > 0.5;
        double arc_edge = side_[i] ? L * sp.send : L * sp.s; // arc distance to the near end
        sphys[i] = side_[i] ? L - L * sp.send : L * sp.s;
        jets[i] = arc->arc_jet(std::min(std::max(sphys[i], 0.0), L));

        double m_edge = std::min(sp.s, sp.send);
        double dd, dd1, dd2;
        cutoff_from_edge(m_edge, side_[i] ? -1.0 : 1.0, dd, dd1, dd2);
        d[i] = dd;
        d1p[i] = dd1 / L;
        d2p[i] = dd2 / (L * L);

        a[i] = 1.0 / (L * sp.s1);
        b[i] = -sp.s2 / (L * L * sp.s1 * sp.s1 * sp.s1);

        std::size_t aj = side_[i] ? anchor1 : anchor0;
        Vec2 p = cones[aj].position;
        double scale = 1.0 + p.norm();
        double bd_raw = (jets[i].gamma - p).norm();
        double bd = (bd_raw > 1e-12 * scale) ? bd_raw : arc_edge;
        bd_anchor_[i] = bd;
        if (bd < kRhoSwitch * scale) {
            double sign = side_[i] ? -1.0 : 1.0;
            rho_base_[i] = -0.5 * jets[i].k + sign * jets[i].k_s * bd / 6.0;
        } else {
            Vec2 rel = jets[i].gamma - p;
            rho_base_[i] = dot(rel, rot90(jets[i].tau)) / (bd * bd);
        }
    }
}

GraphFlowState initial_state(std::shared_ptr<const FlowSetup> setup) {
    GraphFlowState st;
    st.u.assign(setup->n, 0.0);
    st.setup = std::move(setup);
    return st;
}

RhsEval evaluate_rhs(const GraphFlowState& st) {
    const FlowSetup& fs = *st.setup;
    const std::size_t n = fs.n;
    const double hx = fs.hx;
    const auto& u = st.u;
    const auto& cones = fs.metric.cone_points();
    const BivariatePolynomial& hpoly = fs.metric.log_smooth_part();

    RhsEval ev;
    ev.u_t.assign(n, 0.0);
    ev.w.assign(n, 0.0);
    ev.w_s.assign(n, 0.0);
    ev.w_t.assign(n, 0.0);
    ev.k_sigma.assign(n, 0.0);
    ev.kg_sigma.assign(n, 0.0);
    ev.q.assign(n, 1.0);
    ev.one_minus_kw.assign(n, 1.0);
    ev.lambda_inv.assign(n, 1.0);
    ev.sigma.assign(n, Vec2{0.0, 0.0});

    std::vector<double> ux(n), uxx(n), wss(n);
    for (std::size_t i = 0; i < n; ++i) {
        double um = (i > 0) ? u[i - 1] : u[0];
        double up = (i + 1 < n) ? u[i + 1] : u[n - 1];
        ux[i] = (up - um) / (2.0 * hx);
        uxx[i] = (up - 2.0 * u[i] + um) / (hx * hx);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const ArcJet& j = fs.jets[i];
        double w = fs.d[i] * u[i];
        double us = fs.a[i] * ux[i];
        double uss = fs.a[i] * fs.a[i] * uxx[i] + fs.b[i] * ux[i];
        double ws = fs.d1p[i] * u[i] + fs.d[i] * us;
        double wss_i = fs.d2p[i] * u[i] + 2.0 * fs.d1p[i] * us + fs.d[i] * uss;
        double one = 1.0 - j.k * w;
        ev.w[i] = w;
        ev.w_s[i] = ws;
        ev.one_minus_kw[i] = one;
        wss[i] = wss_i;
        if (!(one > 0.5)) ev.graph_ok = false;
        if (!(one > 1e-9)) continue; // formula unusable; step will be rejected
        double q = one * one + ws * ws;
        ev.q[i] = q;
        ev.k_sigma[i] =
            (one * wss_i + 2.0 * j.k * ws * ws + j.k_s * ws * w + j.k * one * one) /
            (q * std::sqrt(q));
        ev.sigma[i] = j.gamma + w * rot90(j.tau);
    }

    // curvature slope along the graph curve, for the anchor expansion of rho
    std::vector<double> dk(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t il = (i > 0) ? i - 1 : i;
        std::size_t ir = (i + 1 < n) ? i + 1 : i;
        double ds;
        if (fs.shat[ir] < 0.75 && fs.shat[il] < 0.75)
            ds = fs.L * (fs.shat[ir] - fs.shat[il]);
        else
            ds = fs.L * (fs.send_[il] - fs.send_[ir]);
        if (ds > 0.0) dk[i] = (ev.k_sigma[ir] - ev.k_sigma[il]) / (ds * std::sqrt(ev.q[i]));
    }

    for (std::size_t i = 0; i < n; ++i) {
        double one = ev.one_minus_kw[i];
        if (!(one > 1e-9)) {
            ev.graph_ok = false;
            continue;
        }
        const ArcJet& j = fs.jets[i];
        double q = ev.q[i];
        double rq = std::sqrt(q);
        Vec2 xi = rot90(j.tau);
        Vec2 xi_sig = (one * xi - ev.w_s[i] * j.tau) / rq;
        Vec2 sigma = ev.sigma[i];
        std::size_t aj = fs.side_[i] ? fs.anchor1 : fs.anchor0;

        double bracket = ev.k_sigma[i];
        double phi = hpoly.value(sigma);
        bool bad_cell = false;
        for (std::size_t c = 0; c < cones.size(); ++c) {
            Vec2 p = cones[c].position;
            double scale = 1.0 + p.norm();
            double dist;
            if (c == aj)
                dist = graph_anchor_dist(fs.bd_anchor_[i], ev.w[i], fs.rho_base_[i]);
            else
                dist = (sigma - p).norm();

            if (c == aj && fs.bd_anchor_[i] < 1e-3 * fs.diam) {
                if (dist < kGuardTip * fs.bd_anchor_[i]) {
                    ev.degenerate = true;
                    bad_cell = true;
                    break;
                }
            } else if (dist < kGuardMid * fs.diam) {
                ev.degenerate = true;
                bad_cell = true;
                break;
            }

            double r;
            if (c == aj && dist < kRhoSwitch * scale) {
                double sign = fs.side_[i] ? -1.0 : 1.0;
                r = -0.5 * ev.k_sigma[i] + sign * dk[i] * dist / 6.0;
            } else {
                r = dot(sigma - p, xi_sig) / (dist * dist);
            }
            bracket -= cones[c].beta * r;
            phi += cones[c].beta * std::log(dist);
        }
        if (bad_cell) continue;
        bracket -= dot(hpoly.gradient(sigma), xi_sig);

        double linv = std::exp(-2.0 * phi);
        ev.lambda_inv[i] = linv;
        ev.kg_sigma[i] = std::exp(-phi) * bracket;
        double wt = linv * (rq / one) * bracket;
        ev.w_t[i] = wt;
        ev.u_t[i] = wt / fs.d[i];
    }

    for (std::size_t i = 0; i < n && ev.finite; ++i)
        if (!std::isfinite(ev.u_t[i]) || !std::isfinite(ev.w[i])) ev.finite = false;
    return ev;
}

std::vector<double> rhs(const GraphFlowState& st) {
    RhsEval ev = evaluate_rhs(st);
    if (!ev.finite) throw domain_error("flow right-hand side is not finite");
    if (!ev.graph_ok) throw domain_error("graph validity lost: 1 - k w <= 1/2");
    if (ev.degenerate) throw domain_error("curve too close to a singular point");
    return std::move(ev.u_t);
}

StepOutcome step(GraphFlowState& st) { return step(st, nullptr); }

StepOutcome step(GraphFlowState& st, RhsEval* accepted) {
    const FlowSetup& fs = *st.setup;
    const FlowConfig& cfg = fs.config;
    const std::size_t n = fs.n;

    RhsEval ev = evaluate_rhs(st);
    if (!ev.finite) return {false, StopReason::invariant_abort};
    if (!ev.graph_ok) return {false, StopReason::graph_validity};
    if (ev.degenerate) return {false, StopReason::degeneracy};

    TriOp A = structural_operator(fs, ev);
    std::vector<double> Au = apply_operator(A, st.u);
    std::vector<double> expl(n);
    double max_expl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        expl[i] = ev.u_t[i] - Au[i];
        max_expl = std::max(max_expl, std::abs(expl[i]));
    }

    double dt_stab = fs.hx * fs.hx / A.max_diff;
    double dt_expl = max_expl > 0.0 ? 1.0 / max_expl : std::numeric_limits<double>::infinity();
    double dt_new = cfg.cfl * std::min(dt_stab, dt_expl);
    double dt = (st.steps == 0 || st.dt <= 0.0) ? std::min(cfg.dt0, dt_new)
                                                : std::min(1.5 * st.dt, dt_new);
    if (st.t + dt > cfg.t_end) dt = cfg.t_end - st.t;
    if (!(dt > 0.0)) return {false, StopReason::step_underflow};

    std::vector<double> mlo(n), mdi(n), mup(n), rhsv(n);
    StopReason last = StopReason::step_underflow;
    for (int rejection = 0; rejection <= 20; ++rejection) {
        for (std::size_t i = 0; i < n; ++i) {
            mlo[i] = -dt * A.lo[i];
            mdi[i] = 1.0 - dt * A.di[i];
            mup[i] = -dt * A.up[i];
            rhsv[i] = st.u[i] + dt * expl[i];
        }
        solve_tridiagonal(mlo, mdi, mup, rhsv);

        GraphFlowState trial;
        trial.setup = st.setup;
        trial.u = rhsv;
        trial.t = st.t + dt;
        RhsEval tv = evaluate_rhs(trial);
        if (tv.finite && tv.graph_ok && !tv.degenerate) {
            st.u = std::move(trial.u);
            st.t += dt;
            st.dt = dt;
            ++st.steps;
            if (accepted) *accepted = std::move(tv);
            return {true, StopReason::horizon};
        }
        last = !tv.finite ? StopReason::step_underflow
                          : (!tv.graph_ok ? StopReason::graph_validity : StopReason::degeneracy);
        dt *= 0.5;
        if (dt < cfg.dt_min) return {false, last};
    }
    // rejection budget exhausted; report what kept failing
    return {false, last == StopReason::step_underflow ? StopReason::invariant_abort : last};
}

namespace {

// boundary-integral form of the enclosed area for a flat single-cone metric:
// the density |z-p|^(2 beta) has the radial potential (z-p)|z-p|^(2 beta)/(2 beta + 2)
double flat_cone_loop_area(const ConePoint& cone, const std::vector<Vec2>& poly, double h0) {
    double total = 0.0;
    double scale = std::exp(2.0 * h0);
    for (std::size_t e = 0; e + 1 < poly.size(); ++e) {
        Vec2 a = poly[e], b = poly[e + 1];
        double ra = (a - cone.position).norm();
        double rb = (b - cone.position).norm();
        // an edge with an endpoint at the cone runs radially, so its wedge
        // against dz vanishes identically; evaluating it would only integrate
        // rounding noise against the r^(2 beta) weight
        if (ra == 0.0 || rb == 0.0) continue;
        auto f = [&](double t) {
            Vec2 z = a + t * (b - a);
            Vec2 rel = z - cone.position;
            double r = rel.norm();
            if (r == 0.0) return 0.0;
            return wedge(rel, b - a) * std::pow(r, 2.0 * cone.beta);
        };
        QuadratureControl ctl{1e-9, 24};
        // noise floor for nearly radial interior edges, proportional to the
        // edge's own contribution scale so genuine values are never swallowed
        double edge_scale =
            (b - a).norm() * std::pow(0.5 * (ra + rb), 2.0 * cone.beta + 1.0);
        if (std::isfinite(edge_scale)) ctl.abs_tol = 1e-13 * edge_scale;
        total += adaptive_integrate(f, 0.0, 1.0, ctl);
    }
    return scale * total / (2.0 * cone.beta + 2.0);
}

} // namespace

DiagnosticsRecord diagnostics(const GraphFlowState& st, const RhsEval& ev) {
    const FlowSetup& fs = *st.setup;
    const std::size_t n = fs.n;
    const auto& cones = fs.metric.cone_points();
    const BivariatePolynomial& hpoly = fs.metric.log_smooth_part();
    DiagnosticsRecord rec;
    rec.t = st.t;

    // interpolate u over x, with quadratic endpoint extrapolation
    std::vector<double> xs(n + 2), us(n + 2);
    xs[0] = 0.0;
    us[0] = quad_extrapolate(fs.x[0], st.u[0], fs.x[1], st.u[1], fs.x[2], st.u[2], 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i + 1] = fs.x[i];
        us[i + 1] = st.u[i];
    }
    xs[n + 1] = 1.0;
    us[n + 1] = quad_extrapolate(fs.x[n - 1], st.u[n - 1], fs.x[n - 2], st.u[n - 2], fs.x[n - 3],
                                 st.u[n - 3], 1.0);
    CubicSpline uspline(xs, us, CubicSpline::EndCondition::natural);

    auto speed = [&](double xq) {
        SPoint sp = smap_eval(xq, fs.beta0, fs.beta1);
        bool right = xq > 0.5;
        double arc_edge = right ? fs.L * sp.send : fs.L * sp.s;
        double ell = right ? fs.L - fs.L * sp.send : fs.L * sp.s;
        ArcJet j = fs.arc->arc_jet(std::min(std::max(ell, 0.0), fs.L));
        double m_edge = std::min(sp.s, sp.send);
        double dd, dd1, dd2;
        cutoff_from_edge(m_edge, right ? -1.0 : 1.0, dd, dd1, dd2);
        double uq = uspline.value(xq);
        double uxq = uspline.derivative(xq);
        double w = dd * uq;
        double ws = (dd1 / fs.L) * uq + dd * uxq / (fs.L * sp.s1);
        double one = 1.0 - j.k * w;
        double q = one * one + ws * ws;
        Vec2 sigma = j.gamma + w * rot90(j.tau);

        std::size_t aj = right ? fs.anchor1 : fs.anchor0;
        Vec2 pa = cones[aj].position;
        double sa = 1.0 + pa.norm();
        double bd_raw = (j.gamma - pa).norm();
        double bd = (bd_raw > 1e-12 * sa) ? bd_raw : arc_edge;
        double rho_b;
        if (bd < kRhoSwitch * sa)
            rho_b = -0.5 * j.k + (right ? -1.0 : 1.0) * j.k_s * bd / 6.0;
        else
            rho_b = dot(j.gamma - pa, rot90(j.tau)) / (bd * bd);

        double phi = hpoly.value(sigma);
        for (std::size_t c = 0; c < cones.size(); ++c) {
            double dist = (c == aj) ? graph_anchor_dist(bd, w, rho_b)
                                    : (sigma - cones[c].position).norm();
            phi += cones[c].beta * std::log(dist);
        }
        return std::exp(phi) * std::sqrt(q) * fs.L * sp.s1;
    };
    rec.length = adaptive_integrate(speed, 0.0, 1.0, {1e-9, 32});

    rec.kg_min = ev.kg_sigma[0];
    rec.kg_max = ev.kg_sigma[0];
    rec.wt_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rec.kg_min = std::min(rec.kg_min, ev.kg_sigma[i]);
        rec.kg_max = std::max(rec.kg_max, ev.kg_sigma[i]);
        rec.wt_max = std::max(rec.wt_max, std::abs(ev.w_t[i]));
    }

    if (fs.loop) {
        std::vector<Vec2> poly;
        poly.reserve(n + 2);
        Vec2 pa = cones[fs.anchor0].position;
        poly.push_back(pa);
        for (std::size_t i = 0; i < n; ++i) poly.push_back(ev.sigma[i]);
        poly.push_back(pa);
        double shoelace = 0.0;
        for (std::size_t e = 0; e + 1 < poly.size(); ++e)
            shoelace += wedge(poly[e], poly[e + 1]);
        if (shoelace < 0.0) std::reverse(poly.begin() + 1, poly.end() - 1);
        bool h_constant = true;
        for (int ci = 0; ci <= hpoly.degree() && h_constant; ++ci)
            for (int cj = 0; ci + cj <= hpoly.degree(); ++cj)
                if (ci + cj > 0 && hpoly.coeff(ci, cj) != 0.0) {
                    h_constant = false;
                    break;
                }
        if (cones.size() == 1 && h_constant) {
            double h0 = hpoly.value(pa);
            rec.area = flat_cone_loop_area(cones[0], poly, h0);
        } else {
            poly.pop_back();
            rec.area = metric_area(fs.metric, poly, 1e-7);
        }

        double u0 = us[0], u1 = us[n + 1];
        double ws0 = u0 / fs.L;
        double ws1 = -u1 / fs.L;
        ArcJet ja = fs.arc->arc_jet(0.0);
        ArcJet jb = fs.arc->arc_jet(fs.L);
        Vec2 dir0 = ja.tau + ws0 * rot90(ja.tau);
        Vec2 dir1 = jb.tau + ws1 * rot90(jb.tau);
        double alpha = signed_angle(dir1, dir0);
        rec.alpha0 = alpha;
        rec.alpha1 = alpha;
    } else {
        rec.area = kNan;
        rec.alpha0 = kNan;
        rec.alpha1 = kNan;
    }

    if (cones.size() == 1) {
        const ConePoint& cone = cones[0];
        double dmax = 2.0 * st.t;
        for (std::size_t i = 0; i < n; ++i) {
            double dist = graph_anchor_dist(fs.bd_anchor_[i], ev.w[i], fs.rho_base_[i]);
            double val = std::exp(2.0 * hpoly.value(ev.sigma[i])) *
                             std::pow(dist, 2.0 + 2.0 * cone.beta) +
                         2.0 * st.t;
            dmax = std::max(dmax, val);
        }
        rec.d_max = dmax;
    } else {
        rec.d_max = kNan;
    }
    return rec;
}

Snapshot snapshot(const GraphFlowState& st, const RhsEval& ev) {
    const FlowSetup& fs = *st.setup;
    const auto& cones = fs.metric.cone_points();
    Snapshot snap;
    snap.t = st.t;
    snap.s_hat.reserve(fs.n + 2);
    snap.pos.reserve(fs.n + 2);
    snap.w.reserve(fs.n + 2);
    snap.kg.reserve(fs.n + 2);
    snap.s_hat.push_back(0.0);
    snap.pos.push_back(cones[fs.anchor0].position);
    snap.w.push_back(0.0);
    snap.kg.push_back(0.0);
    for (std::size_t i = 0; i < fs.n; ++i) {
        snap.s_hat.push_back(fs.shat[i]);
        snap.pos.push_back(ev.sigma[i]);
        snap.w.push_back(ev.w[i]);
        snap.kg.push_back(ev.kg_sigma[i]);
    }
    snap.s_hat.push_back(1.0);
    snap.pos.push_back(cones[fs.anchor1].position);
    snap.w.push_back(0.0);
    snap.kg.push_back(0.0);
    return snap;
}

Trajectory run(const ConicalMetric& metric, std::shared_ptr<const ParamCurve> base,
               const FlowConfig& config) {
    auto setup = std::make_shared<FlowSetup>(metric, base, config);
    GraphFlowState st = initial_state(setup);

    Trajectory tr;
    tr.base_length = setup->L;
    tr.loop = setup->loop;
    tr.anchor_cone0 = setup->anchor0;
    tr.anchor_cone1 = setup->anchor1;

    RhsEval ev = evaluate_rhs(st);
    tr.snapshots.push_back(snapshot(st, ev));
    tr.diagnostics.push_back(diagnostics(st, ev));
    StopReason reason = StopReason::horizon;
    if (!ev.finite || ev.degenerate) {
        reason = ev.degenerate ? StopReason::degeneracy : StopReason::invariant_abort;
    } else if (!ev.graph_ok) {
        reason = StopReason::graph_validity;
    } else {
        while (true) {
            if (st.t >= config.t_end - 1e-15 * config.t_end) {
                reason = StopReason::horizon;
                break;
            }
            RhsEval acc;
            StepOutcome out = step(st, &acc);
            if (!out.ok) {
                reason = out.reason;
                break;
            }
            double kg_abs = 0.0;
            for (double v : acc.kg_sigma) kg_abs = std::max(kg_abs, std::abs(v));
            bool blow = kg_abs > config.k_max;
            if (st.steps % config.output_every == 0 || blow) {
                tr.snapshots.push_back(snapshot(st, acc));
                tr.diagnostics.push_back(diagnostics(st, acc));
            }
            if (blow) {
                reason = StopReason::curvature_blowup;
                break;
            }
        }
    }
    tr.stop = reason;
    tr.final_time = st.t;
    tr.steps = st.steps;
    if (tr.snapshots.empty() || tr.snapshots.back().t != st.t) {
        RhsEval fv = evaluate_rhs(st);
        tr.snapshots.push_back(snapshot(st, fv));
        try {
            tr.diagnostics.push_back(diagnostics(st, fv));
        } catch (const std::exception&) {
            // terminal state can sit too close to a singular point to integrate
        }
    }
    return tr;
}

Trajectory run(const ConicalMetric& metric, const SampledCurve& base, const FlowConfig& config) {
    return run(metric, std::make_shared<SampledParamCurve>(base), config);
}

SampledCurve reconstruct(const GraphFlowState& st) {
    const FlowSetup& fs = *st.setup;
    RhsEval ev = evaluate_rhs(st);
    const auto& cones = fs.metric.cone_points();
    SampledCurve out;
    out.nodes.reserve(fs.n + 2);
    out.params.reserve(fs.n + 2);
    out.nodes.push_back(cones[fs.anchor0].position);
    out.params.push_back(0.0);
    for (std::size_t i = 0; i < fs.n; ++i) {
        out.nodes.push_back(ev.sigma[i]);
        out.params.push_back(fs.sphys[i]);
    }
    out.nodes.push_back(cones[fs.anchor1].position);
    out.params.push_back(fs.L);
    out.closed = false;
    out.anchor_start = fs.anchor0;
    out.anchor_end = fs.anchor1;
    return out;
}

std::vector<double> tangential_phi(const GraphFlowState& st) {
    const FlowSetup& fs = *st.setup;
    RhsEval ev = evaluate_rhs(st);
    std::vector<double> phi(fs.n, 0.0);
    for (std::size_t i = 0; i < fs.n; ++i) {
        double sqrt_lambda = 1.0 / std::sqrt(ev.lambda_inv[i]);
        phi[i] = sqrt_lambda * ev.w_s[i] * ev.w_t[i] / std::sqrt(ev.q[i]);
    }
    return phi;
}

} // namespace dcsf
