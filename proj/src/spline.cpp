#include "dcsf/spline.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace dcsf {

void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                       std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return;
    for (std::size_t i = 1; i < n; ++i) {
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

void solve_cyclic_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                              std::vector<double> upper, double corner_low, double corner_up,
                              std::vector<double>& rhs) {
    // Sherman-Morrison: perturb the diagonal, solve twice, correct.
    const std::size_t n = diag.size();
    if (n == 1) {
        rhs[0] /= (diag[0] + corner_low + corner_up);
        return;
    }
    const double gamma = -diag[0];
    std::vector<double> d = diag;
    d[0] -= gamma;
    d[n - 1] -= corner_low * corner_up / gamma;

    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = corner_low;

    std::vector<double> dl = lower, du = upper, dd = d;
    solve_tridiagonal(dl, dd, du, rhs);
    dl = lower;
    dd = d;
    du = upper;
    solve_tridiagonal(dl, dd, du, u);

    const double fact = (rhs[0] + corner_up * rhs[n - 1] / gamma) /
                        (1.0 + u[0] + corner_up * u[n - 1] / gamma);
    for (std::size_t i = 0; i < n; ++i) rhs[i] -= fact * u[i];
}

namespace {

double one_sided_slope(const std::vector<double>& ts, const std::vector<double>& ys, bool at_start) {
    // derivative of the cubic through the four nodes nearest the end
    const std::size_t n = ts.size();
    if (n < 2) throw input_error("spline needs at least two nodes");
    const std::size_t m = std::min<std::size_t>(4, n);
    std::vector<double> t(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t k = at_start ? i : n - m + i;
        t[i] = ts[k];
        y[i] = ys[k];
    }
    const double te = at_start ? t.front() : t.back();
    double slope = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        // derivative of the i-th Lagrange basis at te
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            double prod = 1.0;
            for (std::size_t k = 0; k < m; ++k) {
                if (k == i || k == j) continue;
                prod *= (te - t[k]) / (t[i] - t[k]);
            }
            sum += prod / (t[i] - t[j]);
        }
        slope += y[i] * sum;
    }
    return slope;
}

} // namespace

CubicSpline::CubicSpline(std::vector<double> ts, std::vector<double> ys, EndCondition bc,
                         double slope_a, double slope_b)
    : ts_(std::move(ts)), ys_(std::move(ys)) {
    const std::size_t n = ts_.size();
    if (n < 2 || ys_.size() != n) throw input_error("spline: bad node arrays");
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(ts_[i + 1] > ts_[i])) throw input_error("spline: knots must be strictly increasing");
    }
    m_.assign(n, 0.0);
    if (n == 2 && bc != EndCondition::clamped) return; // straight line

    std::vector<double> h(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) h[i] = ts_[i + 1] - ts_[i];

    if (bc == EndCondition::periodic) {
        if (std::abs(ys_.front() - ys_.back()) > 1e-12 * (1.0 + std::abs(ys_.front())))
            throw input_error("periodic spline: endpoint values differ");
        // unknowns m_0..m_{n-2}, with m_{n-1} = m_0
        const std::size_t m = n - 1;
        std::vector<double> lo(m), di(m), up(m), rhs(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double hm = (i == 0) ? h[m - 1] : h[i - 1];
            const double hp = h[i];
            const double ym = (i == 0) ? ys_[m - 1] : ys_[i - 1];
            const double yp = ys_[i + 1];
            lo[i] = hm / 6.0;
            di[i] = (hm + hp) / 3.0;
            up[i] = hp / 6.0;
            rhs[i] = (yp - ys_[i]) / hp - (ys_[i] - ym) / hm;
        }
        solve_cyclic_tridiagonal(lo, di, up, up[m - 1], lo[0], rhs);
        for (std::size_t i = 0; i < m; ++i) m_[i] = rhs[i];
        m_[n - 1] = m_[0];
        return;
    }

    std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0), rhs(n, 0.0);
    if (bc == EndCondition::natural) {
        di[0] = 1.0;
        di[n - 1] = 1.0;
    } else {
        di[0] = h[0] / 3.0;
        up[0] = h[0] / 6.0;
        rhs[0] = (ys_[1] - ys_[0]) / h[0] - slope_a;
        lo[n - 1] = h[n - 2] / 6.0;
        di[n - 1] = h[n - 2] / 3.0;
        rhs[n - 1] = slope_b - (ys_[n - 1] - ys_[n - 2]) / h[n - 2];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        lo[i] = h[i - 1] / 6.0;
        di[i] = (h[i - 1] + h[i]) / 3.0;
        up[i] = h[i] / 6.0;
        rhs[i] = (ys_[i + 1] - ys_[i]) / h[i] - (ys_[i] - ys_[i - 1]) / h[i - 1];
    }
    solve_tridiagonal(lo, di, up, rhs);
    m_ = rhs;
}

CubicSpline CubicSpline::with_estimated_slopes(std::vector<double> ts, std::vector<double> ys) {
    const double sa = one_sided_slope(ts, ys, true);
    const double sb = one_sided_slope(ts, ys, false);
    return CubicSpline(std::move(ts), std::move(ys), EndCondition::clamped, sa, sb);
}

std::size_t CubicSpline::segment(double t) const {
    // clamp outside queries onto the boundary segments (extrapolation is the
    // cubic of the nearest segment)
    const auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(ts_.begin(), it));
    if (i == 0) return 0;
    if (i >= ts_.size()) return ts_.size() - 2;
    return i - 1;
}

double CubicSpline::eval(double t, int order) const {
    const std::size_t i = segment(t);
    const double h = ts_[i + 1] - ts_[i];
    const double a = (ts_[i + 1] - t) / h;
    const double b = (t - ts_[i]) / h;
    switch (order) {
        case 0:
            return a * ys_[i] + b * ys_[i + 1] +
                   ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
        case 1:
            return (ys_[i + 1] - ys_[i]) / h +
                   (-(3.0 * a * a - 1.0) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
        case 2:
            return a * m_[i] + b * m_[i + 1];
        case 3:
            return (m_[i + 1] - m_[i]) / h;
        default:
            throw input_error("spline: derivative order out of range");
    }
}

} // namespace dcsf
