#pragma once

// Truncated Taylor-series arithmetic (degree 3) in one variable. Analytic curve
// fixtures are written once against this scalar type and get exact position,
// tangent, curvature and curvature-derivative jets for free, instead of
// hand-derived third derivatives for every fixture.

#include <array>
#include <cmath>

namespace dcsf {

struct Taylor3 {
    // coefficients of f(t0 + e) = a0 + a1 e + a2 e^2 + a3 e^3 + O(e^4)
    std::array<double, 4> a{0.0, 0.0, 0.0, 0.0};

    Taylor3() = default;
    explicit Taylor3(double c) : a{c, 0.0, 0.0, 0.0} {}
    Taylor3(double c0, double c1, double c2, double c3) : a{c0, c1, c2, c3} {}

    static Taylor3 variable(double t0) { return {t0, 1.0, 0.0, 0.0}; }

    double value() const { return a[0]; }
    double d1() const { return a[1]; }
    double d2() const { return 2.0 * a[2]; }
    double d3() const { return 6.0 * a[3]; }
};

inline Taylor3 operator+(const Taylor3& u, const Taylor3& v) {
    return {u.a[0] + v.a[0], u.a[1] + v.a[1], u.a[2] + v.a[2], u.a[3] + v.a[3]};
}
inline Taylor3 operator-(const Taylor3& u, const Taylor3& v) {
    return {u.a[0] - v.a[0], u.a[1] - v.a[1], u.a[2] - v.a[2], u.a[3] - v.a[3]};
}
inline Taylor3 operator-(const Taylor3& u) { return {-u.a[0], -u.a[1], -u.a[2], -u.a[3]}; }
inline Taylor3 operator+(const Taylor3& u, double c) { return {u.a[0] + c, u.a[1], u.a[2], u.a[3]}; }
inline Taylor3 operator+(double c, const Taylor3& u) { return u + c; }
inline Taylor3 operator-(const Taylor3& u, double c) { return u + (-c); }
inline Taylor3 operator-(double c, const Taylor3& u) { return (-u) + c; }

inline Taylor3 operator*(const Taylor3& u, const Taylor3& v) {
    Taylor3 w(0.0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; i + j < 4; ++j) w.a[i + j] += u.a[i] * v.a[j];
    return w;
}
inline Taylor3 operator*(double c, const Taylor3& u) { return {c * u.a[0], c * u.a[1], c * u.a[2], c * u.a[3]}; }
inline Taylor3 operator*(const Taylor3& u, double c) { return c * u; }

// compose an analytic f with the series u, given f and its first three
// derivatives at the base value u.a[0]
inline Taylor3 compose(double f0, double f1, double f2, double f3, const Taylor3& u) {
    const Taylor3 w{0.0, u.a[1], u.a[2], u.a[3]}; // nilpotent part
    const Taylor3 w2 = w * w;
    const Taylor3 w3 = w2 * w;
    return Taylor3(f0) + f1 * w + (f2 / 2.0) * w2 + (f3 / 6.0) * w3;
}

inline Taylor3 sin(const Taylor3& u) {
    const double s = std::sin(u.a[0]), c = std::cos(u.a[0]);
    return compose(s, c, -s, -c, u);
}
inline Taylor3 cos(const Taylor3& u) {
    const double s = std::sin(u.a[0]), c = std::cos(u.a[0]);
    return compose(c, -s, -c, s, u);
}
inline Taylor3 exp(const Taylor3& u) {
    const double e = std::exp(u.a[0]);
    return compose(e, e, e, e, u);
}
inline Taylor3 inv(const Taylor3& u) {
    const double x = u.a[0];
    return compose(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x), -6.0 / (x * x * x * x), u);
}
inline Taylor3 operator/(const Taylor3& u, const Taylor3& v) { return u * inv(v); }
inline Taylor3 operator/(double c, const Taylor3& v) { return c * inv(v); }
inline Taylor3 operator/(const Taylor3& u, double c) { return (1.0 / c) * u; }

inline Taylor3 sqrt(const Taylor3& u) {
    const double r = std::sqrt(u.a[0]);
    return compose(r, 0.5 / r, -0.25 / (r * u.a[0]), 0.375 / (r * u.a[0] * u.a[0]), u);
}
inline Taylor3 pow(const Taylor3& u, double p) {
    const double x = u.a[0];
    const double f0 = std::pow(x, p);
    return compose(f0, p * f0 / x, p * (p - 1.0) * f0 / (x * x),
                   p * (p - 1.0) * (p - 2.0) * f0 / (x * x * x), u);
}
inline Taylor3 log(const Taylor3& u) {
    const double x = u.a[0];
    return compose(std::log(x), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x), u);
}

} // namespace dcsf
