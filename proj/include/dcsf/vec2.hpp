#pragma once

#include <cmath>

namespace dcsf {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
inline Vec2 operator*(Vec2 a, double c) { return {c * a.x, c * a.y}; }
inline Vec2 operator/(Vec2 a, double c) { return {a.x / c, a.y / c}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
// z-component of the cross product; positive when b lies to the left of a
inline double wedge(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// counterclockwise rotation by pi/2: the left normal of a tangent vector
inline Vec2 rot90(Vec2 a) { return {-a.y, a.x}; }

inline Vec2 normalized(Vec2 a) {
    const double n = norm(a);
    return {a.x / n, a.y / n};
}

// signed angle from a to b in (-pi, pi]
inline double signed_angle(Vec2 a, Vec2 b) {
    return std::atan2(wedge(a, b), dot(a, b));
}

} // namespace dcsf
