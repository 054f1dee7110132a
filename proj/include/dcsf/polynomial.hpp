#pragma once

// Bivariate polynomial h(x, y) used as the smooth part of a conformal factor.
// Coefficients are stored densely, degree-indexed: for i = 0..deg, j = 0..deg-i
// the entry for x^i y^j, flattened in that loop order. Gradient and Laplacian
// are exact (coefficient manipulation, no differencing).

#include <cstddef>
#include <vector>

#include "dcsf/errors.hpp"
#include "dcsf/vec2.hpp"

namespace dcsf {

class BivariatePolynomial {
  public:
    BivariatePolynomial() : degree_(0), coeffs_(1, 0.0) {}

    BivariatePolynomial(int degree, std::vector<double> coeffs)
        : degree_(degree), coeffs_(std::move(coeffs)) {
        if (degree_ < 0) throw input_error("polynomial degree must be nonnegative");
        if (coeffs_.size() != term_count(degree_))
            throw input_error("polynomial coefficient count does not match degree");
    }

    static std::size_t term_count(int degree) {
        return static_cast<std::size_t>((degree + 1) * (degree + 2) / 2);
    }

    int degree() const { return degree_; }
    const std::vector<double>& coeffs() const { return coeffs_; }

    double coeff(int i, int j) const {
        if (i < 0 || j < 0 || i + j > degree_) return 0.0;
        return coeffs_[flat_index(i, j)];
    }

    double value(Vec2 p) const {
        double acc = 0.0;
        std::size_t k = 0;
        for (int i = 0; i <= degree_; ++i) {
            const double xi = ipow(p.x, i);
            for (int j = 0; j <= degree_ - i; ++j, ++k) acc += coeffs_[k] * xi * ipow(p.y, j);
        }
        return acc;
    }

    Vec2 gradient(Vec2 p) const {
        Vec2 g{0.0, 0.0};
        std::size_t k = 0;
        for (int i = 0; i <= degree_; ++i) {
            for (int j = 0; j <= degree_ - i; ++j, ++k) {
                const double c = coeffs_[k];
                if (c == 0.0) continue;
                if (i > 0) g.x += c * i * ipow(p.x, i - 1) * ipow(p.y, j);
                if (j > 0) g.y += c * j * ipow(p.x, i) * ipow(p.y, j - 1);
            }
        }
        return g;
    }

    double laplacian(Vec2 p) const {
        double acc = 0.0;
        std::size_t k = 0;
        for (int i = 0; i <= degree_; ++i) {
            for (int j = 0; j <= degree_ - i; ++j, ++k) {
                const double c = coeffs_[k];
                if (c == 0.0) continue;
                if (i >= 2) acc += c * i * (i - 1) * ipow(p.x, i - 2) * ipow(p.y, j);
                if (j >= 2) acc += c * j * (j - 1) * ipow(p.x, i) * ipow(p.y, j - 2);
            }
        }
        return acc;
    }

    // true when the Laplacian vanishes identically (coefficient-level test);
    // flat-metric preconditions go through this rather than sampling
    bool is_harmonic() const {
        // Laplacian coefficient for x^a y^b: (a+2)(a+1) c_{a+2,b} + (b+2)(b+1) c_{a,b+2}
        for (int a = 0; a + 2 <= degree_ || a <= degree_; ++a) {
            if (a > degree_) break;
            for (int b = 0; a + b <= degree_; ++b) {
                const double lap = (a + 2.0) * (a + 1.0) * coeff(a + 2, b) +
                                   (b + 2.0) * (b + 1.0) * coeff(a, b + 2);
                if (lap != 0.0) return false;
            }
        }
        return true;
    }

    bool is_zero() const {
        for (double c : coeffs_)
            if (c != 0.0) return false;
        return true;
    }

  private:
    std::size_t flat_index(int i, int j) const {
        // terms before row i: sum_{r<i} (degree - r + 1)
        std::size_t offset = 0;
        for (int r = 0; r < i; ++r) offset += static_cast<std::size_t>(degree_ - r + 1);
        return offset + static_cast<std::size_t>(j);
    }

    static double ipow(double x, int n) {
        double r = 1.0;
        for (int k = 0; k < n; ++k) r *= x;
        return r;
    }

    int degree_;
    std::vector<double> coeffs_;
};

} // namespace dcsf
