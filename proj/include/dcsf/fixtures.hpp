#pragma once

// Analytic test curves. All jets come from truncated Taylor arithmetic so the
// derivatives are exact to machine precision.

#include <memory>

#include "dcsf/curve.hpp"

namespace dcsf {

// gamma(s) = (1 + cos^2 s)^{-1} (-sin s, sin s cos s); the full parameter
// range [0, 2pi] traces two mirror lobes through the origin, [0, pi] is the
// single tear-drop loop used as the flow base
class TeardropCurve final : public ParamCurve {
  public:
    explicit TeardropCurve(bool single_lobe = false) : single_lobe_(single_lobe) {}
    CurveJet jet(double t) const override;
    double t_begin() const override { return 0.0; }
    double t_end() const override;

  private:
    bool single_lobe_;
};

class CircleCurve final : public ParamCurve {
  public:
    CircleCurve(Vec2 center, double radius, bool counterclockwise = true, double angle0 = 0.0,
                double angle1 = 0.0);
    CurveJet jet(double t) const override;
    double t_begin() const override { return a0_; }
    double t_end() const override { return a1_; }

  private:
    Vec2 center_;
    double radius_;
    double orient_;
    double a0_, a1_;
};

class SegmentCurve final : public ParamCurve {
  public:
    SegmentCurve(Vec2 a, Vec2 b) : a_(a), b_(b) {}
    CurveJet jet(double t) const override {
        return {a_ + (b_ - a_) * t, b_ - a_, {0.0, 0.0}, {0.0, 0.0}};
    }
    double t_begin() const override { return 0.0; }
    double t_end() const override { return 1.0; }

  private:
    Vec2 a_, b_;
};

// smooth arc from the origin back to the origin, used with its point
// reflection to assemble a C^1 figure eight: (c sin(2 pi t) sin^2(pi t), sin(pi t))
class DropletCurve final : public ParamCurve {
  public:
    explicit DropletCurve(double c = 0.35) : c_(c) {}
    CurveJet jet(double t) const override;
    double t_begin() const override { return 0.0; }
    double t_end() const override { return 1.0; }

  private:
    double c_;
};

// uniform parameter samples of the full tear drop, anchored at the origin
SampledCurve tear_drop_fixture(std::size_t resolution);

// sampled single lobe [0, pi], anchored at the origin at both ends
SampledCurve tear_drop_lobe_fixture(std::size_t resolution);

SampledCurve circle_fixture(Vec2 center, double radius, std::size_t resolution,
                            bool counterclockwise = true);

SampledCurve segment_fixture(Vec2 a, Vec2 b, std::size_t resolution);

} // namespace dcsf
