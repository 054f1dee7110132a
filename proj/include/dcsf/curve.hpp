#pragma once

// Planar curve representations and the pointwise quantities the rest of the
// code consumes: curvature, the normal quotient rho, and scalar geodesic
// curvature in a conical metric. Sampled curves get their derivatives from
// cubic splines; analytic fixtures plug in through the same interface with
// exact jets.

#include <memory>
#include <optional>
#include <vector>

#include "dcsf/errors.hpp"
#include "dcsf/metric.hpp"
#include "dcsf/spline.hpp"
#include "dcsf/vec2.hpp"

namespace dcsf {

// position and first three parameter derivatives at a point
struct CurveJet {
    Vec2 p;
    Vec2 d1;
    Vec2 d2;
    Vec2 d3;
};

class ParamCurve {
  public:
    virtual ~ParamCurve() = default;
    virtual CurveJet jet(double t) const = 0;
    virtual double t_begin() const = 0;
    virtual double t_end() const = 0;
};

struct SampledCurve {
    std::vector<Vec2> nodes;
    std::vector<double> params; // strictly increasing
    bool closed = false;
    // indices into the metric's cone point list when an endpoint is pinned
    std::optional<std::size_t> anchor_start;
    std::optional<std::size_t> anchor_end;
};

// jet helpers (throw domain_error when |d1| is degenerate)
double jet_speed(const CurveJet& j);
double jet_curvature(const CurveJet& j);
double jet_curvature_derivative_arc(const CurveJet& j); // dk/ds, s = euclidean arc length
Vec2 jet_tangent(const CurveJet& j);
Vec2 jet_left_normal(const CurveJet& j);

// Uniform evaluation front end: either splines through a SampledCurve or an
// analytic curve plus the anchoring metadata.
class CurveEval {
  public:
    explicit CurveEval(const SampledCurve& c);
    CurveEval(std::shared_ptr<const ParamCurve> curve, bool closed,
              std::optional<std::size_t> anchor_start = std::nullopt,
              std::optional<std::size_t> anchor_end = std::nullopt);

    CurveJet jet(double t) const;
    double t_begin() const { return t0_; }
    double t_end() const { return t1_; }
    bool closed() const { return closed_; }
    std::optional<std::size_t> anchor_start() const { return anchor_start_; }
    std::optional<std::size_t> anchor_end() const { return anchor_end_; }

  private:
    std::shared_ptr<const ParamCurve> analytic_;
    std::optional<CubicSpline> sx_, sy_;
    double t0_ = 0.0, t1_ = 1.0;
    bool closed_ = false;
    std::optional<std::size_t> anchor_start_, anchor_end_;
};

double curvature(const CurveEval& c, double s);
double curvature(const SampledCurve& c, double s);

// rho = <gamma - p, xi> / |gamma - p|^2, extended through anchored endpoints
// by the one-sided limit -k/2 (with the first-order arc correction applied on
// the approach, where the raw quotient cancels catastrophically)
double rho(const CurveEval& c, double s, const Vec2& p);
double rho(const SampledCurve& c, double s, const Vec2& p);

// scalar geodesic curvature lambda^{-1/2} (k - sum_j beta_j rho_j - <Dh, xi>);
// exactly zero at anchored endpoints
double geodesic_curvature(const ConicalMetric& metric, const CurveEval& c, double s);
double geodesic_curvature(const ConicalMetric& metric, const SampledCurve& c, double s);

enum class ReparamMode { euclidean, metric };

// Resample so nodes are uniform in (euclidean or metric) arc length; output
// params are the cumulative arc length. Endpoints are preserved exactly.
SampledCurve arclength_reparam(const SampledCurve& c, ReparamMode mode,
                               const ConicalMetric* metric = nullptr,
                               std::size_t n_out = 0);

// Arc-length view of an analytic curve: unit-speed jets for the flow solver.
struct ArcJet {
    Vec2 gamma;
    Vec2 tau; // unit tangent
    double k;
    double k_s; // dk/ds
};

class ArcLengthCurve {
  public:
    explicit ArcLengthCurve(std::shared_ptr<const ParamCurve> curve, std::size_t table_size = 512);

    double length() const { return lengths_.back(); }
    double param_of_arc(double ell) const;
    ArcJet arc_jet(double ell) const;
    const ParamCurve& base() const { return *curve_; }

  private:
    std::shared_ptr<const ParamCurve> curve_;
    std::vector<double> params_;
    std::vector<double> lengths_;
};

// total metric length (euclidean when metric is null); anchored or interior
// cone-point crossings are handled with power-law end substitutions
double curve_length(const SampledCurve& c, ReparamMode mode, const ConicalMetric* metric);

} // namespace dcsf
