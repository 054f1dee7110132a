#pragma once

// Graph-over-base solver for the degenerate curve shortening flow. The moving
// curve is sigma = gamma + w xi over a fixed base gamma anchored at cone
// points; w = d(s) u with a cutoff d vanishing linearly at the ends, and u
// lives on a cell-centered grid in a desingularized coordinate x in (0,1) in
// which the leading operator is uniformly parabolic. Time stepping is IMEX:
// the frozen second-order operator (including the singular drift it induces)
// goes implicit via a tridiagonal solve, everything else explicit.

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "dcsf/curve.hpp"
#include "dcsf/metric.hpp"

namespace dcsf {

// cutoff: equals s on [0,1/4], 1-s on [3/4,1], C^2 blend >= 1/4 between
double d_cutoff(double s);
double d_cutoff_d1(double s);
double d_cutoff_d2(double s);

// Desingularized coordinate: |s-j|^(1+beta_j) = (1+beta_j)|x-j| near each
// endpoint j, quintic C^2 blend in the middle, monotone. s_of_x is the
// analytic direction; x_of_s inverts it numerically in the blend.
double s_of_x(double x, double beta0, double beta1);
double ds_dx(double x, double beta0, double beta1);
double d2s_dx2(double x, double beta0, double beta1);
double x_of_s(double s, double beta0, double beta1);

// curvature of sigma = gamma + w xi from base curvature data at one point
double graph_curvature(double k, double k_s, double w, double w_s, double w_ss);
double graph_curvature(const SampledCurve& base, double w, double w_s, double w_ss, double s);

// geodesic curvature of the graph curve in the metric (pointwise form; near
// an anchor the rho quotient falls back to its one-sided limit)
double graph_geodesic_curvature(const ConicalMetric& metric, const SampledCurve& base, double w,
                                double w_s, double w_ss, double s);

struct FlowConfig {
    std::size_t cells = 256;
    double dt0 = 1e-5;      // first-step cap
    double cfl = 0.4;       // safety factor for the adaptive step
    double t_end = 0.01;
    double k_max = 1e6;     // curvature blow-up threshold
    double dt_min = 1e-14;
    std::size_t output_every = 50; // steps between diagnostic emissions
};

void validate(const FlowConfig& cfg);

enum class StopReason {
    horizon,          // reached t_end
    curvature_blowup, // max |k_g| exceeded k_max
    step_underflow,   // dt fell below dt_min
    graph_validity,   // 1 - k w <= 1/2 could not be restored by halving
    degeneracy,       // curve approached a singular point off the anchors
    invariant_abort,  // too many consecutive step rejections
};

const char* to_string(StopReason r);

struct DiagnosticsRecord {
    double t = 0.0;
    double length = 0.0; // metric length of sigma
    double area = 0.0;   // enclosed metric area (loops), NaN otherwise
    double kg_min = 0.0;
    double kg_max = 0.0;
    double wt_max = 0.0;
    double alpha0 = 0.0; // exterior angle at the anchor junction (loops), NaN otherwise
    double alpha1 = 0.0;
    double d_max = 0.0;  // max_s lambda |sigma - p|^2 + 2t (single-cone runs), NaN otherwise
};

// immutable per-run precomputation: grid, base jets, cutoff and map factors
class FlowSetup {
  public:
    FlowSetup(ConicalMetric metric, std::shared_ptr<const ParamCurve> base, FlowConfig config);

    ConicalMetric metric;
    FlowConfig config;
    std::shared_ptr<const ArcLengthCurve> arc;
    double L = 0.0; // euclidean arc length of the base
    std::size_t anchor0 = 0, anchor1 = 0; // cone indices of the two endpoints
    double beta0 = 0.0, beta1 = 0.0;
    bool loop = false; // both endpoints at the same cone point
    double diam = 0.0; // bounding-box diagonal of the base

    std::size_t n = 0;
    double hx = 0.0;
    std::vector<double> x, shat, sphys;
    std::vector<ArcJet> jets; // base jets at sphys
    std::vector<double> d, d1p, d2p; // cutoff and derivatives w.r.t. physical s
    std::vector<double> a, b;        // dx/ds_phys and d^2x/ds_phys^2 at cells
    std::vector<double> send_;       // 1 - shat, carried separately for the right tip
    std::vector<char> side_;         // 1 when the cell belongs to the right half
    std::vector<double> bd_anchor_;  // robust base distance to the near-side anchor
    std::vector<double> rho_base_;   // base normal quotient toward that anchor
};

struct GraphFlowState {
    std::shared_ptr<const FlowSetup> setup;
    std::vector<double> u;
    double t = 0.0;
    double dt = 0.0;
    std::size_t steps = 0;
};

GraphFlowState initial_state(std::shared_ptr<const FlowSetup> setup);

// full right-hand side evaluation with the byproducts diagnostics reuse
struct RhsEval {
    std::vector<double> u_t;
    std::vector<double> w, w_s, w_t;
    std::vector<double> k_sigma;
    std::vector<double> kg_sigma; // geodesic curvature of sigma at cells
    std::vector<double> q;        // (1-kw)^2 + w_s^2
    std::vector<double> one_minus_kw;
    std::vector<double> lambda_inv; // 1/lambda at sigma
    std::vector<Vec2> sigma;
    bool graph_ok = true;   // 1 - k w > 1/2 everywhere
    bool degenerate = false; // sigma too close to a singular point off-anchor
    bool finite = true;
};

RhsEval evaluate_rhs(const GraphFlowState& state);

// u_t only; throws domain_error when the state violates graph validity or
// the degeneracy guard
std::vector<double> rhs(const GraphFlowState& state);

// one IMEX step; returns false when the step had to be rejected more than 20
// times or dt underflowed (reason set accordingly)
struct StepOutcome {
    bool ok = true;
    StopReason reason = StopReason::horizon;
};
StepOutcome step(GraphFlowState& state);
StepOutcome step(GraphFlowState& state, RhsEval* accepted);

struct Snapshot {
    double t = 0.0;
    std::vector<double> s_hat; // includes the endpoints 0 and 1
    std::vector<Vec2> pos;
    std::vector<double> w;
    std::vector<double> kg;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    std::vector<DiagnosticsRecord> diagnostics;
    StopReason stop = StopReason::horizon;
    double final_time = 0.0;
    std::size_t steps = 0;
    double base_length = 0.0;
    bool loop = false;
    std::optional<std::size_t> anchor_cone0, anchor_cone1;
};

Trajectory run(const ConicalMetric& metric, std::shared_ptr<const ParamCurve> base,
               const FlowConfig& config);
Trajectory run(const ConicalMetric& metric, const SampledCurve& base, const FlowConfig& config);

SampledCurve reconstruct(const GraphFlowState& state);

// tangential speed Phi = lambda^{1/2} w_s w_t / sqrt(Q) at the cells
std::vector<double> tangential_phi(const GraphFlowState& state);

DiagnosticsRecord diagnostics(const GraphFlowState& state, const RhsEval& eval);
Snapshot snapshot(const GraphFlowState& state, const RhsEval& eval);

} // namespace dcsf
