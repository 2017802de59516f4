#pragma once

#include <vector>

#include "hamavg/geometry.hpp"
#include "hamavg/hamiltonian.hpp"

namespace hamavg {

struct TraceOptions {
  double step = 0.01;         // nominal arc-length step
  double adapt_ref = 0.0;     // step used in the curvature bound; 0 -> step
  double grad_floor = 1e-8;
  double trace_tol = 1e-10;   // relative |H - m| after correction
  int max_steps = 400000;
};

// Closed polyline approximation of one connected level set C_i(m).
//
// Nodes are equally spaced in a smooth curvature-adapted parameter, so the
// periodic trapezoid rule over `arc_weights` is spectrally accurate.
struct LevelCurve {
  double level = 0.0;
  std::vector<Vec2> points;            // node i; the polyline closes back to points[0]
  std::vector<double> segment_lengths; // chord length from node i to i+1 (mod n)
  std::vector<double> arc_weights;     // quadrature weight (arc length) attached to node i
  std::vector<double> grad_norms;      // |grad H| at node i
  double closure_error = 0.0;          // distance between the integrated end point and points[0]
  bool closed = false;

  std::size_t size() const { return points.size(); }
  double length() const;
};

LevelCurve trace_level_curve(const HamiltonianSystem& sys, Vec2 seed, const TraceOptions& opts = {});

enum class Weight { dl, dl_over_gradH };

double contour_integral(const LevelCurve& curve, const ScalarField& f, Weight w);

// Averaged quantities on one level curve.
struct CoefficientSample {
  double m = 0.0;
  double T = 0.0;   // period, oint dl/|grad H|
  double S2 = 0.0;  // (1/T) oint |grad H| dl
  double B0 = 0.0;  // -(1/T) oint e.grad H dl/|grad H|
  double B1 = 0.0;  // (1/T) oint lap H dl/|grad H|
  double a = 0.0;   // oint |grad H| h dl
  double b = 0.0;   // oint h F.grad H dl/|grad H|
  double c = 0.0;   // oint div(hF) dl/|grad H|
  double d = 0.0;   // oint h dl/|grad H|
  double err_est = 0.0;  // max relative change between step and step/2 (0 if not computed)

  double P() const { return S2 * T; }  // oint |grad H| dl
};

CoefficientSample coefficient_sample(const HamiltonianSystem& sys, const LevelCurve& curve);

// Traces at `opts.step` and `opts.step / 2`, returns the finer sample with err_est set.
CoefficientSample coefficient_sample_refined(const HamiltonianSystem& sys, Vec2 seed, TraceOptions opts = {});

// Gradient-flow continuation dy/dH = grad H/|grad H|^2 from `start` to level `target`.
// Stays in the same edge of the orbit space as long as no critical point is crossed.
Vec2 flow_to_level(const HamiltonianSystem& sys, Vec2 start, double target, double grad_floor = 1e-8);

// Newton correction onto {H = m} along grad H.
Vec2 project_to_level(const HamiltonianSystem& sys, Vec2 x, double m, double rel_tol = 1e-13, int max_iter = 12);

struct DerivativeResiduals {
  double res1 = 0.0;   // |d/dm oint G.n dl - oint div G dl/|grad H||, G = hF
  double res2 = 0.0;   // same with G = h grad H
  double lhs1 = 0.0, rhs1 = 0.0;
  double lhs2 = 0.0, rhs2 = 0.0;
};

// Central-difference check of the level-derivative identities on one edge.
// `forbidden_levels` are critical values; straddling one raises EdgeStraddle.
DerivativeResiduals derivative_residuals(const HamiltonianSystem& sys, Vec2 edge_seed, double m, double dm,
                                         const std::vector<double>& forbidden_levels = {},
                                         const TraceOptions& opts = {});

}  // namespace hamavg
