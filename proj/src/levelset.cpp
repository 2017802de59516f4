#include "hamavg/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hamavg/errors.hpp"

namespace hamavg {

double LevelCurve::length() const {
  return std::accumulate(arc_weights.begin(), arc_weights.end(), 0.0);
}

Vec2 project_to_level(const HamiltonianSystem& sys, Vec2 x, double m, double rel_tol, int max_iter) {
  const double tol = rel_tol * std::max(1.0, std::abs(m));
  for (int it = 0; it < max_iter; ++it) {
    const double r = sys.H(x) - m;
    if (std::abs(r) <= tol) break;
    const Vec2 g = sys.grad_H(x);
    const double g2 = norm2(g);
    if (g2 == 0.0) break;
    x -= g * (r / g2);
  }
  return x;
}

namespace {

constexpr double kCurv = 0.05;

struct Tracer {
  const HamiltonianSystem& sys;
  double level;
  double ref;
  double grad_floor;
  double tol;

  // Smooth step-size factor: phi <= min(1, kCurv |grad H| / (|Hess| ref)).
  double phi(Vec2 x) const {
    const double g = norm(sys.grad_H(x));
    const double hs = sys.hessian_H(x).frobenius() + 1e-300;
    const double q = hs * ref / (kCurv * std::max(g, 1e-300));
    return 1.0 / std::sqrt(1.0 + q * q);
  }

  Vec2 velocity(Vec2 x) const {
    const Vec2 g = sys.grad_H(x);
    const double gn = norm(g);
    if (gn <= grad_floor) {
      std::ostringstream os;
      os << "level curve at m=" << level << " runs into a critical point near (" << x.x << ", " << x.y << ")";
      throw NoClosure(os.str());
    }
    const double hs = sys.hessian_H(x).frobenius() + 1e-300;
    const double q = hs * ref / (kCurv * gn);
    return rotate_ccw(g) * (1.0 / (gn * std::sqrt(1.0 + q * q)));
  }

  Vec2 rk4(Vec2 x, double h) const {
    const Vec2 k1 = velocity(x);
    const Vec2 k2 = velocity(x + k1 * (0.5 * h));
    const Vec2 k3 = velocity(x + k2 * (0.5 * h));
    const Vec2 k4 = velocity(x + k3 * h);
    const Vec2 y = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    return project_to_level(sys, y, level, tol * 0.01);
  }
};

// Root in [0,1] of the cubic Hermite interpolant through (g0, d0), (g1, d1) on
// an interval of length h; g0 < 0 <= g1.
double hermite_root(double g0, double g1, double d0, double d1, double h) {
  auto eval = [&](double s) {
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * g0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * g1 +
           (s3 - s2) * h * d1;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (eval(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

LevelCurve trace_level_curve(const HamiltonianSystem& sys, Vec2 seed, const TraceOptions& opts) {
  const Vec2 g_seed = sys.grad_H(seed);
  if (norm(g_seed) <= opts.grad_floor) {
    std::ostringstream os;
    os << "seed (" << seed.x << ", " << seed.y << ") is a critical point of " << sys.name();
    throw CriticalSeed(os.str());
  }
  const double m = sys.H(seed);
  Tracer tr{sys, m, opts.adapt_ref > 0 ? opts.adapt_ref : opts.step, opts.grad_floor, opts.trace_tol};
  seed = project_to_level(sys, seed, m);

  // Pass 1: find the parameter length of one revolution.
  const double h = opts.step;
  const Vec2 t0 = tr.velocity(seed);
  const double local = norm(t0) * h;
  Vec2 x = seed;
  double gx = 0.0;
  double period = -1.0;
  for (int k = 0; k < opts.max_steps; ++k) {
    const Vec2 y = tr.rk4(x, h);
    if (!sys.domain().contains(y)) {
      std::ostringstream os;
      os << "level curve m=" << m << " leaves the truncation domain (open level set?)";
      throw NoClosure(os.str());
    }
    const double gy = dot(y - seed, t0);
    if (k >= 3 && gx < 0.0 && gy >= 0.0 &&
        std::min(norm(x - seed), norm(y - seed)) <= 1.5 * local) {
      const double dx = dot(tr.velocity(x), t0);
      const double dy = dot(tr.velocity(y), t0);
      period = (k + hermite_root(gx, gy, dx, dy, h)) * h;
      break;
    }
    x = y;
    gx = gy;
  }
  if (period <= 0.0) {
    std::ostringstream os;
    os << "level curve m=" << m << " did not close within " << opts.max_steps << " steps";
    throw NoClosure(os.str());
  }

  // Pass 2: equispaced nodes in the adapted parameter.
  const int n = std::max(16, static_cast<int>(std::ceil(period / h)));
  const double dt = period / n;
  LevelCurve c;
  c.level = m;
  c.points.reserve(n);
  x = seed;
  for (int k = 0; k < n; ++k) {
    c.points.push_back(x);
    x = tr.rk4(x, dt);
  }
  c.closure_error = norm(x - seed);
  if (c.closure_error > 2.0 * h) {
    std::ostringstream os;
    os << "level curve m=" << m << " closure error " << c.closure_error << " exceeds tolerance";
    throw NoClosure(os.str());
  }
  c.closed = true;
  c.segment_lengths.resize(n);
  c.arc_weights.resize(n);
  c.grad_norms.resize(n);
  for (int k = 0; k < n; ++k) {
    c.segment_lengths[k] = norm(c.points[(k + 1) % n] - c.points[k]);
    c.arc_weights[k] = tr.phi(c.points[k]) * dt;
    c.grad_norms[k] = norm(sys.grad_H(c.points[k]));
  }
  return c;
}

double contour_integral(const LevelCurve& curve, const ScalarField& f, Weight w) {
  double s = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double v = f(curve.points[i]);
    if (v == 0.0) continue;
    s += v * (w == Weight::dl ? curve.arc_weights[i] : curve.arc_weights[i] / curve.grad_norms[i]);
  }
  return s;
}

CoefficientSample coefficient_sample(const HamiltonianSystem& sys, const LevelCurve& curve) {
  double T = 0, P = 0, Q = 0, R = 0, a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const Vec2 x = curve.points[i];
    const double w = curve.arc_weights[i];
    const double gn = curve.grad_norms[i];
    const Vec2 g = sys.grad_H(x);
    const double hv = sys.h(x);
    const double wl = w / gn;
    T += wl;
    P += w * gn;
    Q += sys.laplacian_H(x) * wl;
    R += dot(sys.drift(x), g) * wl;
    a += gn * hv * w;
    b += hv * dot(sys.field_F(x), g) * wl;
    c += sys.div_hF(x) * wl;
    d += hv * wl;
  }
  CoefficientSample s;
  s.m = curve.level;
  s.T = T;
  s.S2 = P / T;
  s.B0 = -R / T;
  s.B1 = Q / T;
  s.a = a;
  s.b = b;
  s.c = c;
  s.d = d;
  return s;
}

CoefficientSample coefficient_sample_refined(const HamiltonianSystem& sys, Vec2 seed, TraceOptions opts) {
  if (opts.adapt_ref <= 0.0) opts.adapt_ref = opts.step;
  const CoefficientSample coarse = coefficient_sample(sys, trace_level_curve(sys, seed, opts));
  opts.step *= 0.5;
  CoefficientSample fine = coefficient_sample(sys, trace_level_curve(sys, seed, opts));
  const double fa[] = {fine.T, fine.S2, fine.B0, fine.B1, fine.a, fine.b, fine.c, fine.d};
  const double ca[] = {coarse.T, coarse.S2, coarse.B0, coarse.B1, coarse.a, coarse.b, coarse.c, coarse.d};
  // Fields that vanish identically (b, c for F = 0) are measured against the curve's own scale.
  const double floor = 1e-8 * (fine.T + fine.a + fine.d + fine.S2);
  double err = 0.0;
  for (int i = 0; i < 8; ++i) err = std::max(err, std::abs(fa[i] - ca[i]) / (std::abs(fa[i]) + floor));
  fine.err_est = err;
  return fine;
}

Vec2 flow_to_level(const HamiltonianSystem& sys, Vec2 start, double target, double grad_floor) {
  const double max_disp = 0.02;
  Vec2 y = start;
  double Hy = sys.H(y);
  auto vel = [&](Vec2 p) {
    const Vec2 g = sys.grad_H(p);
    const double g2 = norm2(g);
    if (std::sqrt(g2) <= grad_floor) {
      std::ostringstream os;
      os << "gradient flow towards level " << target << " hit a critical point near (" << p.x << ", " << p.y << ")";
      throw CriticalSeed(os.str());
    }
    return g / g2;
  };
  for (int it = 0; it < 1000000 && Hy != target; ++it) {
    const double remaining = target - Hy;
    const double gn = norm(sys.grad_H(y));
    double dH = std::copysign(std::min(std::abs(remaining), max_disp * std::max(gn, grad_floor)), remaining);
    const Vec2 k1 = vel(y);
    const Vec2 k2 = vel(y + k1 * (0.5 * dH));
    const Vec2 k3 = vel(y + k2 * (0.5 * dH));
    const Vec2 k4 = vel(y + k3 * dH);
    y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dH / 6.0);
    if (std::abs(remaining) <= std::abs(dH)) {
      y = project_to_level(sys, y, target);
      break;
    }
    y = project_to_level(sys, y, Hy + dH);
    Hy = sys.H(y);
  }
  return project_to_level(sys, y, target);
}

DerivativeResiduals derivative_residuals(const HamiltonianSystem& sys, Vec2 edge_seed, double m, double dm,
                                         const std::vector<double>& forbidden_levels, const TraceOptions& opts) {
  for (double c : forbidden_levels) {
    if (c >= m - dm && c <= m + dm) {
      std::ostringstream os;
      os << "critical value " << c << " lies in [" << m - dm << ", " << m + dm << "]";
      throw EdgeStraddle(os.str());
    }
  }
  const Vec2 y0 = flow_to_level(sys, edge_seed, m);
  const Vec2 yp = flow_to_level(sys, y0, m + dm);
  const Vec2 ym = flow_to_level(sys, y0, m - dm);

  // G = hF against n = grad H/|grad H|.
  auto flux_hF = [&](Vec2 x) {
    const Vec2 g = sys.grad_H(x);
    return sys.h(x) * dot(sys.field_F(x), g) / norm(g);
  };
  auto div_hF = [&](Vec2 x) { return sys.div_hF(x); };
  // G = h grad H.
  auto h_grad = [&](Vec2 x) { return sys.h(x) * norm(sys.grad_H(x)); };
  auto div_h_grad = [&](Vec2 x) { return dot(sys.grad_h(x), sys.grad_H(x)) + sys.h(x) * sys.laplacian_H(x); };

  const LevelCurve cp = trace_level_curve(sys, yp, opts);
  const LevelCurve cm = trace_level_curve(sys, ym, opts);
  const LevelCurve c0 = trace_level_curve(sys, y0, opts);

  DerivativeResiduals r;
  r.lhs1 = (contour_integral(cp, flux_hF, Weight::dl) - contour_integral(cm, flux_hF, Weight::dl)) / (2 * dm);
  r.rhs1 = contour_integral(c0, div_hF, Weight::dl_over_gradH);
  r.lhs2 = (contour_integral(cp, h_grad, Weight::dl) - contour_integral(cm, h_grad, Weight::dl)) / (2 * dm);
  r.rhs2 = contour_integral(c0, div_h_grad, Weight::dl_over_gradH);
  r.res1 = std::abs(r.lhs1 - r.rhs1);
  r.res2 = std::abs(r.lhs2 - r.rhs2);
  return r;
}

}  // namespace hamavg
