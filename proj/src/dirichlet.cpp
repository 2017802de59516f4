#include "hamavg/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hamavg/errors.hpp"

namespace hamavg {

TestFunction2D gaussian_bump(Vec2 center, double sigma, double amplitude) {
  const double s2 = sigma * sigma;
  TestFunction2D f;
  f.support = {center.x - 8 * sigma, center.x + 8 * sigma, center.y - 8 * sigma, center.y + 8 * sigma};
  const Rect box = f.support;
  f.value = [=](Vec2 x) {
    if (!box.contains(x)) return 0.0;
    return amplitude * std::exp(-norm2(x - center) / (2 * s2));
  };
  f.grad = [=](Vec2 x) {
    if (!box.contains(x)) return Vec2{};
    const double v = amplitude * std::exp(-norm2(x - center) / (2 * s2));
    return (x - center) * (-v / s2);
  };
  f.laplacian = [=](Vec2 x) {
    if (!box.contains(x)) return 0.0;
    const double r2 = norm2(x - center);
    return amplitude * std::exp(-r2 / (2 * s2)) * (r2 / (s2 * s2) - 2.0 / s2);
  };
  return f;
}

TestFunction2D zero_function() {
  TestFunction2D f;
  f.support = {0, 0, 0, 0};
  f.value = [](Vec2) { return 0.0; };
  f.grad = [](Vec2) { return Vec2{}; };
  f.laplacian = [](Vec2) { return 0.0; };
  return f;
}

namespace {

bool intersect(const Rect& a, const Rect& b, Rect& out) {
  out = {std::max(a.x0, b.x0), std::min(a.x1, b.x1), std::max(a.y0, b.y0), std::min(a.y1, b.y1)};
  return out.x1 > out.x0 && out.y1 > out.y0;
}

struct Sums {
  double sym = 0, anti = 0, gen = 0;  // gen: int (L f) g h
  double abs = 0;
};

Sums trapezoid(const HamiltonianSystem& sys, const TestFunction2D& f, const TestFunction2D& g, double alpha,
               const Rect& box, int n) {
  Sums s;
  const double hx = box.width() / n, hy = box.height() / n;
  const double eps = sys.epsilon();
  for (int j = 0; j <= n; ++j) {
    const double wy = (j == 0 || j == n) ? 0.5 : 1.0;
    for (int i = 0; i <= n; ++i) {
      const double w = wy * ((i == 0 || i == n) ? 0.5 : 1.0) * hx * hy;
      const Vec2 x{box.x0 + i * hx, box.y0 + j * hy};
      const double fv = f.value(x), gv = g.value(x);
      const Vec2 df = f.grad(x), dg = g.grad(x);
      if (fv == 0.0 && gv == 0.0 && norm2(df) == 0.0 && norm2(dg) == 0.0) continue;
      const double h = sys.h(x);
      const Vec2 gH = sys.grad_H(x);
      const Vec2 AgH = rotate_ccw(gH);
      const Vec2 F = sys.field_F(x);
      const Vec2 mix = df * gv - dg * fv;
      const double t1 = eps * h * dot(df, dg);
      const double t2 = -0.5 * sys.div_hF(x) * fv * gv;
      const double t3 = 0.5 / alpha * dot(sys.grad_h(x), AgH) * fv * gv;
      const double a1 = -0.5 / alpha * h * dot(AgH, mix);
      const double a2 = 0.5 * h * dot(F, mix);
      const double Lf = dot(AgH, df) / alpha - dot(sys.drift(x), df) + eps * f.laplacian(x);
      s.sym += w * (t1 + t2 + t3);
      s.anti += w * (a1 + a2);
      s.gen += w * Lf * gv * h;
      s.abs += w * (std::abs(t1) + std::abs(t2) + std::abs(t3) + std::abs(a1) + std::abs(a2) + std::abs(Lf * gv * h));
    }
  }
  return s;
}

}  // namespace

FormValue form_E_alpha(const HamiltonianSystem& sys, const TestFunction2D& f, const TestFunction2D& g, double alpha,
                       int n_grid) {
  FormValue out;
  Rect box, tmp;
  if (!intersect(f.support, g.support, tmp) || !intersect(tmp, sys.domain(), box)) return out;
  const Sums fine = trapezoid(sys, f, g, alpha, box, n_grid);
  const Sums coarse = trapezoid(sys, f, g, alpha, box, n_grid / 2);
  out.sym = fine.sym;
  out.antisym = fine.anti;
  out.err_est = std::abs((fine.sym + fine.anti) - (coarse.sym + coarse.anti)) +
                64 * std::numeric_limits<double>::epsilon() * fine.abs;
  return out;
}

IbpResult ibp_residual(const HamiltonianSystem& sys, const TestFunction2D& f, const TestFunction2D& g, double alpha,
                       int n_grid) {
  IbpResult r;
  Rect box, tmp;
  if (!intersect(f.support, g.support, tmp) || !intersect(tmp, sys.domain(), box)) return r;
  const Sums fine = trapezoid(sys, f, g, alpha, box, n_grid);
  const Sums coarse = trapezoid(sys, f, g, alpha, box, n_grid / 2);
  r.form = fine.sym + fine.anti;
  r.residual = std::abs(r.form + fine.gen);
  r.err_est = std::abs(r.form - (coarse.sym + coarse.anti)) + std::abs(fine.gen - coarse.gen) +
              64 * std::numeric_limits<double>::epsilon() * fine.abs;
  return r;
}

double GraphTestFunction::value(const GraphPoint& p) const {
  if (p.is_vertex()) {
    auto it = vertex_values.find(p.vertex);
    return it == vertex_values.end() ? 0.0 : it->second;
  }
  auto it = pieces.find(p.edge);
  if (it == pieces.end() || p.m < it->second.lo || p.m > it->second.hi) return 0.0;
  return it->second.u(p.m);
}

double GraphTestFunction::derivative(int edge, double m) const {
  auto it = pieces.find(edge);
  if (it == pieces.end() || m < it->second.lo || m > it->second.hi) return 0.0;
  return it->second.du(m);
}

GraphTestFunction::Piece gaussian_in_m(double center, double sigma, double amplitude) {
  const double s2 = sigma * sigma;
  GraphTestFunction::Piece p;
  p.lo = center - 8 * sigma;
  p.hi = center + 8 * sigma;
  p.u = [=](double m) { return amplitude * std::exp(-(m - center) * (m - center) / (2 * s2)); };
  p.du = [=](double m) { return -amplitude * (m - center) / s2 * std::exp(-(m - center) * (m - center) / (2 * s2)); };
  p.d2u = [=](double m) {
    const double z = (m - center) * (m - center) / s2;
    return amplitude * (z - 1) / s2 * std::exp(-(m - center) * (m - center) / (2 * s2));
  };
  return p;
}

TestFunction2D pullback(const ReebGraph& graph, const HamiltonianSystem& sys, const GraphTestFunction& u) {
  // Piece active at x, or nullptr.
  auto piece_at = [&graph, &sys, &u](Vec2 x, double& m) -> const GraphTestFunction::Piece* {
    m = sys.H(x);
    bool any = false;
    for (const auto& [e, p] : u.pieces) any |= m >= p.lo && m <= p.hi;
    if (!any) return nullptr;
    GraphPoint gp;
    try {
      gp = graph.project_point(sys, x);
    } catch (const OutOfDomain&) {
      return nullptr;
    }
    if (gp.is_vertex()) return nullptr;
    auto it = u.pieces.find(gp.edge);
    if (it == u.pieces.end() || m < it->second.lo || m > it->second.hi) return nullptr;
    return &it->second;
  };
  TestFunction2D f;
  f.support = {0, 0, 0, 0};
  for (const auto& [e, p] : u.pieces) {
    const Rect b = graph.edge_box(e);
    if (!b.valid()) continue;
    f.support = f.support.valid() ? Rect{std::min(f.support.x0, b.x0), std::max(f.support.x1, b.x1),
                                         std::min(f.support.y0, b.y0), std::max(f.support.y1, b.y1)}
                                  : b;
  }
  f.value = [=](Vec2 x) {
    double m;
    const auto* p = piece_at(x, m);
    return p ? p->u(m) : 0.0;
  };
  f.grad = [=, &sys](Vec2 x) {
    double m;
    const auto* p = piece_at(x, m);
    return p ? sys.grad_H(x) * p->du(m) : Vec2{};
  };
  f.laplacian = [=, &sys](Vec2 x) {
    double m;
    const auto* p = piece_at(x, m);
    return p ? p->d2u(m) * norm2(sys.grad_H(x)) + p->du(m) * sys.laplacian_H(x) : 0.0;
  };
  return f;
}

double pullback_cancellation(const HamiltonianSystem& sys, const ReebGraph& graph, const GraphTestFunction& v,
                             const std::vector<std::pair<int, double>>& edge_levels, ChainRule mode,
                             const TraceOptions& opts) {
  double worst = 0.0;
  for (auto [e, m] : edge_levels) {
    auto it = v.pieces.find(e);
    if (it == v.pieces.end()) continue;
    const auto& piece = it->second;
    const LevelCurve c = trace_level_curve(sys, graph.seed_at(sys, e, m), opts);
    auto integrand = [&](Vec2 x) {
      const Vec2 gH = sys.grad_H(x);
      if (mode == ChainRule::analytic) return piece.du(c.level) * dot(rotate_ccw(gH), gH);
      const double d = 1e-5;
      auto V = [&](Vec2 y) { return piece.u(sys.H(y)); };
      const Vec2 grad{(V(x + Vec2{d, 0}) - V(x - Vec2{d, 0})) / (2 * d), (V(x + Vec2{0, d}) - V(x - Vec2{0, d})) / (2 * d)};
      return dot(rotate_ccw(gH), grad);
    };
    worst = std::max(worst, std::abs(contour_integral(c, integrand, Weight::dl)));
  }
  return worst;
}

ProjectedFormValue projected_form(const ReebGraph& graph, const HamiltonianSystem& sys, const GraphTestFunction& u,
                                  const GraphTestFunction& v, const TraceOptions& opts) {
  ProjectedFormValue out;
  const double eps = sys.epsilon();
  for (const auto& [e, pu] : u.pieces) {
    auto itv = v.pieces.find(e);
    if (itv == v.pieces.end()) continue;
    const auto& pv = itv->second;
    const Edge& ed = graph.edges[e];
    const double lo = std::max({pu.lo, pv.lo, ed.m_lo}), hi = std::min({pu.hi, pv.hi, ed.m_hi});
    if (!(hi > lo)) continue;
    // Keep nodes strictly inside the edge.
    const double pad = 1e-9 * ed.span();
    const double a0 = std::max(lo, ed.m_lo + pad), b0 = std::min(hi, ed.m_hi - pad);
    double node_err = 0.0;
    auto integrand = [&](double m, double& sym, double& anti, double& err) {
      const CoefficientSample s = coefficient_sample_refined(sys, graph.seed_at(sys, e, m), opts);
      const double uu = pu.u(m), vv = pv.u(m), du = pu.du(m), dv = pv.du(m);
      const double t1 = eps * s.a * du * dv, t2 = -0.5 * s.c * uu * vv, t3 = 0.5 * s.b * (vv * du - uu * dv);
      sym = t1 + t2;
      anti = t3;
      const double floor = 1e-8 * (s.T + s.a + s.d + s.S2);
      err = s.err_est * (std::abs(t1) + std::abs(t2) + std::abs(t3) +
                         floor * (0.5 * std::abs(uu * vv) + 0.5 * std::abs(vv * du - uu * dv)));
    };
    const int panels = 8;
    double q10 = 0.0, q20s = 0.0, q20a = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double a = a0 + (b0 - a0) * p / panels, b = a0 + (b0 - a0) * (p + 1) / panels;
      q10 += boost::math::quadrature::gauss<double, 10>::integrate(
          [&](double m) {
            double s, an, er;
            integrand(m, s, an, er);
            return s + an;
          },
          a, b);
      q20s += boost::math::quadrature::gauss<double, 20>::integrate(
          [&](double m) {
            double s, an, er;
            integrand(m, s, an, er);
            return s;
          },
          a, b);
      q20a += boost::math::quadrature::gauss<double, 20>::integrate(
          [&](double m) {
            double s, an, er;
            integrand(m, s, an, er);
            return an;
          },
          a, b);
      node_err += boost::math::quadrature::gauss<double, 20>::integrate(
          [&](double m) {
            double s, an, er;
            integrand(m, s, an, er);
            return er;
          },
          a, b);
    }
    out.sym += q20s;
    out.antisym += q20a;
    out.err_est += std::abs(q20s + q20a - q10) + node_err;
  }

  // Mass vertices: -1/2 u(O) v(O) int_{pi^{-1}(O)} div(hF).
  using GL = boost::math::quadrature::gauss<double, 30>;
  for (const Vertex& vx : graph.vertices) {
    if (vx.kind != VertexKind::plateau) continue;
    const double uo = u.value(GraphPoint::at_vertex(vx.id, vx.level)), vo = v.value(GraphPoint::at_vertex(vx.id, vx.level));
    if (uo == 0.0 || vo == 0.0) continue;
    for (const auto& pl : sys.plateaus()) {
      if (norm(pl.center - vx.position) > 1e-12) continue;
      const int n_theta = 256;
      double integral = 0.0;
      for (int t = 0; t < n_theta; ++t) {
        const Vec2 dir{std::cos(2 * M_PI * t / n_theta), std::sin(2 * M_PI * t / n_theta)};
        integral += GL::integrate([&](double r) { return r * sys.div_hF(pl.center + dir * r); }, 0.0, pl.radius);
      }
      out.vertex_term += -0.5 * uo * vo * integral * 2 * M_PI / n_theta;
    }
  }
  out.sym += out.vertex_term;
  out.value = out.sym + out.antisym;
  return out;
}

ProjectedMeasure projected_measure(const ReebGraph& graph, const std::vector<EdgeTable>& tables,
                                   const HamiltonianSystem& sys) {
  ProjectedMeasure pm;
  boost::math::quadrature::tanh_sinh<double> ts;
  using GL = boost::math::quadrature::gauss<double, 15>;
  for (const EdgeTable& t : tables) {
    auto& dens = pm.densities[t.edge_id];
    for (std::size_t i = 0; i < t.samples.size(); ++i) dens.push_back({t.m_grid[i], t.samples[i].d});
    double mass = 0.0;
    double a = t.m_lo, b = t.m_hi;
    if (t.near_lo.active) {
      const double z = t.near_lo.zone / t.span();
      mass += t.span() * ts.integrate([&](double d) { return t.near_lo.eval(fd, d); }, 0.0, z);
      a = t.m_lo + t.near_lo.zone;
    }
    if (t.near_hi.active) {
      const double z = t.near_hi.zone / t.span();
      mass += t.span() * ts.integrate([&](double d) { return t.near_hi.eval(fd, d); }, 0.0, z);
      b = t.m_hi - t.near_hi.zone;
    }
    // Interpolated part, panel by panel along the grid.
    std::vector<double> cuts{a};
    for (double m : t.m_grid)
      if (m > a && m < b) cuts.push_back(m);
    cuts.push_back(b);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      mass += GL::integrate([&](double m) { return t.raw(fd, m); }, cuts[i], cuts[i + 1]);
    pm.edge_mass[t.edge_id] = mass;
    pm.total += mass;
  }
  using GL30 = boost::math::quadrature::gauss<double, 30>;
  for (const Vertex& v : graph.vertices) {
    double mass = 0.0;
    if (v.kind == VertexKind::plateau) {
      for (const auto& pl : sys.plateaus()) {
        if (norm(pl.center - v.position) > 1e-12) continue;
        const int n_theta = 256;
        for (int t = 0; t < n_theta; ++t) {
          const Vec2 dir{std::cos(2 * M_PI * t / n_theta), std::sin(2 * M_PI * t / n_theta)};
          mass += GL30::integrate([&](double r) { return r * sys.h(pl.center + dir * r); }, 0.0, pl.radius) * 2 *
                  M_PI / n_theta;
        }
      }
    }
    pm.vertex_mass[v.id] = mass;
    pm.total += mass;
  }
  return pm;
}

double mu_mass_2d(const HamiltonianSystem& sys, int n) {
  const Rect& d = sys.domain();
  const double hx = d.width() / n, hy = d.height() / n;
  double s = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const Vec2 x{d.x0 + (i + 0.5) * hx, d.y0 + (j + 0.5) * hy};
      if (sys.H(x) <= sys.h_max()) s += sys.h(x);
    }
  return s * hx * hy;
}

}  // namespace hamavg
