#include "hamavg/identity_suite.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "hamavg/errors.hpp"

namespace hamavg {

bool IdentityReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.pass; });
}

const IdentityCheck& IdentityReport::get(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw Error("no identity check named '" + name + "'");
}

std::vector<double> interior_levels(const Edge& e, int n, double h_max) {
  const double hi = std::min(e.m_hi, h_max);
  std::vector<double> out;
  for (int k = 0; k < n; ++k) out.push_back(e.m_lo + (hi - e.m_lo) * (k + 1) / (n + 1));
  return out;
}

namespace {

double rel(double res, double ref) { return res == 0.0 ? 0.0 : res / std::max(std::abs(ref), 1e-12); }

// The hF identity degenerates when hF vanishes identically (gibbs density with
// e = grad H): both sides are rounding noise, so normalize by the h grad H side.
double rel_hF(const DerivativeResiduals& r) {
  return rel(r.res1, std::max(std::abs(r.rhs1), 1e-8 * std::abs(r.rhs2)));
}

GraphTestFunction::Piece identity_piece(double lo, double hi) {
  GraphTestFunction::Piece p;
  p.u = [](double m) { return m; };
  p.du = [](double) { return 1.0; };
  p.d2u = [](double) { return 0.0; };
  p.lo = lo;
  p.hi = hi;
  return p;
}

}  // namespace

IdentityCheck check_ibp(const HamiltonianSystem& sys, const IdentityOptions& opts) {
  IdentityCheck c;
  c.name = "ibp";
  const TestFunction2D f = gaussian_bump({0.4, 0.1}, 0.25);
  const TestFunction2D g = gaussian_bump({0.6, -0.2}, 0.25, 0.8);
  double worst = -1.0;
  std::ostringstream os;
  for (double alpha : opts.ibp_alphas) {
    const IbpResult r = ibp_residual(sys, f, g, alpha, opts.n_grid);
    os << "alpha=" << alpha << ": residual " << r.residual << " bound " << r.err_est << "; ";
    const double ratio = r.err_est > 0 ? r.residual / r.err_est : (r.residual == 0 ? 0.0 : INFINITY);
    if (ratio > worst) {
      worst = ratio;
      c.residual = r.residual;
      c.tolerance = r.err_est;
    }
  }
  c.pass = worst <= 1.0;
  c.detail = os.str();
  return c;
}

IdentityCheck check_pullback(const HamiltonianSystem& sys, const ReebGraph& graph, const IdentityOptions& opts) {
  IdentityCheck c;
  c.name = "pullback";
  c.tolerance = 1e-8;
  GraphTestFunction v;
  std::vector<std::pair<int, double>> levels;
  for (const Edge& e : graph.edges) {
    v.pieces[e.id] = identity_piece(e.m_lo, std::min(e.m_hi, sys.h_max()));
    for (double m : interior_levels(e, opts.n_levels, sys.h_max())) levels.push_back({e.id, m});
  }
  const double analytic = pullback_cancellation(sys, graph, v, levels, ChainRule::analytic, opts.trace);
  const double numerical = pullback_cancellation(sys, graph, v, levels, ChainRule::numerical, opts.trace);
  c.residual = numerical;
  c.pass = analytic == 0.0 && numerical <= c.tolerance;
  std::ostringstream os;
  os << "analytic " << analytic << ", numerical " << numerical << " over " << levels.size() << " levels";
  c.detail = os.str();
  return c;
}

IdentityCheck check_alpha_indep(const HamiltonianSystem& sys, const ReebGraph& graph, const IdentityOptions& opts) {
  IdentityCheck c;
  c.name = "alpha_indep";
  c.tolerance = 1e-10;
  const Edge& e = graph.edges.front();
  const double lo = e.m_lo, hi = std::min(e.m_hi, sys.h_max());
  const double s = (hi - lo) / 16;
  GraphTestFunction u, v;
  u.pieces[e.id] = gaussian_in_m(lo + 0.45 * (hi - lo), s);
  v.pieces[e.id] = gaussian_in_m(lo + 0.55 * (hi - lo), s, 0.7);
  const TestFunction2D fu = pullback(graph, sys, u), fv = pullback(graph, sys, v);
  const FormValue e1 = form_E_alpha(sys, fu, fv, 1.0, opts.n_grid);
  const FormValue e2 = form_E_alpha(sys, fu, fv, 1e-3, opts.n_grid);
  const ProjectedFormValue p = projected_form(graph, sys, u, v, opts.trace);
  c.residual = rel(std::abs(e1.total() - e2.total()), e1.total());
  const double gap = std::abs(p.value - e1.total());
  const double bound = 2 * (p.err_est + e1.err_est);
  c.pass = c.residual <= c.tolerance && gap <= bound;
  std::ostringstream os;
  os.precision(12);
  os << "E(alpha=1) " << e1.total() << ", E(alpha=1e-3) " << e2.total() << ", projected " << p.value
     << "; |projected - 2D| " << gap << " vs bound " << bound;
  c.detail = os.str();
  return c;
}

IdentityCheck check_bprime_eq_c(const HamiltonianSystem& sys, const ReebGraph& graph, const IdentityOptions& opts) {
  IdentityCheck c;
  c.name = "bprime_eq_c";
  c.tolerance = 1e-3;
  bool ok = true;
  double worst_ratio = -1.0;
  for (const Edge& e : graph.edges) {
    const double span = std::min(e.m_hi, sys.h_max()) - e.m_lo;
    for (double m : interior_levels(e, opts.n_levels, sys.h_max())) {
      const Vec2 seed = graph.seed_at(sys, e.id, m);
      const DerivativeResiduals r =
          derivative_residuals(sys, seed, m, opts.bprime_dm_rel * span, graph.critical_levels, opts.trace);
      const CoefficientSample s = coefficient_sample_refined(sys, seed, opts.trace);
      const double res = rel_hF(r);
      const double tol = std::max(1e-3, 3 * s.err_est);
      ok &= res <= tol;
      if (res / tol > worst_ratio) {
        worst_ratio = res / tol;
        c.residual = res;
        c.tolerance = tol;
      }
    }
  }
  c.pass = ok;
  c.detail = "max relative |b' - c| over " + std::to_string(opts.n_levels) + " levels per edge";
  return c;
}

IdentityCheck check_flux(const ReebGraph& graph, const IdentityOptions& opts) {
  IdentityCheck c;
  c.name = "flux";
  c.tolerance = opts.flux_tol;
  int n = 0;
  for (const Vertex& v : graph.vertices) {
    if (!v.is_point_vertex() || v.J_plus.empty() || v.J_minus.empty()) continue;
    double up = 0, down = 0;
    for (int e : v.J_plus) up += v.alpha.at(e);
    for (int e : v.J_minus) down += v.alpha.at(e);
    c.residual = std::max(c.residual, std::abs(up - down) / (up + down));
    ++n;
  }
  c.pass = c.residual <= c.tolerance;
  c.detail = std::to_string(n) + " interior vertices";
  return c;
}

IdentityCheck check_derivative_lemma(const HamiltonianSystem& sys, const ReebGraph& graph,
                                     const IdentityOptions& opts) {
  IdentityCheck c;
  c.name = "derivative_lemma";
  c.tolerance = 1e-3;
  double rmin = INFINITY, rmax = -INFINITY;
  int skipped = 0;
  for (const Edge& e : graph.edges)
    for (double m : interior_levels(e, opts.n_levels, sys.h_max())) {
      const Vec2 seed = graph.seed_at(sys, e.id, m);
      DerivativeResiduals a, b;
      try {
        a = derivative_residuals(sys, seed, m, opts.lemma_dm, graph.critical_levels, opts.trace);
        b = derivative_residuals(sys, seed, m, opts.lemma_dm / 2, graph.critical_levels, opts.trace);
      } catch (const EdgeStraddle&) {
        ++skipped;
        continue;
      }
      const double r1 = rel_hF(a), r2 = rel(a.res2, a.rhs2);
      c.residual = std::max({c.residual, r1, r2});
      // Order is only visible above the quadrature floor.
      for (auto [big, small, r] : {std::tuple{a.res1, b.res1, r1}, std::tuple{a.res2, b.res2, r2}}) {
        if (r < 1e-7) continue;
        rmin = std::min(rmin, small / big);
        rmax = std::max(rmax, small / big);
      }
    }
  const bool order_ok = !(rmin < 0.15 || rmax > 0.4);
  c.pass = c.residual <= c.tolerance && order_ok && skipped == 0;
  std::ostringstream os;
  os << "res(dm/2)/res(dm) in [" << rmin << ", " << rmax << "]";
  if (skipped) os << "; " << skipped << " levels straddle a critical value";
  c.detail = os.str();
  return c;
}

IdentityCheck check_mass(const HamiltonianSystem& sys, const ReebGraph& graph, const std::vector<EdgeTable>& tables,
                         const IdentityOptions& opts) {
  IdentityCheck c;
  c.name = "mass";
  c.tolerance = opts.mass_tol;
  const ProjectedMeasure pm = projected_measure(graph, tables, sys);
  const double ref = mu_mass_2d(sys, opts.mass_grid);
  c.residual = rel(std::abs(pm.total - ref), ref);
  c.pass = c.residual <= c.tolerance;
  std::ostringstream os;
  os.precision(10);
  os << "projected " << pm.total << ", 2D " << ref;
  c.detail = os.str();
  return c;
}

IdentityReport run_identity_suite(const HamiltonianSystem& sys, const ReebGraph& graph,
                                  const std::vector<EdgeTable>& tables, const IdentityOptions& opts) {
  IdentityReport r;
  r.checks.push_back(check_ibp(sys, opts));
  r.checks.push_back(check_pullback(sys, graph, opts));
  r.checks.push_back(check_alpha_indep(sys, graph, opts));
  r.checks.push_back(check_bprime_eq_c(sys, graph, opts));
  r.checks.push_back(check_flux(graph, opts));
  r.checks.push_back(check_derivative_lemma(sys, graph, opts));
  r.checks.push_back(check_mass(sys, graph, tables, opts));
  return r;
}

}  // namespace hamavg
