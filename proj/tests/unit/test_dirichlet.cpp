#include "doctest.h"

#include <cmath>
#include <numbers>

#include "hamavg/dirichlet.hpp"
#include "hamavg/graph_diffusion.hpp"

using namespace hamavg;
using std::numbers::pi;

namespace {

GraphTestFunction on_edge(int e, GraphTestFunction::Piece p) {
  GraphTestFunction u;
  u.pieces[e] = std::move(p);
  return u;
}

}  // namespace

TEST_CASE("gaussian bump derivatives") {
  const TestFunction2D f = gaussian_bump({0.3, -0.2}, 0.4, 1.5);
  const Vec2 x{0.5, 0.1};
  const double d = 1e-5;
  CHECK(f.value({0.3, -0.2}) == doctest::Approx(1.5));
  CHECK(f.grad(x).x == doctest::Approx((f.value({x.x + d, x.y}) - f.value({x.x - d, x.y})) / (2 * d)).epsilon(1e-6));
  const double lap =
      (f.value({x.x + 1e-3, x.y}) + f.value({x.x - 1e-3, x.y}) + f.value({x.x, x.y + 1e-3}) +
       f.value({x.x, x.y - 1e-3}) - 4 * f.value(x)) /
      1e-6;
  CHECK(f.laplacian(x) == doctest::Approx(lap).epsilon(1e-4));
  CHECK(f.value({0.3 + 3.3, -0.2}) == 0.0);
  CHECK(f.support.x1 == doctest::Approx(0.3 + 8 * 0.4));
}

TEST_CASE("form properties") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::gibbs, 0.5);
  const TestFunction2D f = gaussian_bump({0.4, 0.1}, 0.25);
  const TestFunction2D g = gaussian_bump({0.6, -0.2}, 0.25, 0.8);
  const FormValue ff = form_E_alpha(s, f, f, 0.1, 128);
  CHECK(std::abs(ff.antisym) <= 1e-14 * std::abs(ff.sym));
  CHECK(ff.sym > 0);
  const FormValue fg = form_E_alpha(s, f, g, 0.1, 128);
  const FormValue gf = form_E_alpha(s, g, f, 0.1, 128);
  CHECK(fg.sym == doctest::Approx(gf.sym).epsilon(1e-12));
  CHECK(fg.antisym == doctest::Approx(-gf.antisym).epsilon(1e-12));
  const FormValue z = form_E_alpha(s, f, zero_function(), 0.1, 128);
  CHECK(z.total() == 0.0);
}

TEST_CASE("integration by parts within the Richardson bound") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::grad_H, DensitySpec::lebesgue, 0.25);
  const TestFunction2D f = gaussian_bump({0.4, 0.1}, 0.25);
  const TestFunction2D g = gaussian_bump({0.6, -0.2}, 0.25, 0.8);
  for (double alpha : {1.0, 0.05}) {
    const IbpResult r = ibp_residual(s, f, g, alpha, 256);
    CHECK(r.residual <= r.err_est);
    CHECK(r.err_est < 1e-6 * std::abs(r.form) + 1e-12);
  }
}

TEST_CASE("pull-backs of functions of H are annihilated by the fast flow") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  GraphTestFunction v;
  for (const Edge& e : g.edges) v.pieces[e.id] = gaussian_in_m(0.5 * (e.m_lo + std::min(e.m_hi, 2.0)), 0.1);
  std::vector<std::pair<int, double>> levels;
  for (const Edge& e : g.edges) levels.push_back({e.id, e.m_lo + 0.3 * (std::min(e.m_hi, 2.0) - e.m_lo)});
  CHECK(pullback_cancellation(s, g, v, levels, ChainRule::analytic) == 0.0);
  CHECK(pullback_cancellation(s, g, v, levels, ChainRule::numerical) < 1e-8);

  const TestFunction2D pb = pullback(g, s, v);
  const Vec2 x{1.1, 0.2};
  const GraphPoint p = g.project_point(s, x);
  CHECK(pb.value(x) == doctest::Approx(v.value(p)));
  CHECK(pb.grad(x).x == doctest::Approx(v.derivative(p.edge, p.m) * s.grad_H(x).x));
}

TEST_CASE("graph test functions") {
  GraphTestFunction u = on_edge(2, gaussian_in_m(0.5, 0.1, 2.0));
  u.vertex_values[1] = 3.0;
  CHECK(u.value(GraphPoint::on_edge(2, 0.5)) == doctest::Approx(2.0));
  CHECK(u.value(GraphPoint::on_edge(0, 0.5)) == 0.0);
  CHECK(u.value(GraphPoint::at_vertex(1, 0.0)) == 3.0);
  CHECK(u.derivative(2, 0.5) == doctest::Approx(0.0));
  CHECK(u.derivative(2, 0.6) == doctest::Approx(-2.0 * 10.0 * std::exp(-0.5)));
  CHECK(u.value(GraphPoint::on_edge(2, 0.5 + 0.81)) == 0.0);
}

TEST_CASE("projected form agrees with the two dimensional form on H1") {
  const auto s = make_builtin(Builtin::H1, DriftSpec::zero, DensitySpec::gibbs, 0.5);
  const ReebGraph g = build_reeb_graph(s);
  const GraphTestFunction u = on_edge(0, gaussian_in_m(1.0, 0.2));
  const GraphTestFunction v = on_edge(0, gaussian_in_m(1.2, 0.2, 0.7));
  const ProjectedFormValue p = projected_form(g, s, u, v);
  const FormValue f = form_E_alpha(s, pullback(g, s, u), pullback(g, s, v), 1.0, 256);
  CHECK(std::abs(p.value - f.total()) <= 2 * (p.err_est + f.err_est));
  CHECK(p.vertex_term == 0.0);
  const FormValue f2 = form_E_alpha(s, pullback(g, s, u), pullback(g, s, v), 1e-3, 256);
  CHECK(f2.total() == doctest::Approx(f.total()).epsilon(1e-10));
}

TEST_CASE("measure of the sublevel set") {
  SUBCASE("H1, Lebesgue") {
    const auto s = make_builtin(Builtin::H1, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
    CHECK(mu_mass_2d(s, 1024) == doctest::Approx(8 * pi).epsilon(1e-3));
    const ReebGraph g = build_reeb_graph(s);
    const ProjectedMeasure m = projected_measure(g, build_tables(g, s), s);
    CHECK(m.total == doctest::Approx(8 * pi).epsilon(1e-6));
  }
  SUBCASE("H1, gibbs") {
    const auto s = make_builtin(Builtin::H1, DriftSpec::zero, DensitySpec::gibbs, 0.25);
    const ReebGraph g = build_reeb_graph(s);
    const ProjectedMeasure m = projected_measure(g, build_tables(g, s), s);
    // pi/2 (1 - exp(-16)); the table interpolates a steep exponential.
    CHECK(m.total == doctest::Approx(1.5707961500250575).epsilon(3e-3));
  }
  SUBCASE("H2 area and gibbs mass") {
    // One-dimensional quadrature in x of the y-extent (or its gaussian integral).
    const auto leb = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
    const auto gib = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::gibbs, 0.25);
    const ReebGraph g = build_reeb_graph(leb);
    CHECK(projected_measure(g, build_tables(g, leb), leb).total == doctest::Approx(15.196529053830695).epsilon(1e-3));
    CHECK(projected_measure(g, build_tables(g, gib), gib).total == doctest::Approx(6.723849804668138).epsilon(1e-3));
    CHECK(mu_mass_2d(gib, 1024) == doctest::Approx(6.723849804668138).epsilon(1e-3));
  }
  SUBCASE("plateau contributes its area") {
    const auto s = make_builtin(Builtin::H1_plateau, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
    const ReebGraph g = build_reeb_graph(s);
    const ProjectedMeasure m = projected_measure(g, build_tables(g, s), s);
    double vm = 0;
    for (auto [v, x] : m.vertex_mass) vm += x;
    CHECK(vm == doctest::Approx(pi).epsilon(1e-3));
    // (r - 1)^2 <= 4 is the disc of radius 3.
    CHECK(m.total == doctest::Approx(9 * pi).epsilon(1e-3));
  }
}
