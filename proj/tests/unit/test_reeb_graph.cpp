#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "hamavg/errors.hpp"
#include "hamavg/reeb_graph.hpp"

using namespace hamavg;

namespace {

int count_kind(const ReebGraph& g, VertexKind k) {
  return static_cast<int>(std::count_if(g.vertices.begin(), g.vertices.end(), [&](const Vertex& v) { return v.kind == k; }));
}

const Vertex& first_of(const ReebGraph& g, VertexKind k) {
  for (const Vertex& v : g.vertices)
    if (v.kind == k) return v;
  throw std::runtime_error("no such vertex");
}

// Contour integrals behind alpha, from one-dimensional quadrature at high precision.
constexpr double kH2Well = 3.2;
constexpr double kH3Well = 3.23204107809923413;
constexpr double kH3Inner = 2.02119921804010202;
constexpr double kH3Outer = 10.9069650943568345;

}  // namespace

TEST_CASE("critical points of the built-ins") {
  const auto h2 = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  auto cp = find_critical_points(h2, h2.domain());
  REQUIRE(cp.size() == 3);
  std::sort(cp.begin(), cp.end(), [](auto& a, auto& b) { return a.point.x < b.point.x; });
  CHECK(cp[0].kind == VertexKind::minimum);
  CHECK(cp[1].kind == VertexKind::saddle);
  CHECK(cp[2].kind == VertexKind::minimum);
  CHECK(cp[0].level == doctest::Approx(-0.25));
  CHECK(cp[1].level == doctest::Approx(0.0));

  const auto h3 = make_builtin(Builtin::H3, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  cp = find_critical_points(h3, h3.domain());
  REQUIRE(cp.size() == 9);
  int minima = 0, saddles = 0, maxima = 0;
  for (const auto& c : cp) {
    if (c.kind == VertexKind::minimum) {
      ++minima;
      CHECK(c.level == doctest::Approx(-0.5));
    } else if (c.kind == VertexKind::saddle) {
      ++saddles;
      CHECK(c.level == doctest::Approx(-0.25));
    } else {
      ++maxima;
      CHECK(c.level == doctest::Approx(0.0));
    }
  }
  CHECK(minima == 4);
  CHECK(saddles == 4);
  CHECK(maxima == 1);
}

TEST_CASE("H1 has a single edge") {
  const auto s = make_builtin(Builtin::H1, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  CHECK(g.n_edges() == 1);
  CHECK(g.n_vertices() == 2);
  CHECK(g.is_tree());
  CHECK(g.infinity_vertex_count() == 1);
  CHECK(g.edges[0].m_lo == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(g.edges[0].m_hi == doctest::Approx(s.h_max()));
  const Vertex& o = first_of(g, VertexKind::minimum);
  // The circles shrink to a point, so oint |grad H| dl -> 0.
  CHECK(o.alpha.at(0) < 1e-2);
  CHECK(o.mass == 0.0);
  CHECK(o.gamma == 0.0);
}

TEST_CASE("H2 graph") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  REQUIRE(g.n_edges() == 3);
  CHECK(g.n_vertices() == 4);
  CHECK(g.is_tree());
  CHECK(count_kind(g, VertexKind::minimum) == 2);
  CHECK(count_kind(g, VertexKind::saddle) == 1);
  CHECK(count_kind(g, VertexKind::infinity) == 1);
  const Vertex& o = first_of(g, VertexKind::saddle);
  CHECK(o.J_minus.size() == 2);
  CHECK(o.J_plus.size() == 1);
  for (int e : o.J_minus) CHECK(o.alpha.at(e) == doctest::Approx(kH2Well).epsilon(1e-4));
  const double outer = o.alpha.at(o.J_plus[0]);
  CHECK(outer == doctest::Approx(2 * kH2Well).epsilon(1e-4));
  const double sum_below = o.alpha.at(o.J_minus[0]) + o.alpha.at(o.J_minus[1]);
  CHECK(std::abs(outer - sum_below) / outer <= 1e-3);
}

TEST_CASE("H3 graph has six edges around a merged saddle vertex") {
  const auto s = make_builtin(Builtin::H3, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  REQUIRE(g.n_edges() == 6);
  CHECK(g.n_vertices() == 7);
  CHECK(g.is_tree());
  const Vertex& o = first_of(g, VertexKind::saddle);
  CHECK(o.level == doctest::Approx(-0.25));
  CHECK(o.critical_points.size() == 4);
  REQUIRE(o.J_minus.size() == 4);
  REQUIRE(o.J_plus.size() == 2);
  double plus = 0, minus = 0;
  for (int e : o.J_minus) {
    CHECK(o.alpha.at(e) == doctest::Approx(kH3Well).epsilon(1e-4));
    minus += o.alpha.at(e);
  }
  std::vector<double> up;
  for (int e : o.J_plus) {
    up.push_back(o.alpha.at(e));
    plus += o.alpha.at(e);
  }
  std::sort(up.begin(), up.end());
  CHECK(up[0] == doctest::Approx(kH3Inner).epsilon(1e-4));
  CHECK(up[1] == doctest::Approx(kH3Outer).epsilon(1e-4));
  CHECK(std::abs(plus - minus) / plus <= 1e-3);
  CHECK(count_kind(g, VertexKind::maximum) == 1);
}

TEST_CASE("plateau vertex carries the disc area") {
  const auto s = make_builtin(Builtin::H1_plateau, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  CHECK(g.n_edges() == 1);
  const Vertex& p = first_of(g, VertexKind::plateau);
  CHECK(p.mass == doctest::Approx(std::numbers::pi).epsilon(1e-3));
  CHECK(p.gamma == doctest::Approx(0.0));
}

TEST_CASE("gamma integrates minus the divergence of e over the plateau") {
  BuiltinOptions o;
  o.name = Builtin::H1_plateau;
  o.drift = DriftSpec::custom;
  o.custom_drift = DriftCallbacks{[](Vec2 x) { return -x; }, [](Vec2) { return -2.0; }};
  const auto s = make_builtin(o);
  const ReebGraph g = build_reeb_graph(s);
  CHECK(first_of(g, VertexKind::plateau).gamma == doctest::Approx(2 * std::numbers::pi).epsilon(1e-3));
}

TEST_CASE("projection and tree distance") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  const GraphPoint r = g.project_point(s, {1.2, 0.1});
  const GraphPoint l = g.project_point(s, {-1.2, 0.1});
  const GraphPoint up = g.project_point(s, {0.0, 1.5});
  REQUIRE_FALSE(r.is_vertex());
  CHECK(r.edge != l.edge);
  CHECK(r.m == doctest::Approx(s.H({1.2, 0.1})));
  CHECK(up.m == doctest::Approx(1.125));
  // Both wells meet at the saddle level 0.
  CHECK(g.distance(r, l) == doctest::Approx(-r.m - l.m));
  CHECK(g.distance(r, up) == doctest::Approx(up.m - r.m));
  CHECK(g.distance(r, r) == 0.0);
  const GraphPoint r2 = GraphPoint::on_edge(r.edge, -0.2);
  CHECK(g.distance(r, r2) == doctest::Approx(std::abs(r.m + 0.2)));
  const GraphPoint sad = g.project_point(s, {0.0, 0.0});
  CHECK(sad.is_vertex());
  CHECK(g.vertices[sad.vertex].kind == VertexKind::saddle);
  CHECK_THROWS_AS(g.project_point(s, {10.0, 0.0}), OutOfDomain);
}

TEST_CASE("seeds lie on the requested level of the requested edge") {
  const auto s = make_builtin(Builtin::H3, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  for (const Edge& e : g.edges) {
    const double m = e.m_lo + 0.5 * (std::min(e.m_hi, s.h_max()) - e.m_lo);
    const Vec2 p = g.seed_at(s, e.id, m);
    CHECK(s.H(p) == doctest::Approx(m).epsilon(1e-9));
    CHECK(g.project_point(s, p).edge == e.id);
  }
}

TEST_CASE("approach levels cluster at the vertex") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  const Vertex& o = first_of(g, VertexKind::saddle);
  const auto lv = vertex_approach_levels(g, o.id, o.J_plus[0]);
  REQUIRE(lv.size() == 4);
  for (std::size_t i = 1; i < lv.size(); ++i) CHECK(std::abs(lv[i]) < std::abs(lv[i - 1]));
  CHECK(lv.front() > 0);
}

TEST_CASE("graph construction is fast") {
  for (Builtin b : {Builtin::H1, Builtin::H2, Builtin::H3}) {
    const auto s = make_builtin(b, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
    const auto t0 = std::chrono::steady_clock::now();
    (void)build_reeb_graph(s);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 10.0);
  }
}
