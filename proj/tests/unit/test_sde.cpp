#include "doctest.h"

#include <cmath>
#include <numbers>

#include "hamavg/errors.hpp"
#include "hamavg/levelset.hpp"
#include "hamavg/reeb_graph.hpp"
#include "hamavg/rng.hpp"
#include "hamavg/sde.hpp"

using namespace hamavg;

TEST_CASE("rng streams are pure functions of seed, stream and counter") {
  RngStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_c |= x != c.next_u64();
    differs_d |= x != d.next_u64();
  }
  CHECK(differs_c);
  CHECK(differs_d);
  CHECK(a.counter() == 100);
}

TEST_CASE("rng moments") {
  RngStream r(1, 0);
  const int n = 200000;
  double s = 0, s2 = 0, e = 0, umin = 1, umax = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    e += r.exponential();
    const double u = r.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
  }
  CHECK(std::abs(s / n) < 4 / std::sqrt(n));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(e / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
}

TEST_CASE("config validation") {
  SdeConfig c;
  CHECK_NOTHROW(validate(c));
  c.dt = 2.0;
  c.t_end = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SdeConfig{};
  c.alpha = 0.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SdeConfig{};
  c.snapshot_times = {0.5, 2.0};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SdeConfig{};
  c.n_paths = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  CHECK(parse_scheme("euler_maruyama") == Scheme::euler_maruyama);
  CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
}

TEST_CASE("snapshot steps") {
  SdeConfig c;
  c.dt = 0.01;
  c.t_end = 1.0;
  c.snapshot_times = {0.25, 0.5, 1.0};
  CHECK(c.n_steps() == 100);
  CHECK(c.snapshot_steps() == std::vector<int>{25, 50, 100});
}

TEST_CASE("fast flow conserves H") {
  const auto h1 = make_builtin(Builtin::H1, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const Vec2 x{1.0, 0.5};
  const Vec2 y = fast_flow(h1, x, 0.3, 0.01, 4000);
  CHECK(h1.H(y) == doctest::Approx(h1.H(x)).epsilon(1e-13));
  // Rotation by angle dt / alpha.
  const double th = 30.0;
  CHECK(y.x == doctest::Approx(std::cos(th) * x.x - std::sin(th) * x.y).epsilon(1e-12));

  const auto h2 = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const Vec2 z = fast_flow(h2, {1.2, 0.3}, 0.05, 0.01, 4000);
  CHECK(h2.H(z) == doctest::Approx(h2.H({1.2, 0.3})).epsilon(1e-10));
}

TEST_CASE("noise free step with frozen fast flow reduces to the drift") {
  BuiltinOptions o;
  o.name = Builtin::H1;
  o.epsilon = 1e-30;
  o.drift = DriftSpec::grad_H;
  const auto s = make_builtin(o);
  SdeConfig c;
  c.alpha = 1e9;
  c.dt = 1e-3;
  for (Scheme sc : {Scheme::splitting, Scheme::euler_maruyama}) {
    c.scheme = sc;
    const Vec2 y = step(s, c, {1.0, 0.0}, {0.3, -0.1}, {0.2, 0.4});
    // dY = -Y dt for e = grad H1 = x.
    CHECK(y.x == doctest::Approx(std::exp(-1e-3)).epsilon(1e-6));
    CHECK(std::abs(y.y) < 1e-6);
  }
}

TEST_CASE("ensembles are reproducible and thread independent") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::grad_H, DensitySpec::gibbs, 0.25);
  SdeConfig c;
  c.alpha = 0.1;
  c.dt = 1e-2;
  c.t_end = 0.2;
  c.n_paths = 64;
  c.seed = 5;
  c.snapshot_times = {0.1, 0.2};
  const auto init = InitialLaw2D::point({1.0, 0.0});
  c.threads = 1;
  const Ensemble a = simulate_paths(s, c, init);
  c.threads = 3;
  const Ensemble b = simulate_paths(s, c, init);
  REQUIRE(a.n_paths() == 64);
  for (int p = 0; p < 64; ++p)
    for (int k = 0; k < 2; ++k) CHECK(a.states[p][k] == b.states[p][k]);
  c.seed = 6;
  const Ensemble d = simulate_paths(s, c, init);
  CHECK_FALSE(a.states[0][1] == d.states[0][1]);
  CHECK(a.point_mass_start);
  CHECK(a.snapshot_index(0.2) == 1);
  CHECK_THROWS_AS(a.snapshot_index(0.15), MissingSnapshot);
}

TEST_CASE("paths crossing the cap are killed") {
  BuiltinOptions o;
  o.name = Builtin::H1;
  o.epsilon = 2.0;
  o.h_max = 1.0;
  const auto s = make_builtin(o);
  SdeConfig c;
  c.dt = 1e-3;
  c.t_end = 1.0;
  c.n_paths = 50;
  c.snapshot_times = {0.5, 1.0};
  const Ensemble e = simulate_paths(s, c, InitialLaw2D::point({0.5, 0.0}));
  CHECK(e.breaches > 0);
  int dead = 0;
  for (int p = 0; p < e.n_paths(); ++p)
    if (!e.alive[p]) {
      ++dead;
      CHECK(e.death_snapshot[p] >= 0);
      CHECK_FALSE(e.alive_at(p, 1));
    }
  CHECK(dead == e.breaches);
}

TEST_CASE("Liouville initial law on a circle is uniform in angle") {
  const auto s = make_builtin(Builtin::H1, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const LevelCurve c = trace_level_curve(s, {1.0, 0.0});
  const auto law = InitialLaw2D::level_curve(c);
  RngStream r(3, 0);
  int upper = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Vec2 x = law.sample(r);
    CHECK(s.H(x) == doctest::Approx(0.5).epsilon(1e-9));
    upper += x.y > 0;
  }
  CHECK(std::abs(upper - n / 2) < 4 * std::sqrt(n / 4.0));
  CHECK_FALSE(law.has_point_mass());
}

TEST_CASE("projection of an ensemble follows the level") {
  const auto s = make_builtin(Builtin::H2, DriftSpec::zero, DensitySpec::lebesgue, 0.25);
  const ReebGraph g = build_reeb_graph(s);
  SdeConfig c;
  c.alpha = 0.05;
  c.dt = 1e-3;
  c.t_end = 0.1;
  c.n_paths = 20;
  const Ensemble e = simulate_paths(s, c, InitialLaw2D::point({1.2, 0.0}));
  const ProjectedEnsemble p = project_trajectory(g, s, e);
  REQUIRE(p.n_paths() == 20);
  for (int i = 0; i < 20; ++i) CHECK(g.level(p.points[i][0]) == doctest::Approx(s.H(e.states[i][0])));
  CHECK(p.anomalies == 0);
}
