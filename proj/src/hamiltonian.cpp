#include "hamavg/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hamavg/errors.hpp"

namespace hamavg {

std::string to_string(Builtin b) {
  switch (b) {
    case Builtin::H1: return "H1";
    case Builtin::H1_plateau: return "H1_plateau";
    case Builtin::H2: return "H2";
    case Builtin::H3: return "H3";
  }
  return "?";
}

std::string to_string(DriftSpec d) {
  switch (d) {
    case DriftSpec::zero: return "zero";
    case DriftSpec::grad_H: return "grad_H";
    case DriftSpec::custom: return "custom";
  }
  return "?";
}

std::string to_string(DensitySpec d) {
  switch (d) {
    case DensitySpec::lebesgue: return "lebesgue";
    case DensitySpec::gibbs: return "gibbs";
    case DensitySpec::custom: return "custom";
  }
  return "?";
}

Builtin parse_builtin(const std::string& s) {
  if (s == "H1") return Builtin::H1;
  if (s == "H1_plateau") return Builtin::H1_plateau;
  if (s == "H2") return Builtin::H2;
  if (s == "H3") return Builtin::H3;
  throw ConfigError("unknown Hamiltonian '" + s + "' (expected H1, H1_plateau, H2, H3)");
}

DriftSpec parse_drift(const std::string& s) {
  if (s == "zero") return DriftSpec::zero;
  if (s == "grad_H") return DriftSpec::grad_H;
  if (s == "custom") return DriftSpec::custom;
  throw ConfigError("unknown drift '" + s + "' (expected zero, grad_H, custom)");
}

DensitySpec parse_density(const std::string& s) {
  if (s == "lebesgue") return DensitySpec::lebesgue;
  if (s == "gibbs") return DensitySpec::gibbs;
  if (s == "custom") return DensitySpec::custom;
  throw ConfigError("unknown density '" + s + "' (expected lebesgue, gibbs)");
}

HamiltonianSystem::HamiltonianSystem(Parts parts) : p_(std::move(parts)) {
  if (!(p_.epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (!p_.H || !p_.grad_H || !p_.laplacian_H) throw ConfigError("H, grad H and laplacian H are required");
  if (!p_.drift.e || !p_.drift.div_e) throw ConfigError("drift callbacks (e, div e) are required");
  if (!p_.density.h || !p_.density.grad_h || !p_.density.laplacian_h)
    throw ConfigError("density callbacks (h, grad h, lap h) are required");
  if (!p_.domain.valid()) throw ConfigError("truncation domain is empty");
}

Sym2 HamiltonianSystem::hessian_H(Vec2 x) const {
  if (p_.hessian_H) return p_.hessian_H(x);
  const double d = 1e-5;
  const Vec2 gxp = grad_H({x.x + d, x.y});
  const Vec2 gxm = grad_H({x.x - d, x.y});
  const Vec2 gyp = grad_H({x.x, x.y + d});
  const Vec2 gym = grad_H({x.x, x.y - d});
  Sym2 m;
  m.xx = (gxp.x - gxm.x) / (2 * d);
  m.yy = (gyp.y - gym.y) / (2 * d);
  m.xy = 0.5 * ((gxp.y - gxm.y) + (gyp.x - gym.x)) / (2 * d);
  return m;
}

Vec2 HamiltonianSystem::field_F(Vec2 x) const {
  return drift(x) + grad_h(x) * (p_.epsilon / h(x));
}

double HamiltonianSystem::div_hF(Vec2 x) const {
  return dot(grad_h(x), drift(x)) + h(x) * div_drift(x) + p_.epsilon * laplacian_h(x);
}

HamiltonianSystem HamiltonianSystem::with_truncation(Rect domain, double h_max) const {
  Parts q = p_;
  q.domain = domain;
  q.h_max = h_max;
  return HamiltonianSystem(std::move(q));
}

namespace {

struct Shape {
  ScalarField H;
  VectorField grad;
  ScalarField lap;
  MatrixField hess;
  Rect domain;
  double h_max;
  std::vector<Plateau> plateaus;
  bool rotation = false;
  bool relaxed = false;
};

Shape builtin_shape(Builtin b) {
  Shape s;
  switch (b) {
    case Builtin::H1:
      s.H = [](Vec2 p) { return 0.5 * norm2(p); };
      s.grad = [](Vec2 p) { return p; };
      s.lap = [](Vec2) { return 2.0; };
      s.hess = [](Vec2) { return Sym2{1.0, 0.0, 1.0}; };
      s.domain = {-3.0, 3.0, -3.0, 3.0};
      s.h_max = 4.0;
      s.rotation = true;
      break;
    case Builtin::H1_plateau:
      s.H = [](Vec2 p) {
        const double r = norm(p);
        return r <= 1.0 ? 0.0 : (r - 1.0) * (r - 1.0);
      };
      s.grad = [](Vec2 p) {
        const double r = norm(p);
        return r <= 1.0 ? Vec2{} : p * (2.0 * (1.0 - 1.0 / r));
      };
      s.lap = [](Vec2 p) {
        const double r = norm(p);
        return r <= 1.0 ? 0.0 : 4.0 - 2.0 / r;
      };
      s.hess = [](Vec2 p) {
        const double r = norm(p);
        if (r <= 1.0) return Sym2{};
        const double r3 = r * r * r;
        const double k = 2.0 * (1.0 - 1.0 / r);
        return Sym2{k + 2.0 * p.x * p.x / r3, 2.0 * p.x * p.y / r3, k + 2.0 * p.y * p.y / r3};
      };
      s.domain = {-3.5, 3.5, -3.5, 3.5};
      s.h_max = 4.0;
      s.plateaus = {Plateau{{0.0, 0.0}, 1.0}};
      s.relaxed = true;
      break;
    case Builtin::H2:
      s.H = [](Vec2 p) {
        const double x2 = p.x * p.x;
        return 0.25 * x2 * x2 - 0.5 * x2 + 0.5 * p.y * p.y;
      };
      s.grad = [](Vec2 p) { return Vec2{p.x * p.x * p.x - p.x, p.y}; };
      s.lap = [](Vec2 p) { return 3.0 * p.x * p.x; };
      s.hess = [](Vec2 p) { return Sym2{3.0 * p.x * p.x - 1.0, 0.0, 1.0}; };
      s.domain = {-2.5, 2.5, -2.5, 2.5};
      s.h_max = 2.0;
      break;
    case Builtin::H3:
      s.H = [](Vec2 p) {
        const double x2 = p.x * p.x;
        const double y2 = p.y * p.y;
        return 0.25 * x2 * x2 - 0.5 * x2 + 0.25 * y2 * y2 - 0.5 * y2;
      };
      s.grad = [](Vec2 p) { return Vec2{p.x * p.x * p.x - p.x, p.y * p.y * p.y - p.y}; };
      s.lap = [](Vec2 p) { return 3.0 * p.x * p.x + 3.0 * p.y * p.y - 2.0; };
      s.hess = [](Vec2 p) { return Sym2{3.0 * p.x * p.x - 1.0, 0.0, 3.0 * p.y * p.y - 1.0}; };
      s.domain = {-2.5, 2.5, -2.5, 2.5};
      s.h_max = 2.0;
      break;
  }
  return s;
}

}  // namespace

HamiltonianSystem make_builtin(const BuiltinOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  Shape s = builtin_shape(opts.name);

  HamiltonianSystem::Parts p;
  p.name = to_string(opts.name);
  p.H = s.H;
  p.grad_H = s.grad;
  p.laplacian_H = s.lap;
  p.hessian_H = s.hess;
  p.epsilon = opts.epsilon;
  p.domain = opts.domain.value_or(s.domain);
  p.h_max = opts.h_max.value_or(s.h_max);
  p.plateaus = s.plateaus;
  p.fast_flow_is_rotation = s.rotation;
  p.assumption_relaxed = s.relaxed;
  p.drift_spec = opts.drift;
  p.density_spec = opts.density;

  switch (opts.drift) {
    case DriftSpec::zero:
      p.drift = {[](Vec2) { return Vec2{}; }, [](Vec2) { return 0.0; }};
      break;
    case DriftSpec::grad_H:
      p.drift = {s.grad, s.lap};
      break;
    case DriftSpec::custom:
      if (!opts.custom_drift || !opts.custom_drift->e || !opts.custom_drift->div_e)
        throw ConfigError("custom drift requires e and div e callbacks");
      p.drift = *opts.custom_drift;
      break;
  }

  const double eps = opts.epsilon;
  switch (opts.density) {
    case DensitySpec::lebesgue:
      p.density = {[](Vec2) { return 1.0; }, [](Vec2) { return Vec2{}; }, [](Vec2) { return 0.0; }};
      break;
    case DensitySpec::gibbs: {
      auto H = s.H;
      auto grad = s.grad;
      auto lap = s.lap;
      p.density.h = [H, eps](Vec2 x) { return std::exp(-H(x) / eps); };
      p.density.grad_h = [H, grad, eps](Vec2 x) { return grad(x) * (-std::exp(-H(x) / eps) / eps); };
      p.density.laplacian_h = [H, grad, lap, eps](Vec2 x) {
        const double hv = std::exp(-H(x) / eps);
        return hv * (norm2(grad(x)) / (eps * eps) - lap(x) / eps);
      };
      break;
    }
    case DensitySpec::custom:
      if (!opts.custom_density) throw ConfigError("custom density requires callbacks");
      p.density = *opts.custom_density;
      break;
  }
  return HamiltonianSystem(std::move(p));
}

HamiltonianSystem make_builtin(Builtin name, DriftSpec drift, DensitySpec density, double epsilon) {
  BuiltinOptions o;
  o.name = name;
  o.drift = drift;
  o.density = density;
  o.epsilon = epsilon;
  return make_builtin(o);
}

AssumptionReport check_assumptions(const HamiltonianSystem& sys, const Rect& domain, int n_grid, double tol) {
  if (n_grid < 2) throw ConfigError("check_assumptions needs n_grid >= 2");
  AssumptionReport r;
  r.tolerance = tol;
  r.h_max = sys.h_max();
  r.assumption_relaxed = sys.assumption_relaxed();
  r.max_h_divergence = -std::numeric_limits<double>::infinity();
  r.min_h = std::numeric_limits<double>::infinity();
  r.boundary_min_H = std::numeric_limits<double>::infinity();
  bool finite = true;
  double worst_excess = -std::numeric_limits<double>::infinity();

  const double dx = domain.width() / (n_grid - 1);
  const double dy = domain.height() / (n_grid - 1);
  for (int i = 0; i < n_grid; ++i) {
    for (int j = 0; j < n_grid; ++j) {
      const Vec2 x{domain.x0 + i * dx, domain.y0 + j * dy};
      const double hv = sys.h(x);
      r.min_h = std::min(r.min_h, hv);
      const double t1 = dot(sys.grad_h(x), sys.drift(x)) / hv;
      const double t2 = sys.div_drift(x);
      const double t3 = sys.epsilon() * sys.laplacian_h(x) / hv;
      const double div = t1 + t2 + t3;
      const double F = norm(sys.field_F(x));
      finite = finite && std::isfinite(div) && std::isfinite(F);
      r.max_h_divergence = std::max(r.max_h_divergence, div);
      // roundoff in the three-term sum scales with the term magnitudes
      worst_excess = std::max(worst_excess, div - tol * (1.0 + std::abs(t1) + std::abs(t2) + std::abs(t3)));
      r.max_abs_h_divergence = std::max(r.max_abs_h_divergence, std::abs(div));
      r.max_F = std::max(r.max_F, F);
      if (i == 0 || j == 0 || i == n_grid - 1 || j == n_grid - 1)
        r.boundary_min_H = std::min(r.boundary_min_H, sys.H(x));
    }
  }
  r.supermedian_ok = worst_excess <= 0.0;
  r.bounded_ok = finite;
  r.positivity_ok = r.min_h > 0.0;
  r.compact_ok = r.boundary_min_H > sys.h_max();
  return r;
}

double density_level_variation(const HamiltonianSystem& sys, const std::vector<Vec2>& points) {
  if (points.empty()) return 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Vec2& p : points) {
    const double v = sys.h(p);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return (hi - lo) / std::max(std::abs(hi), 1e-300);
}

}  // namespace hamavg
