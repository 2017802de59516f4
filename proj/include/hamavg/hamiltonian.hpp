#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hamavg/geometry.hpp"

namespace hamavg {

using ScalarField = std::function<double(Vec2)>;
using VectorField = std::function<Vec2(Vec2)>;
using MatrixField = std::function<Sym2(Vec2)>;

enum class Builtin { H1, H1_plateau, H2, H3 };
enum class DriftSpec { zero, grad_H, custom };
enum class DensitySpec { lebesgue, gibbs, custom };

std::string to_string(Builtin b);
std::string to_string(DriftSpec d);
std::string to_string(DensitySpec d);
Builtin parse_builtin(const std::string& s);
DriftSpec parse_drift(const std::string& s);
DensitySpec parse_density(const std::string& s);

// User-supplied drift e with its divergence.
struct DriftCallbacks {
  VectorField e;
  ScalarField div_e;
};

// User-supplied density h with analytic derivatives.
struct DensityCallbacks {
  ScalarField h;
  VectorField grad_h;
  ScalarField laplacian_h;
};

// Region of positive area on which H is constant; becomes a mass vertex.
struct Plateau {
  Vec2 center;
  double radius = 0.0;

  bool contains(Vec2 p, double slack = 0.0) const { return norm(p - center) <= radius + slack; }
};

// Analytic problem data for dY = (1/alpha) A grad H dt - e dt + sqrt(2 eps) dB,
// together with the reference density h and the truncation box.
//
// Immutable after construction.
class HamiltonianSystem {
 public:
  struct Parts {
    std::string name;
    ScalarField H;
    VectorField grad_H;
    ScalarField laplacian_H;
    MatrixField hessian_H;  // may be empty; finite differences of grad_H are used then
    DriftCallbacks drift;
    DensityCallbacks density;
    double epsilon = 1.0;
    Rect domain;
    double h_max = 1.0;
    std::vector<Plateau> plateaus;
    bool fast_flow_is_rotation = false;  // A grad H(x) == A x
    bool assumption_relaxed = false;
    DriftSpec drift_spec = DriftSpec::custom;
    DensitySpec density_spec = DensitySpec::custom;
  };

  explicit HamiltonianSystem(Parts parts);

  const std::string& name() const { return p_.name; }
  double H(Vec2 x) const { return p_.H(x); }
  Vec2 grad_H(Vec2 x) const { return p_.grad_H(x); }
  double laplacian_H(Vec2 x) const { return p_.laplacian_H(x); }
  Sym2 hessian_H(Vec2 x) const;
  Vec2 drift(Vec2 x) const { return p_.drift.e(x); }
  double div_drift(Vec2 x) const { return p_.drift.div_e(x); }
  double h(Vec2 x) const { return p_.density.h(x); }
  Vec2 grad_h(Vec2 x) const { return p_.density.grad_h(x); }
  double laplacian_h(Vec2 x) const { return p_.density.laplacian_h(x); }

  // A grad H, the generator of the fast flow.
  Vec2 symplectic_gradient(Vec2 x) const { return rotate_ccw(grad_H(x)); }
  // F = e + (eps/h) grad h
  Vec2 field_F(Vec2 x) const;
  // div(hF) = grad h . e + h div e + eps lap h
  double div_hF(Vec2 x) const;

  double epsilon() const { return p_.epsilon; }
  const Rect& domain() const { return p_.domain; }
  double h_max() const { return p_.h_max; }
  const std::vector<Plateau>& plateaus() const { return p_.plateaus; }
  bool fast_flow_is_rotation() const { return p_.fast_flow_is_rotation; }
  bool assumption_relaxed() const { return p_.assumption_relaxed; }
  DriftSpec drift_spec() const { return p_.drift_spec; }
  DensitySpec density_spec() const { return p_.density_spec; }
  const Parts& parts() const { return p_; }

  // Copies with a different noise level / truncation; callbacks that depend on
  // epsilon (Gibbs density) are rebuilt by make_builtin, so only custom systems
  // should be re-parameterized through this.
  HamiltonianSystem with_truncation(Rect domain, double h_max) const;

 private:
  Parts p_;
};

struct BuiltinOptions {
  Builtin name = Builtin::H1;
  DriftSpec drift = DriftSpec::zero;
  DensitySpec density = DensitySpec::lebesgue;
  double epsilon = 0.5;
  std::optional<Rect> domain;    // default per builtin
  std::optional<double> h_max;   // default per builtin
  std::optional<DriftCallbacks> custom_drift;
  std::optional<DensityCallbacks> custom_density;
};

HamiltonianSystem make_builtin(const BuiltinOptions& opts);

// Convenience overload mirroring the common call shape.
HamiltonianSystem make_builtin(Builtin name, DriftSpec drift, DensitySpec density, double epsilon);

struct AssumptionReport {
  double max_h_divergence = 0.0;      // max over grid of div(hF)/h
  double max_abs_h_divergence = 0.0;  // sup |div(hF)/h|
  double max_F = 0.0;                 // sup |F|
  double min_h = 0.0;
  double boundary_min_H = 0.0;        // min of H on the box boundary
  double h_max = 0.0;
  double tolerance = 0.0;
  bool supermedian_ok = false;        // div(hF) <= tol
  bool bounded_ok = false;            // F and div(hF)/h finite on the grid
  bool positivity_ok = false;         // h > 0
  bool compact_ok = false;            // H > h_max on the boundary
  bool assumption_relaxed = false;    // C^1-only Hamiltonian (plateau example)

  bool pass() const { return supermedian_ok && bounded_ok && positivity_ok && compact_ok; }
};

AssumptionReport check_assumptions(const HamiltonianSystem& sys, const Rect& domain, int n_grid,
                                   double tol = 1e-9);

// Max relative spread of h along a set of points (level-curve nodes).
double density_level_variation(const HamiltonianSystem& sys, const std::vector<Vec2>& points);

}  // namespace hamavg
