#pragma once

#include <functional>
#include <map>
#include <vector>

#include "hamavg/graph_diffusion.hpp"
#include "hamavg/hamiltonian.hpp"
#include "hamavg/reeb_graph.hpp"

namespace hamavg {

// Smooth compactly supported function on R^2 with analytic derivatives.
struct TestFunction2D {
  ScalarField value;
  VectorField grad;
  ScalarField laplacian;
  Rect support;  // value and gradient vanish outside
};

// A exp(-|x - c|^2 / (2 s^2)) cut at 8 s.
TestFunction2D gaussian_bump(Vec2 center, double sigma, double amplitude = 1.0);
TestFunction2D zero_function();

struct FormValue {
  double sym = 0.0;
  double antisym = 0.0;
  double err_est = 0.0;  // Richardson (n vs n/2) plus a roundoff floor
  double total() const { return sym + antisym; }
};

// Tensor trapezoid evaluation of E_alpha(f, g) at n_grid^2 points over the
// common support.
FormValue form_E_alpha(const HamiltonianSystem& sys, const TestFunction2D& f, const TestFunction2D& g, double alpha,
                       int n_grid);

struct IbpResult {
  double residual = 0.0;  // |E(f,g) + <L f, g>_mu|
  double err_est = 0.0;
  double form = 0.0;
};

IbpResult ibp_residual(const HamiltonianSystem& sys, const TestFunction2D& f, const TestFunction2D& g, double alpha,
                       int n_grid);

// Function on the graph: one smooth profile per edge, zero outside [lo, hi].
struct GraphTestFunction {
  struct Piece {
    std::function<double(double)> u, du, d2u;
    double lo = 0.0, hi = 0.0;
  };
  std::map<int, Piece> pieces;  // edge id -> profile
  std::map<int, double> vertex_values;

  double value(const GraphPoint& p) const;
  double derivative(int edge, double m) const;
};

// A exp(-(m - c)^2 / (2 s^2)) on one edge, cut at 8 s.
GraphTestFunction::Piece gaussian_in_m(double center, double sigma, double amplitude = 1.0);

// Pull-back u o pi as a 2D test function; the edge of x is found through the atlas.
// graph, sys and u are captured by reference.
TestFunction2D pullback(const ReebGraph& graph, const HamiltonianSystem& sys, const GraphTestFunction& u);

enum class ChainRule { analytic, numerical };

// max over levels/edges of |oint A grad H . grad(v o pi) dl|.
double pullback_cancellation(const HamiltonianSystem& sys, const ReebGraph& graph, const GraphTestFunction& v,
                             const std::vector<std::pair<int, double>>& edge_levels, ChainRule mode,
                             const TraceOptions& opts = {});

struct ProjectedFormValue {
  double value = 0.0;
  double sym = 0.0;
  double antisym = 0.0;
  double vertex_term = 0.0;
  double err_est = 0.0;
};

// Per-edge Gauss-Legendre evaluation of the projected form with exact contour
// coefficients at the nodes.
ProjectedFormValue projected_form(const ReebGraph& graph, const HamiltonianSystem& sys, const GraphTestFunction& u,
                                  const GraphTestFunction& v, const TraceOptions& opts = {});

struct ProjectedMeasure {
  std::map<int, std::vector<std::pair<double, double>>> densities;  // edge -> (m, d(m)) on the table grid
  std::map<int, double> edge_mass;
  std::map<int, double> vertex_mass;  // theta(O) |pi^{-1}(O)|
  double total = 0.0;
};

ProjectedMeasure projected_measure(const ReebGraph& graph, const std::vector<EdgeTable>& tables,
                                   const HamiltonianSystem& sys);

// Midpoint quadrature of int_{H <= h_max} h dx on an n x n grid.
double mu_mass_2d(const HamiltonianSystem& sys, int n);

}  // namespace hamavg
