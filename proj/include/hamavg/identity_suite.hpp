#pragma once

#include <string>
#include <vector>

#include "hamavg/dirichlet.hpp"
#include "hamavg/graph_diffusion.hpp"
#include "hamavg/hamiltonian.hpp"
#include "hamavg/reeb_graph.hpp"

namespace hamavg {

struct IdentityCheck {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct IdentityOptions {
  std::vector<double> ibp_alphas{1.0, 0.05};
  int n_grid = 256;
  int n_levels = 10;            // interior levels per edge
  double lemma_dm = 1e-2;
  double bprime_dm_rel = 1e-3;  // times the edge span
  double flux_tol = 1e-3;
  double mass_tol = 1e-2;
  int mass_grid = 1024;
  TraceOptions trace;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  bool all_pass() const;
  const IdentityCheck& get(const std::string& name) const;
};

// Levels m_lo + (k + 1) / (n + 1) * span, k < n, with the span cut at h_max.
std::vector<double> interior_levels(const Edge& e, int n, double h_max);

IdentityCheck check_ibp(const HamiltonianSystem& sys, const IdentityOptions& opts = {});
IdentityCheck check_pullback(const HamiltonianSystem& sys, const ReebGraph& graph, const IdentityOptions& opts = {});
// 2D form of pulled-back Gaussians in m at alpha = 1 and 1e-3, plus the 1D projected form.
IdentityCheck check_alpha_indep(const HamiltonianSystem& sys, const ReebGraph& graph, const IdentityOptions& opts = {});
IdentityCheck check_bprime_eq_c(const HamiltonianSystem& sys, const ReebGraph& graph,
                                const IdentityOptions& opts = {});
IdentityCheck check_flux(const ReebGraph& graph, const IdentityOptions& opts = {});
// Relative residuals at lemma_dm and order of decay against lemma_dm / 2.
IdentityCheck check_derivative_lemma(const HamiltonianSystem& sys, const ReebGraph& graph,
                                     const IdentityOptions& opts = {});
IdentityCheck check_mass(const HamiltonianSystem& sys, const ReebGraph& graph, const std::vector<EdgeTable>& tables,
                         const IdentityOptions& opts = {});

// ibp, pullback, alpha_indep, bprime_eq_c, flux, derivative_lemma, mass.
IdentityReport run_identity_suite(const HamiltonianSystem& sys, const ReebGraph& graph,
                                  const std::vector<EdgeTable>& tables, const IdentityOptions& opts = {});

}  // namespace hamavg
