#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hamavg/graph_diffusion.hpp"
#include "hamavg/reeb_graph.hpp"
#include "hamavg/sde.hpp"

namespace hamavg {

enum class MarginalSource { projected_2d, graph };
std::string to_string(MarginalSource s);

struct Atom {
  GraphPoint point;
  double weight = 0.0;
};

struct EmpiricalMarginal {
  std::vector<Atom> atoms;
  double t = 0.0;
  MarginalSource source = MarginalSource::graph;
  int n_effective = 0;  // paths alive at t
  int n_total = 0;

  double total_weight() const;
  double deficit() const { return n_total > 0 ? 1.0 - static_cast<double>(n_effective) / n_total : 0.0; }
};

// Uniform weights 1/n_total on alive paths; atoms on the same edge closer than
// coalesce_tol in m (or at the same vertex) are merged.
EmpiricalMarginal empirical_marginal(const ProjectedEnsemble& ens, double t, double coalesce_tol = 1e-12);
EmpiricalMarginal empirical_marginal(const GraphEnsemble& ens, double t, double coalesce_tol = 1e-12);
EmpiricalMarginal make_marginal(std::vector<Atom> atoms, double coalesce_tol = 1e-12);

// Exact W1 under the tree metric by integrating |F_P - F_Q| over every edge,
// F being the mass beyond the cut. With `condition`, both marginals are
// normalized first; otherwise totals differing by more than weight_tol throw
// WeightMismatch.
double w1_tree_distance(const EmpiricalMarginal& P, const EmpiricalMarginal& Q, const ReebGraph& graph,
                        bool condition = true, double weight_tol = 1e-9);

// Two-sample KS statistic on the levels, edge ids ignored.
double ks_on_H(const EmpiricalMarginal& P, const EmpiricalMarginal& Q);

// Split the marginal's source paths into even/odd halves.
std::pair<EmpiricalMarginal, EmpiricalMarginal> split_halves(const GraphEnsemble& ens, double t);

struct StudyConfig {
  std::vector<double> alphas;
  std::vector<double> times;
  SdeConfig sde;            // alpha, snapshot_times and t_end are set per row
  GraphSimConfig graph;
  double max_deficit = 0.005;
  double noise_factor = 2.0;
};

struct ConvergenceRow {
  double alpha = 0.0;
  double t = 0.0;
  double w1 = 0.0;
  double ks = 0.0;
  double deficit = 0.0;
  bool valid = true;
  int anomalies = 0;
};

struct ConvergenceReport {
  std::vector<double> alphas;
  std::vector<double> times;
  std::vector<ConvergenceRow> rows;      // alpha-major, in the order of `alphas`
  std::map<double, double> noise_floor;  // t -> split-half W1 of the reference
  std::string verdict;                   // PASS, FAIL or NA
  std::string reason;
  double runtime_2d = 0.0, runtime_graph = 0.0;
};

// Shared initial law: Liouville measure on C(m0) of `edge` and the point (edge, m0) on the graph.
std::pair<InitialLaw2D, InitialLawGraph> level_set_initial_law(const HamiltonianSystem& sys, const ReebGraph& graph,
                                                               int edge, double m0, const TraceOptions& opts = {});

ConvergenceReport convergence_study(const HamiltonianSystem& sys, const ReebGraph& graph,
                                    const std::vector<EdgeTable>& tables, const std::vector<VertexRule>& rules,
                                    const StudyConfig& cfg, const InitialLaw2D& init2d,
                                    const InitialLawGraph& init_graph);

// Excursions of 2D paths through a point vertex: a crossing starts when
// |H - m_O| < r_in and ends at |H - m_O| >= r_out, recording the edge entered.
struct CrossingCounts {
  int vertex = -1;
  std::map<int, long> entries;      // edge id -> crossings ending on it
  std::map<int, double> expected;   // edge id -> alpha_i / sum alpha
  long total = 0;
  long breaches = 0;

  double proportion(int edge) const;
  double standard_error(int edge) const;  // binomial, from the expected proportion
  // Cluster-robust standard error treating each path as one cluster (crossings of
  // one path are correlated).
  double cluster_standard_error(int edge) const;

  std::vector<std::map<int, long>> per_path;
};

CrossingCounts saddle_crossings(const HamiltonianSystem& sys, const ReebGraph& graph, int vertex, const SdeConfig& cfg,
                                const InitialLaw2D& init, double r_in, double r_out);

// Liouville laws on the levels m_O +/- r of every edge at the vertex, mixed with weights alpha_i.
InitialLaw2D vertex_initial_law(const HamiltonianSystem& sys, const ReebGraph& graph, int vertex, double r,
                                const TraceOptions& opts = {});

// Verdict from already computed rows: for every t, distances non-increasing in
// decreasing alpha within one noise floor, and the last one <= noise_factor * floor.
void assess(ConvergenceReport& report, double noise_factor = 2.0);

}  // namespace hamavg
