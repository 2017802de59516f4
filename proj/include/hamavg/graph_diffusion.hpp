#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <math.h>  // boost pchip calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>

#include "hamavg/hamiltonian.hpp"
#include "hamavg/levelset.hpp"
#include "hamavg/reeb_graph.hpp"
#include "hamavg/rng.hpp"

namespace hamavg {

// Fields carried by an edge table, stored as raw contour integrals:
// T, P = oint |grad H| dl, Q = oint lap H dl/|grad H|, R = oint e.grad H dl/|grad H|, a, b, c, d.
enum Field : int { fT = 0, fP, fQ, fR, fa, fb, fc, fd, kFields };

// Least-squares expansion of one end of an edge in delta = |m - m_O| / span.
struct NearFit {
  bool active = false;
  VertexKind kind = VertexKind::minimum;
  double m0 = 0.0;
  double zone = 0.0;  // fit used for delta * span < zone
  std::array<std::vector<double>, kFields> coef;
  double log_coef_T = 0.0;  // coefficient of log(delta) in T (saddles); k in T ~ k log(1/delta)
  double rms_T = 0.0;       // relative rms residual of the T fit on its samples

  double eval(int field, double delta) const;
};

class EdgeTable {
 public:
  int edge_id = -1;
  double m_lo = 0.0, m_hi = 0.0;
  int v_lo = -1, v_hi = -1;
  double epsilon = 0.0;
  std::vector<double> m_grid;
  std::vector<CoefficientSample> samples;
  NearFit near_lo, near_hi;

  void finalize();  // builds interpolants and near-vertex fits from the samples

  double raw(int field, double m) const;
  CoefficientSample at(double m) const;
  double S2(double m) const;
  double drift(double m) const;      // B0 + eps B1
  double diffusion(double m) const;  // eps S2 (clamped at 0)
  double span() const { return m_hi - m_lo; }
  // (L u)(m) for u' = du, u'' = d2u.
  double generator(double m, double du, double d2u) const { return diffusion(m) * d2u + drift(m) * du; }
  double max_err_est() const;

 private:
  std::vector<boost::math::interpolators::pchip<std::vector<double>>> interp_;
};

struct TableOptions {
  int n_levels = 24;   // uniform interior levels per edge
  int k_min = 3;       // clustering m_O +/- span 2^-k for k in [k_min, k_max]
  int k_max = 16;
  TraceOptions trace;
  int threads = 0;
};

std::vector<EdgeTable> build_tables(const ReebGraph& graph, const HamiltonianSystem& sys,
                                    const TableOptions& opts = {});

// alpha_i(O) recomputed from the table samples closest to the vertex.
double alpha_from_table(const EdgeTable& t, int vertex_id);

enum class BoundaryClass { entrance, exit, regular, natural };
std::string to_string(BoundaryClass b);

struct FellerReport {
  BoundaryClass cls = BoundaryClass::regular;
  double sigma = 0.0;  // truncated accessibility integral at the finest cutoff
  double nu = 0.0;     // truncated entrance integral at the finest cutoff
  bool sigma_finite = false;
  bool nu_finite = false;
};

// Feller test at the end of `table` incident to `vertex`; throws
// InconclusiveClassification if the truncated integrals do not settle.
FellerReport feller_test(const EdgeTable& table, const Vertex& vertex);
BoundaryClass classify_boundary(const EdgeTable& table, const Vertex& vertex);

enum class VertexBehavior { walsh_split, reflect_cap, entrance, sticky };
std::string to_string(VertexBehavior b);

struct VertexRule {
  int vertex_id = -1;
  VertexBehavior behavior = VertexBehavior::entrance;
  std::map<int, double> split_probs;  // edge id -> p_i
  double delta_v = 0.0;
  double hold_rate = 0.0;   // sticky: exponential holding rate; 0 -> absorbing
  std::map<int, BoundaryClass> classification;  // per incident edge, when conclusive
  std::string warning;
};

std::vector<VertexRule> make_rules(const ReebGraph& graph, const std::vector<EdgeTable>& tables,
                                   double delta_v_rel = 1e-3, bool classify = true);

struct GraphSimConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  int n_paths = 1000;
  std::uint64_t seed = 1;
  double delta_v_rel = 1e-3;
  std::vector<double> snapshot_times;  // empty -> {t_end}
  int threads = 0;
};

void validate(const GraphSimConfig& cfg);

// Finite mixture of points on the graph.
class InitialLawGraph {
 public:
  static InitialLawGraph point(GraphPoint p);
  InitialLawGraph& add(GraphPoint p, double weight);
  GraphPoint sample(RngStream& rng) const;
  bool empty() const { return atoms_.empty(); }

 private:
  std::vector<GraphPoint> atoms_;
  std::vector<double> cdf_;
};

struct GraphEnsemble {
  std::vector<double> times;
  std::vector<std::vector<GraphPoint>> points;       // [path][snapshot]
  std::map<int, std::map<int, long>> split_counts;   // vertex -> edge -> entries
  long step_rejections = 0;
  long vertex_hits = 0;

  int n_paths() const { return static_cast<int>(points.size()); }
  int snapshot_index(double t) const;
};

GraphEnsemble simulate_graph(const std::vector<EdgeTable>& tables, const ReebGraph& graph,
                             const std::vector<VertexRule>& rules, const GraphSimConfig& cfg,
                             const InitialLawGraph& init);

}  // namespace hamavg
