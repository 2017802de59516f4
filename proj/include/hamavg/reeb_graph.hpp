#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hamavg/geometry.hpp"
#include "hamavg/hamiltonian.hpp"
#include "hamavg/levelset.hpp"

namespace hamavg {

enum class VertexKind { minimum, saddle, maximum, plateau, infinity };

std::string to_string(VertexKind k);

struct CriticalPoint {
  Vec2 point;
  double level = 0.0;
  VertexKind kind = VertexKind::minimum;
};

// Newton on grad H = 0 from an n_seed x n_seed lattice; declared plateaus are
// reported once (their centre) with kind plateau.
std::vector<CriticalPoint> find_critical_points(const HamiltonianSystem& sys, const Rect& domain, int n_seed = 24,
                                                double dedup_tol = 1e-6);

struct Vertex {
  int id = -1;
  double level = 0.0;
  VertexKind kind = VertexKind::minimum;
  Vec2 position;                       // a representative point of pi^{-1}(O)
  std::vector<Vec2> critical_points;   // all critical points in the component
  double mass = 0.0;                   // Lebesgue area of pi^{-1}(O)
  double gamma = 0.0;                  // -int div e over pi^{-1}(O)
  std::map<int, double> alpha;         // edge id -> alpha_i(O)
  std::vector<int> J_plus;             // incident edges with levels above
  std::vector<int> J_minus;            // incident edges with levels below

  bool is_point_vertex() const { return kind != VertexKind::plateau && kind != VertexKind::infinity; }
  std::vector<int> incident() const;
};

struct Edge {
  int id = -1;
  double m_lo = 0.0;
  double m_hi = 0.0;
  int v_lo = -1;
  int v_hi = -1;
  // Points of the edge's components with their levels, one per flood-fill band.
  std::vector<std::pair<double, Vec2>> anchors;

  double span() const { return m_hi - m_lo; }
  bool contains(double m) const { return m > m_lo && m < m_hi; }
};

// Either a point (edge, m) strictly inside an edge or a vertex.
struct GraphPoint {
  int edge = -1;
  int vertex = -1;
  double m = 0.0;

  static GraphPoint on_edge(int e, double m) { return {e, -1, m}; }
  static GraphPoint at_vertex(int v, double level) { return {-1, v, level}; }
  bool is_vertex() const { return vertex >= 0; }
  bool operator==(const GraphPoint&) const = default;
};

struct ReebOptions {
  int resolution = 256;          // grid nodes per axis of the flood-fill atlas
  int n_seed = 24;               // critical-point search lattice
  bool check_refinement = true;  // rebuild at 2x resolution and compare counts
  bool compute_vertex_data = true;
  TraceOptions trace;
};

class ReebGraph {
 public:
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::string system_name;
  double h_max = 0.0;
  Rect domain;
  int resolution = 0;
  std::vector<double> critical_levels;  // distinct, ascending
  std::vector<double> eta;              // half-width of the thin set around each critical level
  double vertex_band_rel = 1e-9;        // vertex_band = vertex_band_rel * max(1, |level|)

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }
  bool is_tree() const;
  int infinity_vertex_count() const;

  double level(const GraphPoint& p) const { return p.is_vertex() ? vertices[p.vertex].level : p.m; }
  double vertex_band(double level) const;

  GraphPoint project_point(const HamiltonianSystem& sys, Vec2 x) const;
  double distance(const GraphPoint& p, const GraphPoint& q) const;
  double vertex_distance(int a, int b) const { return vdist_[a * vertices.size() + b]; }

  // A point on edge e at level m, by gradient continuation from the nearest anchor.
  Vec2 seed_at(const HamiltonianSystem& sys, int e, double m) const;

  // Bounding box of the atlas nodes on edge e, padded by two cells.
  Rect edge_box(int e) const;

  // Other endpoint of edge e seen from vertex v.
  int opposite(int e, int v) const { return edges[e].v_lo == v ? edges[e].v_hi : edges[e].v_lo; }

  // Flood-fill atlas; public for diagnostics and JSON dumps.
  struct Component {
    bool thin = false;
    int level_index = -1;  // thin: critical level index; band: index of the band (between levels k-1 and k)
    int edge = -1;
    int vertex = -1;
  };
  std::vector<int> labels;  // resolution^2, component id or -1 above h_max
  std::vector<Component> components;

  void finalize_distances();

 private:
  int band_of(double m) const;  // returns 2k+1 for thin level k, 2j for band j
  int node_component(int i, int j) const { return labels[static_cast<std::size_t>(j) * resolution + i]; }
  Vec2 node_position(int i, int j) const;
  int locate(Vec2 x, int klass, bool strict) const;
  std::vector<double> vdist_;
};

ReebGraph build_reeb_graph(const HamiltonianSystem& sys, const Rect& domain, const ReebOptions& opts = {});
ReebGraph build_reeb_graph(const HamiltonianSystem& sys, const ReebOptions& opts = {});

// Levels m_O +/- span * 2^-k used for limits at a vertex along an edge.
std::vector<double> vertex_approach_levels(const ReebGraph& g, int vertex_id, int edge_id, int k_min = 13,
                                           int k_max = 16);

// alpha_i(O), gamma(O) and mass for one vertex.
Vertex vertex_data(const ReebGraph& graph, const HamiltonianSystem& sys, int vertex_id, const TraceOptions& opts = {});

// Tree path distance rho.
inline double graph_distance(const ReebGraph& g, const GraphPoint& p, const GraphPoint& q) { return g.distance(p, q); }

}  // namespace hamavg
