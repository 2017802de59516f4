#include "hamavg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <tuple>

#include "hamavg/errors.hpp"

namespace hamavg {

std::string to_string(MarginalSource s) { return s == MarginalSource::graph ? "graph" : "2d-projected"; }

double EmpiricalMarginal::total_weight() const {
  double s = 0.0;
  for (const Atom& a : atoms) s += a.weight;
  return s;
}

EmpiricalMarginal make_marginal(std::vector<Atom> atoms, double coalesce_tol) {
  auto key = [](const Atom& a) { return std::tuple(a.point.vertex, a.point.edge, a.point.m); };
  std::sort(atoms.begin(), atoms.end(), [&](const Atom& a, const Atom& b) { return key(a) < key(b); });
  EmpiricalMarginal out;
  for (const Atom& a : atoms) {
    if (!out.atoms.empty()) {
      Atom& last = out.atoms.back();
      const bool same_vertex = a.point.is_vertex() && last.point.vertex == a.point.vertex;
      const bool same_edge_point = !a.point.is_vertex() && !last.point.is_vertex() && last.point.edge == a.point.edge &&
                                   std::abs(last.point.m - a.point.m) <= coalesce_tol;
      if (same_vertex || same_edge_point) {
        last.weight += a.weight;
        continue;
      }
    }
    out.atoms.push_back(a);
  }
  return out;
}

EmpiricalMarginal empirical_marginal(const ProjectedEnsemble& ens, double t, double coalesce_tol) {
  int s = -1;
  for (std::size_t i = 0; i < ens.times.size(); ++i)
    if (std::abs(ens.times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) s = static_cast<int>(i);
  if (s < 0) {
    std::ostringstream os;
    os << "no snapshot at t = " << t;
    throw MissingSnapshot(os.str());
  }
  const int n = ens.n_paths();
  std::vector<Atom> atoms;
  int alive = 0;
  for (const auto& path : ens.points)
    if (static_cast<int>(path.size()) > s) {
      atoms.push_back({path[s], 1.0 / n});
      ++alive;
    }
  EmpiricalMarginal m = make_marginal(std::move(atoms), coalesce_tol);
  m.t = t;
  m.source = MarginalSource::projected_2d;
  m.n_effective = alive;
  m.n_total = n;
  return m;
}

EmpiricalMarginal empirical_marginal(const GraphEnsemble& ens, double t, double coalesce_tol) {
  const int s = ens.snapshot_index(t);
  const int n = ens.n_paths();
  std::vector<Atom> atoms;
  for (const auto& path : ens.points) atoms.push_back({path[s], 1.0 / n});
  EmpiricalMarginal m = make_marginal(std::move(atoms), coalesce_tol);
  m.t = t;
  m.source = MarginalSource::graph;
  m.n_effective = n;
  m.n_total = n;
  return m;
}

std::pair<EmpiricalMarginal, EmpiricalMarginal> split_halves(const GraphEnsemble& ens, double t) {
  const int s = ens.snapshot_index(t);
  std::vector<Atom> even, odd;
  const int n = ens.n_paths();
  for (int p = 0; p < n; ++p) (p % 2 ? odd : even).push_back({ens.points[p][s], 1.0});
  for (Atom& a : even) a.weight = 1.0 / even.size();
  for (Atom& a : odd) a.weight = 1.0 / odd.size();
  std::pair<EmpiricalMarginal, EmpiricalMarginal> out{make_marginal(std::move(even)), make_marginal(std::move(odd))};
  for (auto* m : {&out.first, &out.second}) {
    m->t = t;
    m->source = MarginalSource::graph;
    m->n_effective = m->n_total = static_cast<int>(m->atoms.size());
  }
  return out;
}

namespace {

struct Masses {
  std::vector<double> vertex;                  // mass sitting on each vertex
  std::vector<std::vector<Atom>> edge_atoms;   // atoms on each edge, sorted by m
  std::vector<double> edge;                    // total mass on each edge
};

Masses distribute(const EmpiricalMarginal& P, const ReebGraph& g, double scale) {
  Masses m;
  m.vertex.assign(g.n_vertices(), 0.0);
  m.edge_atoms.resize(g.n_edges());
  m.edge.assign(g.n_edges(), 0.0);
  for (const Atom& a : P.atoms) {
    const double w = a.weight * scale;
    if (a.point.is_vertex()) {
      m.vertex.at(a.point.vertex) += w;
    } else {
      m.edge_atoms.at(a.point.edge).push_back({a.point, w});
      m.edge[a.point.edge] += w;
    }
  }
  for (auto& v : m.edge_atoms)
    std::sort(v.begin(), v.end(), [](const Atom& x, const Atom& y) { return x.point.m < y.point.m; });
  return m;
}

// Vertices on the v_hi side of edge e.
std::vector<char> far_side(const ReebGraph& g, int e) {
  std::vector<char> in(g.n_vertices(), 0);
  std::vector<int> stack{g.edges[e].v_hi};
  in[g.edges[e].v_hi] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int f : g.vertices[v].incident()) {
      if (f == e) continue;
      const int w = g.opposite(f, v);
      if (!in[w]) {
        in[w] = 1;
        stack.push_back(w);
      }
    }
  }
  return in;
}

double side_mass(const ReebGraph& g, const Masses& m, const std::vector<char>& side) {
  double s = 0.0;
  for (int v = 0; v < g.n_vertices(); ++v)
    if (side[v]) s += m.vertex[v];
  for (const Edge& f : g.edges)
    if (side[f.v_lo] && side[f.v_hi]) s += m.edge[f.id];
  return s;
}

}  // namespace

double w1_tree_distance(const EmpiricalMarginal& P, const EmpiricalMarginal& Q, const ReebGraph& graph,
                        bool condition, double weight_tol) {
  const double wp = P.total_weight(), wq = Q.total_weight();
  if (!(wp > 0) || !(wq > 0)) throw WeightMismatch("W1 needs two non-empty marginals");
  if (!condition && std::abs(wp - wq) > weight_tol) {
    std::ostringstream os;
    os << "total weights differ: " << wp << " vs " << wq;
    throw WeightMismatch(os.str());
  }
  const Masses mp = distribute(P, graph, condition ? 1.0 / wp : 1.0);
  const Masses mq = distribute(Q, graph, condition ? 1.0 / wq : 1.0);
  double w1 = 0.0;
  for (const Edge& e : graph.edges) {
    const auto side = far_side(graph, e.id);
    double fp = side_mass(graph, mp, side), fq = side_mass(graph, mq, side);
    // Merge the two atom lists, sweeping from the top of the edge down.
    const auto& ap = mp.edge_atoms[e.id];
    const auto& aq = mq.edge_atoms[e.id];
    std::size_t ip = ap.size(), iq = aq.size();
    double top = e.m_hi;
    while (ip > 0 || iq > 0) {
      const double mp_next = ip > 0 ? ap[ip - 1].point.m : -INFINITY;
      const double mq_next = iq > 0 ? aq[iq - 1].point.m : -INFINITY;
      const double m = std::max(mp_next, mq_next);
      if (fp != fq) {
        if (std::isinf(top)) throw WeightMismatch("mass escapes to infinity along edge " + std::to_string(e.id));
        w1 += std::abs(fp - fq) * (top - m);
      }
      while (ip > 0 && ap[ip - 1].point.m == m) fp += ap[--ip].weight;
      while (iq > 0 && aq[iq - 1].point.m == m) fq += aq[--iq].weight;
      top = m;
    }
    if (fp != fq) w1 += std::abs(fp - fq) * (top - e.m_lo);
  }
  return w1;
}

double ks_on_H(const EmpiricalMarginal& P, const EmpiricalMarginal& Q) {
  auto levels = [](const EmpiricalMarginal& M) {
    std::vector<std::pair<double, double>> v;
    const double tot = M.total_weight();
    for (const Atom& a : M.atoms) v.push_back({a.point.m, a.weight / tot});
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto p = levels(P), q = levels(Q);
  std::size_t i = 0, j = 0;
  double fp = 0, fq = 0, d = 0;
  while (i < p.size() || j < q.size()) {
    const double m = std::min(i < p.size() ? p[i].first : INFINITY, j < q.size() ? q[j].first : INFINITY);
    while (i < p.size() && p[i].first == m) fp += p[i++].second;
    while (j < q.size() && q[j].first == m) fq += q[j++].second;
    d = std::max(d, std::abs(fp - fq));
  }
  return std::min(d, 1.0);
}

std::pair<InitialLaw2D, InitialLawGraph> level_set_initial_law(const HamiltonianSystem& sys, const ReebGraph& graph,
                                                               int edge, double m0, const TraceOptions& opts) {
  if (edge < 0 || edge >= graph.n_edges() || !graph.edges[edge].contains(m0))
    throw ConfigError("initial level must lie strictly inside the chosen edge");
  const LevelCurve c = trace_level_curve(sys, graph.seed_at(sys, edge, m0), opts);
  return {InitialLaw2D::level_curve(c, InitialLaw2D::CurveMeasure::liouville),
          InitialLawGraph::point(GraphPoint::on_edge(edge, m0))};
}

double CrossingCounts::proportion(int edge) const {
  auto it = entries.find(edge);
  return total > 0 && it != entries.end() ? static_cast<double>(it->second) / total : 0.0;
}

double CrossingCounts::standard_error(int edge) const {
  const double p = expected.at(edge);
  return total > 0 ? std::sqrt(p * (1 - p) / total) : INFINITY;
}

double CrossingCounts::cluster_standard_error(int edge) const {
  const double p = proportion(edge);
  double ss = 0.0;
  int clusters = 0;
  for (const auto& counts : per_path) {
    long n = 0;
    for (const auto& [e, c] : counts) n += c;
    auto it = counts.find(edge);
    const double r = (it == counts.end() ? 0.0 : it->second) - p * n;
    ss += r * r;
    ++clusters;
  }
  if (total == 0 || clusters < 2) return INFINITY;
  return std::sqrt(ss * clusters / (clusters - 1.0)) / total;
}

CrossingCounts saddle_crossings(const HamiltonianSystem& sys, const ReebGraph& graph, int vertex, const SdeConfig& cfg,
                                const InitialLaw2D& init, double r_in, double r_out) {
  validate(cfg);
  if (!(r_in > 0 && r_out > r_in)) throw ConfigError("crossing radii must satisfy 0 < r_in < r_out");
  const Vertex& v = graph.vertices.at(vertex);
  CrossingCounts out;
  out.vertex = vertex;
  double sum = 0.0;
  for (const auto& [e, a] : v.alpha) sum += a;
  for (const auto& [e, a] : v.alpha) {
    out.expected[e] = a / sum;
    out.entries[e] = 0;
  }
  auto& per_path = out.per_path;
  per_path.assign(cfg.n_paths, {});
  std::vector<char> dead(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, cfg.threads, [&](int p) {
    bool armed = false;
    auto& counts = per_path[p];
    auto obs = [&](int, Vec2, Vec2 y) {
      const double d = std::abs(sys.H(y) - v.level);
      if (d < r_in) {
        armed = true;
      } else if (armed && d >= r_out) {
        armed = false;
        const GraphPoint gp = graph.project_point(sys, y);
        if (!gp.is_vertex() && v.alpha.count(gp.edge)) ++counts[gp.edge];
      }
    };
    std::vector<Vec2> snaps;
    int death = -1;
    dead[p] = simulate_path(sys, cfg, init, p, snaps, death, obs) ? 0 : 1;
  });
  for (int p = 0; p < cfg.n_paths; ++p) {
    out.breaches += dead[p];
    for (const auto& [e, c] : per_path[p]) {
      out.entries[e] += c;
      out.total += c;
    }
  }
  return out;
}

InitialLaw2D vertex_initial_law(const HamiltonianSystem& sys, const ReebGraph& graph, int vertex, double r,
                                const TraceOptions& opts) {
  const Vertex& v = graph.vertices.at(vertex);
  InitialLaw2D law;
  for (const auto& [e, a] : v.alpha) {
    const Edge& ed = graph.edges[e];
    const double m = ed.v_lo == vertex ? v.level + r : v.level - r;
    if (!ed.contains(m)) throw ConfigError("offset level leaves edge " + std::to_string(e));
    const LevelCurve c = trace_level_curve(sys, graph.seed_at(sys, e, m), opts);
    law.add(InitialLaw2D::level_curve(c), a);
  }
  return law;
}

void assess(ConvergenceReport& r, double noise_factor) {
  if (r.alphas.size() < 2) {
    r.verdict = "NA";
    r.reason = "a single alpha gives no trend";
    return;
  }
  std::vector<std::size_t> order(r.alphas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.alphas[a] > r.alphas[b]; });
  const std::size_t nt = r.times.size();
  std::ostringstream why;
  bool ok = true;
  for (const auto& row : r.rows)
    if (!row.valid) {
      ok = false;
      why << "alpha=" << row.alpha << " t=" << row.t << ": deficit " << row.deficit << " too large; ";
    }
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = r.times[k];
    const double floor = r.noise_floor.at(t);
    for (std::size_t i = 1; i < order.size(); ++i) {
      const auto& big = r.rows[order[i - 1] * nt + k];
      const auto& small = r.rows[order[i] * nt + k];
      if (small.w1 > big.w1 + floor) {
        ok = false;
        why << "t=" << t << ": W1 rises from " << big.w1 << " (alpha=" << big.alpha << ") to " << small.w1
            << " (alpha=" << small.alpha << "); ";
      }
    }
    const auto& last = r.rows[order.back() * nt + k];
    if (last.w1 > noise_factor * floor) {
      ok = false;
      why << "t=" << t << ": final W1 " << last.w1 << " > " << noise_factor << " x floor " << floor << "; ";
    }
  }
  r.verdict = ok ? "PASS" : "FAIL";
  r.reason = why.str();
}

ConvergenceReport convergence_study(const HamiltonianSystem& sys, const ReebGraph& graph,
                                    const std::vector<EdgeTable>& tables, const std::vector<VertexRule>& rules,
                                    const StudyConfig& cfg, const InitialLaw2D& init2d,
                                    const InitialLawGraph& init_graph) {
  if (cfg.alphas.empty()) throw ConfigError("study needs at least one alpha");
  if (cfg.times.empty()) throw ConfigError("study needs at least one time");
  ConvergenceReport r;
  r.alphas = cfg.alphas;
  r.times = cfg.times;
  std::sort(r.times.begin(), r.times.end());
  const double t_end = r.times.back();
  using clock = std::chrono::steady_clock;

  auto t0 = clock::now();
  GraphSimConfig gc = cfg.graph;
  gc.snapshot_times = r.times;
  gc.t_end = t_end;
  const GraphEnsemble ref = simulate_graph(tables, graph, rules, gc, init_graph);
  std::vector<EmpiricalMarginal> ref_marg;
  for (double t : r.times) {
    ref_marg.push_back(empirical_marginal(ref, t));
    const auto halves = split_halves(ref, t);
    r.noise_floor[t] = w1_tree_distance(halves.first, halves.second, graph);
  }
  r.runtime_graph = std::chrono::duration<double>(clock::now() - t0).count();

  t0 = clock::now();
  for (double alpha : cfg.alphas) {
    SdeConfig sc = cfg.sde;
    sc.alpha = alpha;
    sc.snapshot_times = r.times;
    sc.t_end = t_end;
    const Ensemble ens = simulate_paths(sys, sc, init2d);
    const ProjectedEnsemble proj = project_trajectory(graph, sys, ens);
    for (std::size_t k = 0; k < r.times.size(); ++k) {
      const EmpiricalMarginal m = empirical_marginal(proj, r.times[k]);
      ConvergenceRow row;
      row.alpha = alpha;
      row.t = r.times[k];
      row.deficit = m.deficit();
      row.valid = row.deficit <= cfg.max_deficit;
      row.anomalies = proj.anomalies;
      row.w1 = m.n_effective > 0 ? w1_tree_distance(m, ref_marg[k], graph) : INFINITY;
      row.ks = m.n_effective > 0 ? ks_on_H(m, ref_marg[k]) : 1.0;
      r.rows.push_back(row);
    }
  }
  r.runtime_2d = std::chrono::duration<double>(clock::now() - t0).count();
  assess(r, cfg.noise_factor);
  return r;
}

}  // namespace hamavg
