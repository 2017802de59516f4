#include "hamavg/reeb_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "hamavg/errors.hpp"

namespace hamavg {

std::string to_string(VertexKind k) {
  switch (k) {
    case VertexKind::minimum: return "minimum";
    case VertexKind::saddle: return "saddle";
    case VertexKind::maximum: return "maximum";
    case VertexKind::plateau: return "plateau";
    case VertexKind::infinity: return "infinity";
  }
  return "?";
}

std::vector<int> Vertex::incident() const {
  std::vector<int> out = J_minus;
  out.insert(out.end(), J_plus.begin(), J_plus.end());
  return out;
}

std::vector<CriticalPoint> find_critical_points(const HamiltonianSystem& sys, const Rect& domain, int n_seed,
                                                double dedup_tol) {
  std::vector<CriticalPoint> out;
  auto in_plateau = [&](Vec2 p, double slack) {
    return std::any_of(sys.plateaus().begin(), sys.plateaus().end(),
                       [&](const Plateau& pl) { return pl.contains(p, slack); });
  };
  for (const auto& pl : sys.plateaus()) out.push_back({pl.center, sys.H(pl.center), VertexKind::plateau});

  for (int a = 0; a < n_seed; ++a) {
    for (int b = 0; b < n_seed; ++b) {
      Vec2 x{domain.x0 + (a + 0.5) * domain.width() / n_seed, domain.y0 + (b + 0.5) * domain.height() / n_seed};
      if (in_plateau(x, 1e-3)) continue;
      bool ok = false;
      for (int it = 0; it < 80; ++it) {
        const Vec2 g = sys.grad_H(x);
        if (norm(g) <= 1e-13) {
          ok = true;
          break;
        }
        const Sym2 hs = sys.hessian_H(x);
        const double det = hs.det();
        if (det == 0.0) break;
        const Vec2 dx{(hs.yy * g.x - hs.xy * g.y) / det, (-hs.xy * g.x + hs.xx * g.y) / det};
        x -= dx;
        if (!domain.contains(x)) break;
        if (norm(dx) < 1e-15) {
          ok = norm(sys.grad_H(x)) <= 1e-9;
          break;
        }
      }
      if (!ok || !domain.contains(x) || in_plateau(x, 1e-6)) continue;
      if (sys.H(x) > sys.h_max()) continue;
      if (std::any_of(out.begin(), out.end(), [&](const CriticalPoint& c) { return norm(c.point - x) < dedup_tol; }))
        continue;
      const Sym2 hs = sys.hessian_H(x);
      const double scale = std::max(1.0, hs.frobenius() * hs.frobenius());
      if (std::abs(hs.det()) < 1e-8 * scale) {
        std::ostringstream os;
        os << "degenerate critical point at (" << x.x << ", " << x.y << ") of " << sys.name()
           << ", det Hess = " << hs.det();
        throw DegenerateCritical(os.str());
      }
      VertexKind kind = hs.det() < 0 ? VertexKind::saddle : (hs.trace() > 0 ? VertexKind::minimum : VertexKind::maximum);
      out.push_back({x, sys.H(x), kind});
    }
  }
  std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    if (a.level != b.level) return a.level < b.level;
    if (a.point.x != b.point.x) return a.point.x < b.point.x;
    return a.point.y < b.point.y;
  });
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int a) { return p[a] == a ? a : p[a] = find(p[a]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

[[noreturn]] void too_coarse(const std::string& why, int n) {
  std::ostringstream os;
  os << "flood-fill atlas at resolution " << n << " is inconsistent: " << why;
  throw ResolutionTooCoarse(os.str());
}

// Classification code of level m: 2k+1 inside the thin set of level k, 2j in band j.
int classify(double m, const std::vector<double>& levels, const std::vector<double>& eta) {
  int j = 0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (std::abs(m - levels[k]) < eta[k]) return static_cast<int>(2 * k + 1);
    if (levels[k] < m) j = static_cast<int>(k + 1);
  }
  return 2 * j;
}

ReebGraph build_topology(const HamiltonianSystem& sys, const Rect& domain, int n,
                         const std::vector<CriticalPoint>& crits, const std::vector<double>& levels,
                         const std::vector<double>& eta) {
  const double hx = domain.width() / (n - 1), hy = domain.height() / (n - 1);
  auto pos = [&](int i, int j) { return Vec2{domain.x0 + i * hx, domain.y0 + j * hy}; };
  const std::size_t nn = static_cast<std::size_t>(n) * n;

  std::vector<int> klass(nn, -1);
  std::vector<double> hval(nn);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const std::size_t id = static_cast<std::size_t>(j) * n + i;
      hval[id] = sys.H(pos(i, j));
      if (hval[id] <= sys.h_max()) klass[id] = classify(hval[id], levels, eta);
    }

  const int K = static_cast<int>(levels.size());
  auto band_mid = [&](int b) {
    const double lo = b == 0 ? levels[0] - 2 * eta[0] : levels[b - 1] + eta[b - 1];
    const double hi = b == K ? sys.h_max() : levels[b] - eta[b];
    return 0.5 * (lo + hi);
  };

  // 4-connected flood fill per class.
  std::vector<int> label(nn, -1);
  std::vector<ReebGraph::Component> comps;
  std::vector<std::pair<double, Vec2>> rep;  // band components: node closest to the band mid-level
  std::vector<int> stack;
  for (std::size_t s = 0; s < nn; ++s) {
    if (klass[s] < 0 || label[s] >= 0) continue;
    const int cid = static_cast<int>(comps.size());
    ReebGraph::Component c;
    c.thin = klass[s] % 2 == 1;
    c.level_index = klass[s] / 2;
    comps.push_back(c);
    const double target = c.thin ? levels[c.level_index] : band_mid(c.level_index);
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_p;
    stack.assign(1, static_cast<int>(s));
    label[s] = cid;
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      const int i = id % n, j = id / n;
      if (std::abs(hval[id] - target) < best) {
        best = std::abs(hval[id] - target);
        best_p = pos(i, j);
      }
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[0] >= n || q[1] < 0 || q[1] >= n) continue;
        const int qid = q[1] * n + q[0];
        if (label[qid] < 0 && klass[qid] == klass[s]) {
          label[qid] = cid;
          stack.push_back(qid);
        }
      }
    }
    rep.push_back({sys.H(best_p), best_p});
  }
  const int nc = static_cast<int>(comps.size());

  // Critical points into components.
  std::vector<std::vector<int>> crit_in(nc);
  for (std::size_t ci = 0; ci < crits.size(); ++ci) {
    const Vec2 p = crits[ci].point;
    const int i = std::clamp(static_cast<int>(std::lround((p.x - domain.x0) / hx)), 0, n - 1);
    const int j = std::clamp(static_cast<int>(std::lround((p.y - domain.y0) / hy)), 0, n - 1);
    const int cid = label[static_cast<std::size_t>(j) * n + i];
    if (cid < 0 || !comps[cid].thin) too_coarse("critical point not inside its thin set", n);
    crit_in[cid].push_back(static_cast<int>(ci));
  }

  // Adjacency.
  std::set<std::pair<int, int>> adj;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int a = label[static_cast<std::size_t>(j) * n + i];
      if (a < 0) continue;
      if (i + 1 < n) {
        const int b = label[static_cast<std::size_t>(j) * n + i + 1];
        if (b >= 0 && b != a) adj.insert({std::min(a, b), std::max(a, b)});
      }
      if (j + 1 < n) {
        const int b = label[static_cast<std::size_t>(j + 1) * n + i];
        if (b >= 0 && b != a) adj.insert({std::min(a, b), std::max(a, b)});
      }
    }
  std::vector<std::vector<int>> nbrs(nc);
  for (auto [a, b] : adj) {
    const auto &ca = comps[a], &cb = comps[b];
    if (ca.thin == cb.thin) too_coarse(ca.thin ? "thin sets of two levels touch" : "two bands touch", n);
    const auto& t = ca.thin ? ca : cb;
    const auto& bd = ca.thin ? cb : ca;
    if (bd.level_index != t.level_index && bd.level_index != t.level_index + 1)
      too_coarse("band touches a non-adjacent thin set", n);
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }

  // Edges: bands merged through regular thin components.
  UnionFind uf(nc);
  for (int c = 0; c < nc; ++c) {
    if (!comps[c].thin || !crit_in[c].empty()) continue;
    int below = -1, above = -1;
    for (int b : nbrs[c]) {
      if (comps[b].level_index == comps[c].level_index) {
        if (below >= 0 && below != b) too_coarse("regular level set touches two components below", n);
        below = b;
      } else {
        if (above >= 0 && above != b) too_coarse("regular level set touches two components above", n);
        above = b;
      }
    }
    if (below < 0 || above < 0) too_coarse("regular level set without neighbours on both sides", n);
    uf.unite(c, below);
    uf.unite(c, above);
  }

  ReebGraph g;
  g.system_name = sys.name();
  g.h_max = sys.h_max();
  g.domain = domain;
  g.resolution = n;
  g.critical_levels = levels;
  g.eta = eta;

  // Vertices.
  std::vector<int> vertex_comps;
  for (int c = 0; c < nc; ++c)
    if (comps[c].thin && !crit_in[c].empty()) vertex_comps.push_back(c);
  std::vector<Vertex> verts;
  for (int c : vertex_comps) {
    Vertex v;
    v.level = levels[comps[c].level_index];
    bool has_sad = false, has_pl = false, has_min = false, has_max = false;
    for (int ci : crit_in[c]) {
      v.critical_points.push_back(crits[ci].point);
      has_sad |= crits[ci].kind == VertexKind::saddle;
      has_pl |= crits[ci].kind == VertexKind::plateau;
      has_min |= crits[ci].kind == VertexKind::minimum;
      has_max |= crits[ci].kind == VertexKind::maximum;
    }
    v.kind = has_pl ? VertexKind::plateau
                    : (has_sad || (has_min && has_max)) ? VertexKind::saddle
                                                        : has_min ? VertexKind::minimum : VertexKind::maximum;
    v.position = v.critical_points.front();
    verts.push_back(v);
  }
  std::vector<int> vorder(verts.size());
  std::iota(vorder.begin(), vorder.end(), 0);
  std::sort(vorder.begin(), vorder.end(), [&](int a, int b) {
    if (verts[a].level != verts[b].level) return verts[a].level < verts[b].level;
    if (verts[a].position.x != verts[b].position.x) return verts[a].position.x < verts[b].position.x;
    return verts[a].position.y < verts[b].position.y;
  });
  std::vector<int> comp_vertex(nc, -1);
  for (std::size_t r = 0; r < vorder.size(); ++r) {
    g.vertices.push_back(verts[vorder[r]]);
    g.vertices.back().id = static_cast<int>(r);
    comp_vertex[vertex_comps[vorder[r]]] = static_cast<int>(r);
  }

  // Edge candidates keyed by union-find root.
  struct Proto {
    std::set<int> lo, hi;
    bool top = false;
    std::vector<std::pair<double, Vec2>> anchors;
  };
  std::map<int, Proto> protos;
  for (int c = 0; c < nc; ++c) {
    if (comps[c].thin) continue;
    Proto& p = protos[uf.find(c)];
    p.anchors.push_back(rep[c]);
    if (comps[c].level_index == K) p.top = true;
    for (int b : nbrs[c]) {
      if (comp_vertex[b] < 0) continue;
      (comps[b].level_index < comps[c].level_index ? p.lo : p.hi).insert(comp_vertex[b]);
    }
  }
  struct Pending {
    Edge e;
    int root;
  };
  std::vector<Pending> pend;
  for (auto& [root, p] : protos) {
    if (p.lo.size() != 1) too_coarse("edge without a unique lower vertex", n);
    if (p.top ? !p.hi.empty() : p.hi.size() != 1) too_coarse("edge without a unique upper end", n);
    Edge e;
    e.v_lo = *p.lo.begin();
    e.v_hi = p.top ? -1 : *p.hi.begin();
    e.m_lo = g.vertices[e.v_lo].level;
    e.m_hi = p.top ? sys.h_max() : g.vertices[e.v_hi].level;
    std::sort(p.anchors.begin(), p.anchors.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    e.anchors = p.anchors;
    pend.push_back({e, root});
  }
  std::sort(pend.begin(), pend.end(), [](const Pending& a, const Pending& b) {
    if (a.e.m_lo != b.e.m_lo) return a.e.m_lo < b.e.m_lo;
    if (a.e.v_lo != b.e.v_lo) return a.e.v_lo < b.e.v_lo;
    if (a.e.m_hi != b.e.m_hi) return a.e.m_hi < b.e.m_hi;
    const Vec2 pa = a.e.anchors.front().second, pb = b.e.anchors.front().second;
    return pa.x != pb.x ? pa.x < pb.x : pa.y < pb.y;
  });
  std::map<int, int> root_edge;
  for (auto& pe : pend) {
    Edge e = pe.e;
    e.id = static_cast<int>(g.edges.size());
    if (e.v_hi < 0) {
      Vertex inf;
      inf.id = static_cast<int>(g.vertices.size());
      inf.level = sys.h_max();
      inf.kind = VertexKind::infinity;
      inf.position = e.anchors.back().second;
      g.vertices.push_back(inf);
      e.v_hi = inf.id;
    }
    g.vertices[e.v_lo].J_plus.push_back(e.id);
    g.vertices[e.v_hi].J_minus.push_back(e.id);
    root_edge[pe.root] = e.id;
    g.edges.push_back(e);
  }

  for (int c = 0; c < nc; ++c) {
    if (comp_vertex[c] >= 0) {
      comps[c].vertex = comp_vertex[c];
    } else {
      auto it = root_edge.find(uf.find(c));
      if (it == root_edge.end()) too_coarse("component not attached to any edge", n);
      comps[c].edge = it->second;
    }
  }
  for (const auto& v : g.vertices)
    if (v.incident().empty() && g.vertices.size() > 1) too_coarse("isolated vertex", n);

  g.labels = std::move(label);
  g.components = std::move(comps);
  g.finalize_distances();
  return g;
}

std::string signature(const ReebGraph& g) {
  std::ostringstream os;
  os << g.n_vertices() << "/" << g.n_edges() << ":";
  for (const auto& v : g.vertices) os << to_string(v.kind) << v.incident().size() << ",";
  return os.str();
}

}  // namespace

bool ReebGraph::is_tree() const {
  if (edges.size() + 1 != vertices.size()) return false;
  for (double d : vdist_)
    if (!std::isfinite(d)) return false;
  return true;
}

int ReebGraph::infinity_vertex_count() const {
  return static_cast<int>(std::count_if(vertices.begin(), vertices.end(),
                                        [](const Vertex& v) { return v.kind == VertexKind::infinity; }));
}

double ReebGraph::vertex_band(double level) const { return vertex_band_rel * std::max(1.0, std::abs(level)); }

void ReebGraph::finalize_distances() {
  const std::size_t nv = vertices.size();
  vdist_.assign(nv * nv, std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < nv; ++s) {
    vdist_[s * nv + s] = 0.0;
    std::vector<int> stack{static_cast<int>(s)};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int e : vertices[v].incident()) {
        const int w = opposite(e, v);
        if (std::isinf(vdist_[s * nv + w])) {
          vdist_[s * nv + w] = vdist_[s * nv + v] + edges[e].span();
          stack.push_back(w);
        }
      }
    }
  }
}

int ReebGraph::band_of(double m) const { return classify(m, critical_levels, eta); }

Vec2 ReebGraph::node_position(int i, int j) const {
  return {domain.x0 + i * domain.width() / (resolution - 1), domain.y0 + j * domain.height() / (resolution - 1)};
}

// Component of class `klass` at x: unanimous cell corners, or (if !strict) the
// nearest node of that class within a few cells; -1 if none.
int ReebGraph::locate(Vec2 x, int klass, bool strict) const {
  auto comp_class = [&](int cid) {
    const auto& c = components[cid];
    return c.thin ? 2 * c.level_index + 1 : 2 * c.level_index;
  };
  const double hx = domain.width() / (resolution - 1), hy = domain.height() / (resolution - 1);
  const int i0 = std::clamp(static_cast<int>(std::floor((x.x - domain.x0) / hx)), 0, resolution - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor((x.y - domain.y0) / hy)), 0, resolution - 2);
  int common = -2;
  for (int dj = 0; dj < 2 && common != -1; ++dj)
    for (int di = 0; di < 2; ++di) {
      const int cid = node_component(i0 + di, j0 + dj);
      if (cid < 0 || comp_class(cid) != klass || (common >= 0 && cid != common)) {
        common = -1;
        break;
      }
      common = cid;
    }
  if (common >= 0 || strict) return common >= 0 ? common : -1;

  const int R = 4;
  double best = std::numeric_limits<double>::infinity();
  int found = -1;
  for (int j = std::max(0, j0 - R); j <= std::min(resolution - 1, j0 + 1 + R); ++j)
    for (int i = std::max(0, i0 - R); i <= std::min(resolution - 1, i0 + 1 + R); ++i) {
      const int cid = node_component(i, j);
      if (cid < 0 || comp_class(cid) != klass) continue;
      const double d = norm(node_position(i, j) - x);
      if (d < best) {
        best = d;
        found = cid;
      }
    }
  return found;
}

GraphPoint ReebGraph::project_point(const HamiltonianSystem& sys, Vec2 x) const {
  if (!domain.contains(x)) {
    std::ostringstream os;
    os << "point (" << x.x << ", " << x.y << ") outside the truncation domain";
    throw OutOfDomain(os.str());
  }
  const double m = sys.H(x);
  if (m > h_max) {
    std::ostringstream os;
    os << "H(x) = " << m << " exceeds h_max = " << h_max;
    throw OutOfDomain(os.str());
  }
  const int K = static_cast<int>(critical_levels.size());
  auto band_mid = [&](int b) {
    const double lo = b == 0 ? critical_levels[0] - 2 * eta[0] : critical_levels[b - 1] + eta[b - 1];
    const double hi = b == K ? h_max : critical_levels[b] - eta[b];
    return 0.5 * (lo + hi);
  };
  auto via_band = [&](int b) {
    const Vec2 y = flow_to_level(sys, x, band_mid(b));
    int cid = locate(y, 2 * b, true);
    if (cid < 0) cid = locate(y, 2 * b, false);
    if (cid < 0) throw ResolutionTooCoarse("projection could not locate a band component");
    return GraphPoint::on_edge(components[cid].edge, m);
  };

  const int cls = band_of(m);
  if (cls % 2 == 0) {
    const int cid = locate(x, cls, true);
    if (cid >= 0) return GraphPoint::on_edge(components[cid].edge, m);
    return via_band(cls / 2);
  }
  const int k = cls / 2;
  const double c = critical_levels[k];
  const int cid = locate(x, cls, false);
  if (cid >= 0 && components[cid].vertex < 0) return GraphPoint::on_edge(components[cid].edge, m);
  if (std::abs(m - c) <= vertex_band(c)) {
    if (cid >= 0) return GraphPoint::at_vertex(components[cid].vertex, vertices[components[cid].vertex].level);
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) {
      if (v.level != c || v.kind == VertexKind::infinity) continue;
      for (Vec2 p : v.critical_points)
        if (norm(p - x) < bd) {
          bd = norm(p - x);
          best = v.id;
        }
    }
    if (best >= 0) return GraphPoint::at_vertex(best, c);
  }
  return via_band(m > c ? k + 1 : k);
}

double ReebGraph::distance(const GraphPoint& p, const GraphPoint& q) const {
  if (!p.is_vertex() && !q.is_vertex() && p.edge == q.edge) return std::abs(p.m - q.m);
  auto ends = [&](const GraphPoint& a, std::pair<int, double> out[2]) {
    if (a.is_vertex()) {
      out[0] = {a.vertex, 0.0};
      return 1;
    }
    const Edge& e = edges[a.edge];
    out[0] = {e.v_lo, a.m - e.m_lo};
    out[1] = {e.v_hi, e.m_hi - a.m};
    return 2;
  };
  std::pair<int, double> ep[2], eq[2];
  const int np = ends(p, ep), nq = ends(q, eq);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nq; ++j)
      best = std::min(best, ep[i].second + vertex_distance(ep[i].first, eq[j].first) + eq[j].second);
  return best;
}

Rect ReebGraph::edge_box(int e) const {
  Rect box{std::numeric_limits<double>::max(), -std::numeric_limits<double>::max(),
           std::numeric_limits<double>::max(), -std::numeric_limits<double>::max()};
  for (int j = 0; j < resolution; ++j)
    for (int i = 0; i < resolution; ++i) {
      const int c = node_component(i, j);
      if (c < 0 || components[c].edge != e) continue;
      const Vec2 p = node_position(i, j);
      box = {std::min(box.x0, p.x), std::max(box.x1, p.x), std::min(box.y0, p.y), std::max(box.y1, p.y)};
    }
  if (!box.valid()) return {0, 0, 0, 0};
  const double cx = 2 * domain.width() / (resolution - 1), cy = 2 * domain.height() / (resolution - 1);
  return {std::max(domain.x0, box.x0 - cx), std::min(domain.x1, box.x1 + cx), std::max(domain.y0, box.y0 - cy),
          std::min(domain.y1, box.y1 + cy)};
}

Vec2 ReebGraph::seed_at(const HamiltonianSystem& sys, int e, double m) const {
  const Edge& ed = edges[e];
  const auto* best = &ed.anchors.front();
  for (const auto& a : ed.anchors)
    if (std::abs(a.first - m) < std::abs(best->first - m)) best = &a;
  return flow_to_level(sys, best->second, m);
}

ReebGraph build_reeb_graph(const HamiltonianSystem& sys, const Rect& domain, const ReebOptions& opts) {
  if (opts.resolution < 16) throw ConfigError("reeb graph resolution must be at least 16");
  const auto crits = find_critical_points(sys, domain, opts.n_seed);
  if (crits.empty()) throw DegenerateCritical("no critical point below h_max in the domain");

  std::vector<double> levels;
  for (const auto& c : crits)
    if (levels.empty() || c.level - levels.back() > 1e-9 * std::max(1.0, std::abs(c.level)))
      levels.push_back(c.level);
  std::vector<double> eta(levels.size());
  for (std::size_t k = 0; k < levels.size(); ++k) {
    double gap = (k + 1 < levels.size() ? levels[k + 1] : sys.h_max()) - levels[k];
    if (k > 0) gap = std::min(gap, levels[k] - levels[k - 1]);
    eta[k] = 0.25 * gap;
  }

  ReebGraph g = build_topology(sys, domain, opts.resolution, crits, levels, eta);
  if (opts.check_refinement) {
    const ReebGraph fine = build_topology(sys, domain, 2 * opts.resolution - 1, crits, levels, eta);
    if (signature(fine) != signature(g))
      too_coarse("vertex/edge structure changes at double resolution (" + signature(g) + " vs " + signature(fine) +
                     ")",
                 opts.resolution);
  }
  if (!g.is_tree()) too_coarse("orbit graph is not a tree", opts.resolution);
  if (opts.compute_vertex_data)
    for (int v = 0; v < g.n_vertices(); ++v) g.vertices[v] = vertex_data(g, sys, v, opts.trace);
  return g;
}

ReebGraph build_reeb_graph(const HamiltonianSystem& sys, const ReebOptions& opts) {
  return build_reeb_graph(sys, sys.domain(), opts);
}

std::vector<double> vertex_approach_levels(const ReebGraph& g, int vertex_id, int edge_id, int k_min, int k_max) {
  const Edge& e = g.edges[edge_id];
  const double sign = e.v_lo == vertex_id ? 1.0 : -1.0;
  const double m0 = g.vertices[vertex_id].level;
  std::vector<double> out;
  for (int k = k_min; k <= k_max; ++k) out.push_back(m0 + sign * e.span() * std::ldexp(1.0, -k));
  return out;
}

Vertex vertex_data(const ReebGraph& graph, const HamiltonianSystem& sys, int vertex_id, const TraceOptions& opts) {
  Vertex v = graph.vertices[vertex_id];
  v.alpha.clear();
  v.mass = 0.0;
  v.gamma = 0.0;
  if (v.kind == VertexKind::infinity) return v;

  auto P = [&](const LevelCurve& c) {
    return contour_integral(c, [&](Vec2 x) { return norm(sys.grad_H(x)); }, Weight::dl);
  };
  for (int e : v.incident()) {
    // Least squares on the four levels closest to the vertex: a + b delta, with an
    // extra sqrt(delta) term at plateaus where H is only C^1.
    const bool flat = v.kind == VertexKind::plateau;
    const auto levels = vertex_approach_levels(graph, vertex_id, e);
    Eigen::MatrixXd A(levels.size(), flat ? 3 : 2);
    Eigen::VectorXd y(levels.size());
    for (std::size_t r = 0; r < levels.size(); ++r) {
      const double d = std::abs(levels[r] - v.level) / graph.edges[e].span();
      A(r, 0) = 1.0;
      A(r, 1) = d;
      if (flat) A(r, 2) = std::sqrt(d);
      y(r) = P(trace_level_curve(sys, graph.seed_at(sys, e, levels[r]), opts));
    }
    v.alpha[e] = A.colPivHouseholderQr().solve(y)(0);
  }

  if (v.kind == VertexKind::plateau) {
    using GL = boost::math::quadrature::gauss<double, 30>;
    for (const auto& pl : sys.plateaus()) {
      if (norm(pl.center - v.position) > 1e-12) continue;
      const int n_theta = 256;
      double mass = 0.0, gamma = 0.0;
      for (int t = 0; t < n_theta; ++t) {
        const double th = 2 * M_PI * t / n_theta;
        const Vec2 dir{std::cos(th), std::sin(th)};
        mass += GL::integrate([&](double r) { return r; }, 0.0, pl.radius);
        gamma -= GL::integrate([&](double r) { return r * sys.div_drift(pl.center + dir * r); }, 0.0, pl.radius);
      }
      v.mass += mass * 2 * M_PI / n_theta;
      v.gamma += gamma * 2 * M_PI / n_theta;
    }
  }
  return v;
}

}  // namespace hamavg
