#include "hamavg/graph_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "hamavg/errors.hpp"
#include "hamavg/sde.hpp"

namespace hamavg {

namespace {

bool t_like(int field) { return field == fT || field == fQ || field == fc || field == fd; }

// Basis functions of the near-vertex expansion.
std::vector<std::function<double(double)>> basis(VertexKind kind, int field) {
  using F = std::function<double(double)>;
  const bool t = t_like(field);
  switch (kind) {
    case VertexKind::saddle:
      if (t)
        return {F([](double) { return 1.0; }), F([](double d) { return std::log(d); }), F([](double d) { return d; }),
                F([](double d) { return d * std::log(d); })};
      return {F([](double) { return 1.0; }), F([](double d) { return d; }), F([](double d) { return d * std::log(d); })};
    case VertexKind::plateau:
      if (t)
        return {F([](double d) { return 1.0 / std::sqrt(d); }), F([](double) { return 1.0; }),
                F([](double d) { return std::sqrt(d); }), F([](double d) { return d; })};
      return {F([](double) { return 1.0; }), F([](double d) { return std::sqrt(d); }), F([](double d) { return d; })};
    default:
      if (t) return {F([](double) { return 1.0; }), F([](double d) { return d; }), F([](double d) { return d * d; })};
      return {F([](double d) { return d; }), F([](double d) { return d * d; })};
  }
}

double field_of(const CoefficientSample& s, int f) {
  switch (f) {
    case fT: return s.T;
    case fP: return s.P();
    case fQ: return s.B1 * s.T;
    case fR: return -s.B0 * s.T;
    case fa: return s.a;
    case fb: return s.b;
    case fc: return s.c;
    default: return s.d;
  }
}

}  // namespace

double NearFit::eval(int field, double delta) const {
  delta = std::max(delta, 1e-300);
  const auto b = basis(kind, field);
  double v = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) v += coef[field][i] * b[i](delta);
  return v;
}

void EdgeTable::finalize() {
  interp_.clear();
  for (int f = 0; f < kFields; ++f) {
    std::vector<double> x = m_grid, y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) y[i] = field_of(samples[i], f);
    interp_.emplace_back(std::move(x), std::move(y));
  }
  auto fit = [&](NearFit& nf, bool lo) {
    if (!nf.active) return;
    const std::size_t n = std::min<std::size_t>(6, samples.size());
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = lo ? i : samples.size() - 1 - i;
    nf.zone = std::abs(m_grid[idx[1]] - nf.m0);
    for (int f = 0; f < kFields; ++f) {
      const auto b = basis(nf.kind, f);
      Eigen::MatrixXd A(n, b.size());
      Eigen::VectorXd y(n);
      for (std::size_t r = 0; r < n; ++r) {
        const double d = std::abs(m_grid[idx[r]] - nf.m0) / span();
        for (std::size_t c = 0; c < b.size(); ++c) A(r, c) = b[c](d);
        y(r) = field_of(samples[idx[r]], f);
      }
      const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
      nf.coef[f].assign(c.data(), c.data() + c.size());
      if (f == fT) {
        const Eigen::VectorXd res = A * c - y;
        nf.rms_T = std::sqrt(res.squaredNorm() / n) / (y.cwiseAbs().maxCoeff() + 1e-300);
        nf.log_coef_T = nf.kind == VertexKind::saddle ? -c(1) : 0.0;
      }
    }
  };
  fit(near_lo, true);
  fit(near_hi, false);
}

double EdgeTable::raw(int field, double m) const {
  if (near_lo.active && m - m_lo < near_lo.zone) return near_lo.eval(field, (m - m_lo) / span());
  if (near_hi.active && m_hi - m < near_hi.zone) return near_hi.eval(field, (m_hi - m) / span());
  m = std::clamp(m, m_grid.front(), m_grid.back());
  return interp_[field](m);
}

CoefficientSample EdgeTable::at(double m) const {
  CoefficientSample s;
  s.m = m;
  s.T = raw(fT, m);
  s.S2 = raw(fP, m) / s.T;
  s.B0 = -raw(fR, m) / s.T;
  s.B1 = raw(fQ, m) / s.T;
  s.a = raw(fa, m);
  s.b = raw(fb, m);
  s.c = raw(fc, m);
  s.d = raw(fd, m);
  return s;
}

double EdgeTable::S2(double m) const { return raw(fP, m) / raw(fT, m); }

double EdgeTable::drift(double m) const { return (epsilon * raw(fQ, m) - raw(fR, m)) / raw(fT, m); }

double EdgeTable::diffusion(double m) const { return std::max(0.0, epsilon * S2(m)); }

double EdgeTable::max_err_est() const {
  double e = 0.0;
  for (const auto& s : samples) e = std::max(e, s.err_est);
  return e;
}

std::vector<EdgeTable> build_tables(const ReebGraph& graph, const HamiltonianSystem& sys, const TableOptions& opts) {
  if (opts.n_levels < 8) throw ConfigError("n_levels must be at least 8");
  std::vector<EdgeTable> tables(graph.edges.size());
  struct Job {
    int table;
    std::size_t slot;
  };
  std::vector<Job> jobs;
  for (const Edge& e : graph.edges) {
    EdgeTable& t = tables[e.id];
    t.edge_id = e.id;
    t.m_lo = e.m_lo;
    t.m_hi = e.m_hi;
    t.v_lo = e.v_lo;
    t.v_hi = e.v_hi;
    t.epsilon = sys.epsilon();
    const bool hi_finite = graph.vertices[e.v_hi].kind != VertexKind::infinity;
    std::vector<double> g;
    for (int i = 1; i < opts.n_levels - 1; ++i) g.push_back(e.m_lo + e.span() * i / (opts.n_levels - 1));
    for (int k = opts.k_min; k <= opts.k_max; ++k) {
      g.push_back(e.m_lo + e.span() * std::ldexp(1.0, -k));
      if (hi_finite) g.push_back(e.m_hi - e.span() * std::ldexp(1.0, -k));
    }
    if (!hi_finite) g.push_back(e.m_hi);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(), [&](double a, double b) { return b - a < 1e-12 * e.span(); }), g.end());
    t.m_grid = g;
    t.samples.resize(g.size());
    t.near_lo.active = true;
    t.near_lo.kind = graph.vertices[e.v_lo].kind;
    t.near_lo.m0 = e.m_lo;
    t.near_hi.active = hi_finite;
    t.near_hi.kind = graph.vertices[e.v_hi].kind;
    t.near_hi.m0 = e.m_hi;
    for (std::size_t i = 0; i < g.size(); ++i) jobs.push_back({e.id, i});
  }
  parallel_for(static_cast<int>(jobs.size()), opts.threads, [&](int j) {
    EdgeTable& t = tables[jobs[j].table];
    const double m = t.m_grid[jobs[j].slot];
    t.samples[jobs[j].slot] = coefficient_sample_refined(sys, graph.seed_at(sys, t.edge_id, m), opts.trace);
  });
  for (auto& t : tables) t.finalize();
  return tables;
}

double alpha_from_table(const EdgeTable& t, int vertex_id) {
  const bool lo = vertex_id == t.v_lo;
  const double m0 = lo ? t.m_lo : t.m_hi;
  const bool flat = (lo ? t.near_lo : t.near_hi).kind == VertexKind::plateau;
  const std::size_t n = 4;
  Eigen::MatrixXd A(n, flat ? 3 : 2);
  Eigen::VectorXd y(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = lo ? r : t.samples.size() - 1 - r;
    const double d = std::abs(t.m_grid[i] - m0) / t.span();
    A(r, 0) = 1.0;
    A(r, 1) = d;
    if (flat) A(r, 2) = std::sqrt(d);
    y(r) = t.samples[i].P();
  }
  return A.colPivHouseholderQr().solve(y)(0);
}

std::string to_string(BoundaryClass b) {
  switch (b) {
    case BoundaryClass::entrance: return "entrance";
    case BoundaryClass::exit: return "exit";
    case BoundaryClass::regular: return "regular";
    case BoundaryClass::natural: return "natural";
  }
  return "?";
}

std::string to_string(VertexBehavior b) {
  switch (b) {
    case VertexBehavior::walsh_split: return "walsh_split";
    case VertexBehavior::reflect_cap: return "reflect_cap";
    case VertexBehavior::entrance: return "entrance";
    case VertexBehavior::sticky: return "sticky";
  }
  return "?";
}

FellerReport feller_test(const EdgeTable& table, const Vertex& vertex) {
  FellerReport rep;
  if (vertex.kind == VertexKind::infinity) return rep;  // reflecting cap by decree
  if (!(table.epsilon > 0)) throw InconclusiveClassification("Feller test needs eps > 0");
  const bool lo = vertex.id == table.v_lo;
  const double sign = lo ? 1.0 : -1.0;
  const double m0 = lo ? table.m_lo : table.m_hi;
  const double d0 = 0.1 * table.span();

  // Grid uniform in u = log(delta), from delta0 * 2^-40 up to delta0.
  const int per_octave = 32, octaves = 40;
  const int n = per_octave * octaves + 1;
  const double du = std::log(2.0) / per_octave;
  std::vector<double> delta(n), logA(n), ratio(n);
  for (int i = 0; i < n; ++i) {
    delta[i] = d0 * std::exp(-(n - 1 - i) * du);
    const double m = m0 + sign * delta[i];
    const double A = table.diffusion(m);
    if (!(A > 0)) throw InconclusiveClassification("vanishing diffusion coefficient near the vertex");
    logA[i] = std::log(A);
    ratio[i] = sign * table.drift(m) / A;
  }
  // L(delta) = int_{delta0}^{delta} mu/A; log s = -L, log speed = L - log A.
  std::vector<double> L(n, 0.0);
  for (int i = n - 2; i >= 0; --i)
    L[i] = L[i + 1] - 0.5 * du * (ratio[i] * delta[i] + ratio[i + 1] * delta[i + 1]);

  auto truncated = [&](int start, bool sigma) {
    // sigma: int S[dmin, x] m(x) dx; else int M[dmin, x] s(x) dx.
    double inner = 0.0, outer = 0.0;
    double prev_f = 0.0, prev_g = 0.0;
    for (int i = start; i < n; ++i) {
      const double s = std::exp(-L[i]) * delta[i];
      const double mm = std::exp(L[i] - logA[i]) * delta[i];
      const double f = sigma ? s : mm;
      const double g = sigma ? mm : s;
      if (i > start) inner += 0.5 * du * (prev_f + f);
      const double cur = inner * g;
      if (i > start) outer += 0.5 * du * (prev_g + cur);
      prev_f = f;
      prev_g = cur;
    }
    return outer;
  };
  auto decide = [&](bool sigma, double& last) {
    const int cut[3] = {n - 1 - 20 * per_octave, n - 1 - 30 * per_octave, 0};
    double v[3];
    for (int k = 0; k < 3; ++k) v[k] = truncated(cut[k], sigma);
    last = v[2];
    const double d1 = v[1] - v[0], d2 = v[2] - v[1];
    if (!std::isfinite(v[2])) return false;
    if (d2 <= 1e-3 * std::abs(v[2])) return true;
    if (d2 >= 0.5 * d1) return false;
    std::ostringstream os;
    os << "truncated " << (sigma ? "accessibility" : "entrance") << " integral does not settle (" << v[0] << ", "
       << v[1] << ", " << v[2] << ")";
    throw InconclusiveClassification(os.str());
  };
  rep.sigma_finite = decide(true, rep.sigma);
  rep.nu_finite = decide(false, rep.nu);
  rep.cls = rep.sigma_finite ? (rep.nu_finite ? BoundaryClass::regular : BoundaryClass::exit)
                             : (rep.nu_finite ? BoundaryClass::entrance : BoundaryClass::natural);
  return rep;
}

BoundaryClass classify_boundary(const EdgeTable& table, const Vertex& vertex) { return feller_test(table, vertex).cls; }

std::vector<VertexRule> make_rules(const ReebGraph& graph, const std::vector<EdgeTable>& tables, double delta_v_rel,
                                   bool classify) {
  std::vector<VertexRule> rules;
  for (const Vertex& v : graph.vertices) {
    VertexRule r;
    r.vertex_id = v.id;
    const auto inc = v.incident();
    double min_span = std::numeric_limits<double>::infinity();
    for (int e : inc) min_span = std::min(min_span, graph.edges[e].span());
    r.delta_v = delta_v_rel * min_span;
    double total = 0.0;
    std::map<int, double> alpha;
    for (int e : inc) {
      alpha[e] = v.alpha.count(e) ? v.alpha.at(e) : alpha_from_table(tables[e], v.id);
      total += std::max(0.0, alpha[e]);
    }
    for (int e : inc) r.split_probs[e] = total > 0 ? std::max(0.0, alpha[e]) / total : 1.0 / inc.size();

    if (v.kind == VertexKind::infinity) {
      r.behavior = VertexBehavior::reflect_cap;
      r.delta_v = 0.0;
      for (int e : inc) r.classification[e] = BoundaryClass::regular;
    } else if (v.kind == VertexKind::plateau) {
      r.behavior = VertexBehavior::sticky;
      if (total > 0 && v.mass > 0) {
        r.hold_rate = tables[inc.front()].epsilon * total / (v.mass * r.delta_v);
      } else {
        r.hold_rate = 0.0;
        r.warning = "sticky vertex with zero total flux weight is absorbing";
      }
      if (v.gamma != 0.0) {
        std::ostringstream os;
        os << (r.warning.empty() ? "" : "; ") << "gamma(O) = " << v.gamma << " at mass vertex";
        r.warning += os.str();
      }
    } else if (inc.size() == 1) {
      r.behavior = VertexBehavior::entrance;
      r.delta_v = 0.0;
    } else {
      r.behavior = VertexBehavior::walsh_split;
      if (total <= 0) r.warning = "all alpha_i(O) vanish; uniform splitting used";
    }
    if (classify && v.kind != VertexKind::infinity) {
      for (int e : inc) {
        try {
          r.classification[e] = classify_boundary(tables[e], v);
        } catch (const InconclusiveClassification& ex) {
          r.warning += (r.warning.empty() ? "" : "; ") + std::string(ex.what());
        }
      }
    }
    rules.push_back(r);
  }
  return rules;
}

void validate(const GraphSimConfig& cfg) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(cfg.dt > 0)) fail("graph_sde.dt must be positive");
  if (!(cfg.t_end >= 0)) fail("graph_sde.t_end must be non-negative");
  if (cfg.t_end > 0 && cfg.dt > cfg.t_end) fail("graph_sde.dt must not exceed t_end");
  if (cfg.n_paths < 1) fail("graph_sde.n_paths must be at least 1");
  if (!(cfg.delta_v_rel > 0 && cfg.delta_v_rel < 0.5)) fail("graph_sde.delta_v must lie in (0, 0.5)");
  double prev = -1.0;
  for (double t : cfg.snapshot_times) {
    if (t < 0 || t > cfg.t_end * (1 + 1e-12)) fail("graph_sde snapshot time outside [0, t_end]");
    if (t <= prev) fail("graph_sde snapshot times must be strictly increasing");
    if (std::abs(std::lround(t / cfg.dt) * cfg.dt - t) > 1e-9 * std::max(1.0, t))
      fail("graph_sde snapshot times must be multiples of dt");
    prev = t;
  }
}

InitialLawGraph InitialLawGraph::point(GraphPoint p) {
  InitialLawGraph law;
  law.add(p, 1.0);
  return law;
}

InitialLawGraph& InitialLawGraph::add(GraphPoint p, double weight) {
  atoms_.push_back(p);
  cdf_.push_back((cdf_.empty() ? 0.0 : cdf_.back()) + weight);
  return *this;
}

GraphPoint InitialLawGraph::sample(RngStream& rng) const {
  if (atoms_.empty()) throw ConfigError("empty initial law on the graph");
  if (atoms_.size() == 1) return atoms_.front();
  const double u = rng.uniform() * cdf_.back();
  const std::size_t i = std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin();
  return atoms_[std::min(i, atoms_.size() - 1)];
}

int GraphEnsemble::snapshot_index(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
  std::ostringstream os;
  os << "no snapshot at t = " << t;
  throw MissingSnapshot(os.str());
}

namespace {

struct PathState {
  int edge = -1;
  double m = 0.0;
  int held_at = -1;     // vertex id while holding
  double hold_left = 0.0;
};

struct PathStats {
  std::map<int, std::map<int, long>> splits;
  long rejections = 0;
  long hits = 0;
};

class GraphStepper {
 public:
  GraphStepper(const std::vector<EdgeTable>& t, const ReebGraph& g, const std::vector<VertexRule>& r)
      : tables_(t), graph_(g), rules_(r) {}

  // Leave vertex v onto an edge chosen by its rule, at distance d from v.
  bool release(int v, double d, PathState& st, RngStream& rng, PathStats& stats) const {
    const VertexRule& rule = rules_[v];
    int e = rule.split_probs.begin()->first;
    if (rule.split_probs.size() > 1) {
      const double u = rng.uniform();
      double acc = 0.0;
      for (auto [edge, p] : rule.split_probs) {
        e = edge;
        acc += p;
        if (u < acc) break;
      }
    }
    const Edge& ed = graph_.edges[e];
    if (!(d < ed.span())) return false;
    st.edge = e;
    st.m = ed.v_lo == v ? ed.m_lo + d : ed.m_hi - d;
    st.held_at = -1;
    if (rule.behavior == VertexBehavior::walsh_split || rule.behavior == VertexBehavior::sticky) ++stats.splits[v][e];
    return true;
  }

  void enter_vertex(int v, double r, PathState& st, RngStream& rng, PathStats& stats, bool& ok) const {
    const VertexRule& rule = rules_[v];
    ++stats.hits;
    switch (rule.behavior) {
      case VertexBehavior::sticky:
        st.held_at = v;
        st.edge = -1;
        st.m = graph_.vertices[v].level;
        st.hold_left = rule.hold_rate > 0 ? rng.exponential() / rule.hold_rate : std::numeric_limits<double>::infinity();
        ok = true;
        return;
      case VertexBehavior::walsh_split:
        ok = release(v, 2 * rule.delta_v - r, st, rng, stats);
        return;
      default: {
        // Mirror at the vertex level.
        const Edge& ed = graph_.edges[st.edge];
        const double d = -r;
        ok = d > 0 && d < ed.span();
        if (ok) st.m = ed.v_lo == v ? ed.m_lo + d : ed.m_hi - d;
        return;
      }
    }
  }

  void advance(PathState& st, double h, RngStream& rng, PathStats& stats, int depth) const {
    if (st.held_at >= 0) {
      if (st.hold_left > h) {
        st.hold_left -= h;
        return;
      }
      release(st.held_at, rules_[st.held_at].delta_v, st, rng, stats);
      return;
    }
    const EdgeTable& t = tables_[st.edge];
    const Edge& ed = graph_.edges[st.edge];
    const double xi = rng.normal();
    const double mp = st.m + t.drift(st.m) * h + std::sqrt(2 * t.diffusion(st.m) * h) * xi;
    const double dlo = rules_[ed.v_lo].delta_v, dhi = rules_[ed.v_hi].delta_v;
    PathState next = st;
    bool ok = true;
    if (mp <= ed.m_lo + dlo && mp >= ed.m_hi - dhi) {
      ok = false;
    } else if (mp <= ed.m_lo + dlo) {
      enter_vertex(ed.v_lo, mp - ed.m_lo, next, rng, stats, ok);
    } else if (mp >= ed.m_hi - dhi) {
      enter_vertex(ed.v_hi, ed.m_hi - mp, next, rng, stats, ok);
    } else {
      next.m = mp;
    }
    if (ok) {
      st = next;
      return;
    }
    ++stats.rejections;
    if (depth >= 30) return;  // keep the current state
    advance(st, 0.5 * h, rng, stats, depth + 1);
    advance(st, 0.5 * h, rng, stats, depth + 1);
  }

  GraphPoint snapshot(const PathState& st) const {
    if (st.held_at >= 0) return GraphPoint::at_vertex(st.held_at, graph_.vertices[st.held_at].level);
    return GraphPoint::on_edge(st.edge, st.m);
  }

 private:
  const std::vector<EdgeTable>& tables_;
  const ReebGraph& graph_;
  const std::vector<VertexRule>& rules_;
};

}  // namespace

GraphEnsemble simulate_graph(const std::vector<EdgeTable>& tables, const ReebGraph& graph,
                             const std::vector<VertexRule>& rules, const GraphSimConfig& cfg,
                             const InitialLawGraph& init) {
  validate(cfg);
  if (tables.size() != graph.edges.size() || rules.size() != graph.vertices.size())
    throw ConfigError("tables/rules do not match the graph");
  std::vector<int> steps;
  const int n_steps = static_cast<int>(std::lround(cfg.t_end / cfg.dt));
  if (cfg.snapshot_times.empty()) steps.push_back(n_steps);
  for (double t : cfg.snapshot_times) steps.push_back(static_cast<int>(std::lround(t / cfg.dt)));

  GraphEnsemble ens;
  for (int s : steps) ens.times.push_back(s * cfg.dt);
  ens.points.assign(cfg.n_paths, std::vector<GraphPoint>(steps.size()));
  std::vector<PathStats> stats(cfg.n_paths);
  const GraphStepper stepper(tables, graph, rules);

  parallel_for(cfg.n_paths, cfg.threads, [&](int p) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(p));
    PathStats& ps = stats[p];
    PathState st;
    const GraphPoint g0 = init.sample(rng);
    if (g0.is_vertex()) {
      const VertexRule& rule = rules[g0.vertex];
      if (rule.behavior == VertexBehavior::sticky) {
        bool ok = true;
        stepper.enter_vertex(g0.vertex, 0.0, st, rng, ps, ok);
      } else {
        stepper.release(g0.vertex, std::max(rule.delta_v, 1e-12 * graph.edges[rule.split_probs.begin()->first].span()),
                        st, rng, ps);
      }
    } else {
      st.edge = g0.edge;
      st.m = g0.m;
    }
    std::size_t next = 0;
    for (int k = 0;; ++k) {
      while (next < steps.size() && steps[next] == k) ens.points[p][next++] = stepper.snapshot(st);
      if (next >= steps.size()) break;
      stepper.advance(st, cfg.dt, rng, ps, 0);
    }
  });
  for (const auto& ps : stats) {
    ens.step_rejections += ps.rejections;
    ens.vertex_hits += ps.hits;
    for (const auto& [v, m] : ps.splits)
      for (const auto& [e, c] : m) ens.split_counts[v][e] += c;
  }
  return ens;
}

}  // namespace hamavg
