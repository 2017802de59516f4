#include "hamavg/sde.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "hamavg/errors.hpp"

namespace hamavg {

std::string to_string(Scheme s) { return s == Scheme::splitting ? "splitting" : "euler_maruyama"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "splitting") return Scheme::splitting;
  if (s == "euler_maruyama") return Scheme::euler_maruyama;
  throw ConfigError("unknown scheme '" + s + "' (expected splitting or euler_maruyama)");
}

int SdeConfig::n_steps() const { return static_cast<int>(std::lround(t_end / dt)); }

std::vector<int> SdeConfig::snapshot_steps() const {
  std::vector<int> out;
  if (snapshot_times.empty()) {
    out.push_back(n_steps());
    return out;
  }
  for (double t : snapshot_times) out.push_back(static_cast<int>(std::lround(t / dt)));
  return out;
}

void validate(const SdeConfig& cfg) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(cfg.alpha > 0)) fail("alpha must be positive");
  if (!(cfg.dt > 0)) fail("dt must be positive");
  if (!(cfg.t_end >= 0)) fail("t_end must be non-negative");
  if (cfg.t_end > 0 && cfg.dt > cfg.t_end) fail("dt must not exceed t_end");
  if (cfg.n_paths < 1) fail("n_paths must be at least 1");
  if (cfg.fast_substeps_cap < 1) fail("fast_substeps_cap must be at least 1");
  if (cfg.scheme == Scheme::euler_maruyama && cfg.dt > 0.1 * cfg.alpha)
    fail("euler_maruyama requires dt <= 0.1 * alpha");
  if (cfg.t_end > 0 && std::abs(cfg.n_steps() * cfg.dt - cfg.t_end) > 1e-9 * cfg.t_end)
    fail("t_end must be a multiple of dt");
  double prev = -1.0;
  for (double t : cfg.snapshot_times) {
    if (t < 0 || t > cfg.t_end * (1 + 1e-12)) fail("snapshot time outside [0, t_end]");
    if (t <= prev) fail("snapshot times must be strictly increasing");
    if (std::abs(std::lround(t / cfg.dt) * cfg.dt - t) > 1e-9 * std::max(1.0, t))
      fail("snapshot times must be multiples of dt");
    prev = t;
  }
}

Vec2 fast_flow(const HamiltonianSystem& sys, Vec2 x, double dt, double alpha, int substeps_cap) {
  if (sys.fast_flow_is_rotation()) {
    const double th = dt / alpha;
    const double c = std::cos(th), s = std::sin(th);
    return {c * x.x - s * x.y, s * x.x + c * x.y};
  }
  const double m = sys.H(x);
  const int n = std::clamp(static_cast<int>(std::ceil(4.0 * dt / alpha)), 1, substeps_cap);
  const double h = dt / n;
  auto f = [&](Vec2 p) { return sys.symplectic_gradient(p) / alpha; };
  for (int k = 0; k < n; ++k) {
    const Vec2 k1 = f(x);
    const Vec2 k2 = f(x + k1 * (0.5 * h));
    const Vec2 k3 = f(x + k2 * (0.5 * h));
    const Vec2 k4 = f(x + k3 * h);
    x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
  }
  return project_to_level(sys, x, m);
}

Vec2 step(const HamiltonianSystem& sys, const SdeConfig& cfg, Vec2 x, Vec2 xi1, Vec2 xi2) {
  const double eps = sys.epsilon();
  if (cfg.scheme == Scheme::euler_maruyama) {
    return x + (sys.symplectic_gradient(x) / cfg.alpha - sys.drift(x)) * cfg.dt + xi1 * std::sqrt(2 * eps * cfg.dt);
  }
  const double half = 0.5 * cfg.dt;
  const double amp = std::sqrt(2 * eps * half);
  x = x - sys.drift(x) * half + xi1 * amp;
  x = fast_flow(sys, x, cfg.dt, cfg.alpha, cfg.fast_substeps_cap);
  return x - sys.drift(x) * half + xi2 * amp;
}

InitialLaw2D InitialLaw2D::point(Vec2 x) {
  InitialLaw2D law;
  Part p;
  p.x = x;
  law.parts_.push_back(p);
  law.rebuild();
  return law;
}

InitialLaw2D InitialLaw2D::level_curve(const LevelCurve& c, CurveMeasure w) {
  InitialLaw2D law;
  Part p;
  p.is_point = false;
  p.nodes = c.points;
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    acc += w == CurveMeasure::liouville ? c.arc_weights[i] / c.grad_norms[i] : c.arc_weights[i];
    p.cdf.push_back(acc);
  }
  for (double& v : p.cdf) v /= acc;
  law.parts_.push_back(p);
  law.rebuild();
  return law;
}

InitialLaw2D& InitialLaw2D::add(const InitialLaw2D& other, double weight) {
  double tot = 0.0;
  for (const auto& p : other.parts_) tot += p.weight;
  for (auto p : other.parts_) {
    p.weight *= weight / tot;
    parts_.push_back(p);
  }
  rebuild();
  return *this;
}

void InitialLaw2D::rebuild() {
  part_cdf_.clear();
  double acc = 0.0;
  for (const auto& p : parts_) part_cdf_.push_back(acc += p.weight);
  for (double& v : part_cdf_) v /= acc;
}

bool InitialLaw2D::has_point_mass() const {
  return std::any_of(parts_.begin(), parts_.end(), [](const Part& p) { return p.is_point; });
}

Vec2 InitialLaw2D::sample(RngStream& rng) const {
  if (parts_.empty()) throw ConfigError("empty initial law");
  std::size_t k = 0;
  if (parts_.size() > 1) {
    const double u = rng.uniform();
    k = std::min<std::size_t>(std::lower_bound(part_cdf_.begin(), part_cdf_.end(), u) - part_cdf_.begin(),
                              parts_.size() - 1);
  }
  const Part& p = parts_[k];
  if (p.is_point) return p.x;
  const double u = rng.uniform();
  const std::size_t i =
      std::min<std::size_t>(std::lower_bound(p.cdf.begin(), p.cdf.end(), u) - p.cdf.begin(), p.nodes.size() - 1);
  return p.nodes[i];
}

int Ensemble::snapshot_index(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
  std::ostringstream os;
  os << "no snapshot at t = " << t;
  throw MissingSnapshot(os.str());
}

bool simulate_path(const HamiltonianSystem& sys, const SdeConfig& cfg, const InitialLaw2D& init, int index,
                   std::vector<Vec2>& snaps, int& death_snapshot, const StepObserver& obs) {
  const auto steps = cfg.snapshot_steps();
  snaps.assign(steps.size(), Vec2{});
  death_snapshot = -1;
  RngStream rng(cfg.seed, static_cast<std::uint64_t>(index));
  Vec2 x = init.sample(rng);
  std::size_t next = 0;
  auto breached = [&](Vec2 p) { return !sys.domain().contains(p) || !(sys.H(p) <= sys.h_max()); };
  const int n = steps.empty() ? 0 : steps.back();
  for (int k = 0;; ++k) {
    while (next < steps.size() && steps[next] == k) snaps[next++] = x;
    if (k >= n) break;
    Vec2 xi1{rng.normal(), rng.normal()};
    Vec2 xi2{0, 0};
    if (cfg.scheme == Scheme::splitting) xi2 = {rng.normal(), rng.normal()};
    const Vec2 y = step(sys, cfg, x, xi1, xi2);
    if (breached(y)) {
      death_snapshot = static_cast<int>(next);
      return false;
    }
    if (obs) obs(k, x, y);
    x = y;
  }
  return true;
}

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  int nt = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nt = std::min(nt, std::max(1, n));
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += nt) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

Ensemble simulate_paths(const HamiltonianSystem& sys, const SdeConfig& cfg, const InitialLaw2D& init) {
  validate(cfg);
  Ensemble ens;
  for (int s : cfg.snapshot_steps()) ens.times.push_back(s * cfg.dt);
  ens.states.resize(cfg.n_paths);
  ens.alive.assign(cfg.n_paths, 1);
  ens.death_snapshot.assign(cfg.n_paths, -1);
  ens.point_mass_start = init.has_point_mass();
  parallel_for(cfg.n_paths, cfg.threads, [&](int i) {
    ens.alive[i] = simulate_path(sys, cfg, init, i, ens.states[i], ens.death_snapshot[i]) ? 1 : 0;
  });
  ens.breaches = static_cast<int>(std::count(ens.alive.begin(), ens.alive.end(), 0));
  return ens;
}

ProjectedEnsemble project_trajectory(const ReebGraph& graph, const HamiltonianSystem& sys, const Ensemble& ens) {
  ProjectedEnsemble out;
  out.times = ens.times;
  out.points.resize(ens.n_paths());
  std::vector<int> anomalies(ens.n_paths(), 0);
  parallel_for(ens.n_paths(), 0, [&](int p) {
    for (std::size_t s = 0; s < ens.times.size(); ++s) {
      if (!ens.alive_at(p, static_cast<int>(s))) break;
      out.points[p].push_back(graph.project_point(sys, ens.states[p][s]));
    }
    const auto& pts = out.points[p];
    for (std::size_t s = 1; s < pts.size(); ++s) {
      const GraphPoint &a = pts[s - 1], &b = pts[s];
      if (a.is_vertex() || b.is_vertex() || a.edge == b.edge) continue;
      const Edge &ea = graph.edges[a.edge], &eb = graph.edges[b.edge];
      if (ea.v_lo != eb.v_lo && ea.v_lo != eb.v_hi && ea.v_hi != eb.v_lo && ea.v_hi != eb.v_hi) ++anomalies[p];
    }
  });
  for (int a : anomalies) out.anomalies += a;
  return out;
}

}  // namespace hamavg
