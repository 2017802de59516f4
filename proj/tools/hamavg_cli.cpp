// Command-line driver: one INI config, one subcommand, outputs plus a JSON manifest.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <boost/version.hpp>
#include <Eigen/Core>

#include "CLI11.hpp"
#include "json.hpp"

#include "hamavg/config.hpp"
#include "hamavg/errors.hpp"
#include "hamavg/harness.hpp"
#include "hamavg/identity_suite.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hamavg;

namespace {

constexpr const char* kVersion = "0.1.0";

class Run {
 public:
  Run(std::string command, RunConfig cfg, fs::path out) : command_(std::move(command)), cfg_(std::move(cfg)), out_(std::move(out)) {
    fs::create_directories(out_);
  }

  const RunConfig& cfg() const { return cfg_; }

  template <class F>
  auto timed(const std::string& phase, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    timings_[phase] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  std::ofstream open(const std::string& name) {
    outputs_.push_back(name);
    std::ofstream f(out_ / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (out_ / name).string());
    f << std::setprecision(17);
    return f;
  }

  void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << "\n"; }

  void manifest(const std::string& verdict) {
    json m;
    m["command"] = command_;
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a(cfg_.source_text);
    m["config_hash"] = "fnv1a64:" + hash.str();
    m["seed"] = cfg_.seed;
    m["versions"] = {{"hamavg", kVersion},
                     {"compiler", __VERSION__},
                     {"boost", BOOST_LIB_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
    json t = json::object();
    for (const auto& [k, v] : timings_) t[k] = v;
    m["timings_s"] = t;
    m["outputs"] = outputs_;
    if (!verdict.empty()) m["verdict"] = verdict;
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["timestamp"] = buf;
    std::ofstream f(out_ / "manifest.json", std::ios::binary);
    f << m.dump(2) << "\n";
  }

 private:
  std::string command_;
  RunConfig cfg_;
  fs::path out_;
  std::vector<std::string> outputs_;
  std::map<std::string, double> timings_;
};

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

struct Model {
  HamiltonianSystem sys;
  ReebGraph graph;
};

Model build_model(Run& run) {
  const RunConfig& c = run.cfg();
  HamiltonianSystem sys = make_builtin(c.system);
  ReebOptions ro;
  ro.resolution = c.resolution;
  ro.trace.step = c.trace_step;
  ReebGraph g = run.timed("graph", [&] { return build_reeb_graph(sys, ro); });
  return {std::move(sys), std::move(g)};
}

std::vector<EdgeTable> build(Run& run, const Model& m, int threads) {
  TableOptions to;
  to.n_levels = run.cfg().n_levels;
  to.trace.step = run.cfg().trace_step;
  to.threads = threads;
  return run.timed("tables", [&] { return build_tables(m.graph, m.sys, to); });
}

json graph_json(const Model& m) {
  json j;
  j["system"] = m.graph.system_name;
  j["h_max"] = m.graph.h_max;
  j["vertices"] = json::array();
  for (const Vertex& v : m.graph.vertices) {
    json a = json::object();
    for (const auto& [e, x] : v.alpha) a[std::to_string(e)] = num(x);
    j["vertices"].push_back({{"id", v.id},
                             {"kind", to_string(v.kind)},
                             {"level", num(v.level)},
                             {"position", {v.position.x, v.position.y}},
                             {"mass", v.mass},
                             {"gamma", v.gamma},
                             {"alpha", a},
                             {"edges_above", v.J_plus},
                             {"edges_below", v.J_minus}});
  }
  j["edges"] = json::array();
  for (const Edge& e : m.graph.edges)
    j["edges"].push_back(
        {{"id", e.id}, {"m_lo", num(e.m_lo)}, {"m_hi", num(e.m_hi)}, {"v_lo", e.v_lo}, {"v_hi", e.v_hi}});
  j["n_vertices"] = m.graph.n_vertices();
  j["n_edges"] = m.graph.n_edges();
  return j;
}

std::pair<InitialLaw2D, InitialLawGraph> initial_laws(const Model& m, const RunConfig& c) {
  if (!c.init_point) throw ConfigError("[system] init_point: required for simulations");
  const Vec2 x = *c.init_point;
  if (!c.system.domain.value_or(m.sys.domain()).contains(x) || !(m.sys.H(x) <= m.sys.h_max()))
    throw ConfigError("[system] init_point: outside the truncated domain");
  const GraphPoint gp = m.graph.project_point(m.sys, x);
  if (gp.is_vertex() || c.init_law == InitLaw::point)
    return {InitialLaw2D::point(x), InitialLawGraph::point(gp)};
  TraceOptions to;
  to.step = c.trace_step;
  return level_set_initial_law(m.sys, m.graph, gp.edge, gp.m, to);
}

int cmd_graph(Run& run, int threads) {
  const Model m = build_model(run);
  run.write_json("graph.json", graph_json(m));
  std::cout << m.graph.system_name << ": " << m.graph.n_vertices() << " vertices, " << m.graph.n_edges() << " edges\n";
  return 0;
}

int cmd_coeffs(Run& run, int threads) {
  const Model m = build_model(run);
  const auto tables = build(run, m, threads);
  for (const EdgeTable& t : tables) {
    auto f = run.open("coeffs_edge" + std::to_string(t.edge_id) + ".csv");
    f << "m,T,S2,B0,B1,a,b,c,d,err_est\n";
    for (const CoefficientSample& s : t.samples)
      f << s.m << ',' << s.T << ',' << s.S2 << ',' << s.B0 + 0.0 << ',' << s.B1 << ',' << s.a << ',' << s.b + 0.0
        << ',' << s.c + 0.0 << ',' << s.d << ',' << s.err_est << '\n';
  }
  run.write_json("graph.json", graph_json(m));
  std::cout << "wrote coefficient tables for " << tables.size() << " edges\n";
  return 0;
}

int cmd_check(Run& run, int threads) {
  const Model m = build_model(run);
  const auto tables = build(run, m, threads);
  IdentityOptions io;
  io.trace.step = run.cfg().trace_step;
  const IdentityReport r = run.timed("identities", [&] { return run_identity_suite(m.sys, m.graph, tables, io); });
  json j;
  j["system"] = m.graph.system_name;
  for (const IdentityCheck& c : r.checks) {
    j[c.name] = {{"residual", num(c.residual)},
                 {"tolerance", num(c.tolerance)},
                 {"verdict", c.pass ? "PASS" : "FAIL"},
                 {"detail", c.detail}};
    std::cout << std::left << std::setw(18) << c.name << (c.pass ? "PASS" : "FAIL") << "  residual " << c.residual
              << "  tol " << c.tolerance << "\n";
  }
  const std::string verdict = r.all_pass() ? "PASS" : "FAIL";
  j["verdict"] = verdict;
  run.write_json("check.json", j);
  run.manifest(verdict);
  return r.all_pass() ? 0 : 2;
}

int cmd_sim2d(Run& run, int threads) {
  const Model m = build_model(run);
  SdeConfig sc = run.cfg().sde;
  sc.threads = threads;
  const auto laws = initial_laws(m, run.cfg());
  const Ensemble ens = run.timed("simulate", [&] { return simulate_paths(m.sys, sc, laws.first); });
  const ProjectedEnsemble proj = run.timed("project", [&] { return project_trajectory(m.graph, m.sys, ens); });
  auto f = run.open("sim2d.csv");
  f << "path,t,x1,x2,H,edge_id,m,vertex_id\n";
  for (int p = 0; p < ens.n_paths(); ++p)
    for (std::size_t s = 0; s < proj.points[p].size(); ++s) {
      const Vec2 x = ens.states[p][s];
      const GraphPoint& g = proj.points[p][s];
      f << p << ',' << ens.times[s] << ',' << x.x << ',' << x.y << ',' << m.sys.H(x) << ',' << g.edge << ','
        << m.graph.level(g) << ',' << g.vertex << '\n';
    }
  auto sf = run.open("sim2d_summary.csv");
  sf << "t,alive,mean_H,se_H\n";
  for (std::size_t s = 0; s < ens.times.size(); ++s) {
    double sum = 0, sq = 0;
    int n = 0;
    for (int p = 0; p < ens.n_paths(); ++p)
      if (ens.alive_at(p, static_cast<int>(s))) {
        const double h = m.sys.H(ens.states[p][s]);
        sum += h;
        sq += h * h;
        ++n;
      }
    const double mean = n ? sum / n : NAN;
    const double se = n > 1 ? std::sqrt((sq - n * mean * mean) / (n - 1) / n) : NAN;
    sf << ens.times[s] << ',' << n << ',' << mean << ',' << se << '\n';
  }
  std::cout << ens.n_paths() << " paths, " << ens.breaches << " left the truncated domain, " << proj.anomalies
            << " projection anomalies\n";
  return 0;
}

int cmd_simgraph(Run& run, int threads) {
  const Model m = build_model(run);
  const auto tables = build(run, m, threads);
  GraphSimConfig gc = run.cfg().graph;
  gc.threads = threads;
  const auto rules = make_rules(m.graph, tables, gc.delta_v_rel);
  const auto laws = initial_laws(m, run.cfg());
  const GraphEnsemble ens = run.timed("simulate", [&] { return simulate_graph(tables, m.graph, rules, gc, laws.second); });
  auto f = run.open("simgraph.csv");
  f << "path,t,edge_id,m,vertex_id\n";
  for (int p = 0; p < ens.n_paths(); ++p)
    for (std::size_t s = 0; s < ens.times.size(); ++s) {
      const GraphPoint& g = ens.points[p][s];
      f << p << ',' << ens.times[s] << ',' << g.edge << ',' << m.graph.level(g) << ',' << g.vertex << '\n';
    }
  auto sp = run.open("splits.csv");
  sp << "vertex,edge,entries,configured_p\n";
  for (const VertexRule& r : rules)
    for (const auto& [e, p] : r.split_probs) {
      long n = 0;
      if (auto it = ens.split_counts.find(r.vertex_id); it != ens.split_counts.end())
        if (auto jt = it->second.find(e); jt != it->second.end()) n = jt->second;
      sp << r.vertex_id << ',' << e << ',' << n << ',' << p << '\n';
    }
  for (const VertexRule& r : rules)
    if (!r.warning.empty()) std::cerr << "vertex " << r.vertex_id << ": " << r.warning << "\n";
  std::cout << ens.n_paths() << " graph paths, " << ens.vertex_hits << " vertex visits, " << ens.step_rejections
            << " step rejections\n";
  return 0;
}

int cmd_study(Run& run, int threads) {
  const RunConfig& c = run.cfg();
  const Model m = build_model(run);
  const auto tables = build(run, m, threads);
  const auto rules = make_rules(m.graph, tables, c.graph.delta_v_rel);
  const auto laws = initial_laws(m, c);
  StudyConfig sc;
  sc.alphas = c.study_alphas;
  sc.times = c.study_times;
  sc.sde = c.sde;
  sc.sde.n_paths = c.study_paths;
  sc.sde.threads = threads;
  sc.graph = c.graph;
  sc.graph.n_paths = c.study_paths;
  sc.graph.threads = threads;
  sc.max_deficit = c.max_deficit;
  sc.noise_factor = c.noise_factor;
  const ConvergenceReport r =
      run.timed("study", [&] { return convergence_study(m.sys, m.graph, tables, rules, sc, laws.first, laws.second); });

  auto f = run.open("study.csv");
  f << "alpha,t,W1,KS,noise_floor\n";
  for (const auto& row : r.rows) f << row.alpha << ',' << row.t << ',' << row.w1 << ',' << row.ks << ',' << r.noise_floor.at(row.t) << '\n';
  auto l = run.open("study_long.csv");
  l << "alpha,t,metric,value\n";
  for (const auto& row : r.rows) {
    l << row.alpha << ',' << row.t << ",W1," << row.w1 << '\n';
    l << row.alpha << ',' << row.t << ",KS," << row.ks << '\n';
    l << row.alpha << ',' << row.t << ",deficit," << row.deficit << '\n';
  }
  json j;
  j["verdict"] = r.verdict;
  j["reason"] = r.reason;
  j["alphas"] = r.alphas;
  j["times"] = r.times;
  json floors = json::object();
  for (const auto& [t, v] : r.noise_floor) {
    std::ostringstream k;
    k << t;
    floors[k.str()] = v;
  }
  j["noise_floor"] = floors;
  j["rows"] = json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"alpha", row.alpha},
                         {"t", row.t},
                         {"W1", num(row.w1)},
                         {"KS", row.ks},
                         {"deficit", row.deficit},
                         {"valid", row.valid},
                         {"anomalies", row.anomalies}});
  run.write_json("study.json", j);
  run.manifest(r.verdict);
  std::cout << "study verdict " << r.verdict << (r.reason.empty() ? "" : ": " + r.reason) << "\n";
  return r.verdict == "FAIL" ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaging of fast-slow Hamiltonian diffusions onto their orbit graph"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  int threads = 0;
  long seed = -1;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "INI configuration file")->required();
  app.add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", out_dir, "output directory (overrides HAMAVG_OUT_DIR and [output] dir)");
  app.add_option("--seed", seed, "master seed")->check(CLI::NonNegativeNumber);
  app.add_option("--set", sets, "override, section.key=value");
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"graph", "build the orbit graph and dump it as JSON"},
      {"coeffs", "tabulate averaged coefficients per edge"},
      {"check", "run the identity suite"},
      {"sim2d", "simulate the planar SDE and project onto the graph"},
      {"simgraph", "simulate the limiting diffusion on the graph"},
      {"study", "alpha sweep against the graph diffusion"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (seed >= 0) sets.push_back("seed=" + std::to_string(seed));
    RunConfig cfg = load_config(config_path, sets);
    require_sections(cfg, {"system"});
    std::string dir = cfg.out_dir;
    if (const char* env = std::getenv("HAMAVG_OUT_DIR"); env && *env) dir = env;
    if (!out_dir.empty()) dir = out_dir;
    if (command == "sim2d") require_sections(cfg, {"sde"});
    if (command == "simgraph") require_sections(cfg, {"graph_sde"});
    if (command == "study") require_sections(cfg, {"sde", "graph_sde", "study"});

    Run run(command, std::move(cfg), dir);
    int rc = 0;
    if (command == "graph") rc = cmd_graph(run, threads);
    else if (command == "coeffs") rc = cmd_coeffs(run, threads);
    else if (command == "check") return cmd_check(run, threads);
    else if (command == "sim2d") rc = cmd_sim2d(run, threads);
    else if (command == "simgraph") rc = cmd_simgraph(run, threads);
    else if (command == "study") return cmd_study(run, threads);
    run.manifest("");
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
