#include "hamavg/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hamavg/errors.hpp"

namespace hamavg {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKeys = {
    {"system", {"name", "hamiltonian", "drift", "density", "epsilon", "h_max", "domain", "resolution", "n_levels",
                "trace_step", "init_point", "init_law"}},
    {"sde", {"alpha", "dt", "t_end", "n_paths", "scheme", "snapshot_times", "fast_substeps_cap", "seed"}},
    {"graph_sde", {"dt", "t_end", "n_paths", "delta_v", "snapshot_times", "seed"}},
    {"study", {"alphas", "times", "n_paths", "max_deficit", "noise_factor"}},
    {"output", {"dir"}},
};

[[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) {
  throw ConfigError("[" + section + "] " + key + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_number(const std::string& section, const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    fail(section, key, "expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) fail(section, key, "expected a number, got '" + v + "'");
  return x;
}

long to_integer(const std::string& section, const std::string& key, const std::string& v) {
  const double x = to_number(section, key, v);
  if (x != std::floor(x) || std::abs(x) > 9e15) fail(section, key, "expected an integer, got '" + v + "'");
  return static_cast<long>(x);
}

std::vector<double> to_list(const std::string& section, const std::string& key, std::string v) {
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = trim(v.substr(1, v.size() - 2));
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_number(section, key, trim(item)));
  if (out.empty()) fail(section, key, "expected a comma separated list");
  return out;
}

std::uint64_t seed_value(const std::string& section, const std::string& v) {
  const long x = to_integer(section, "seed", v);
  if (x < 0) fail(section, "seed", "must be non-negative");
  return static_cast<std::uint64_t>(x);
}

template <class F>
auto wrap(const std::string& section, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError("[" + section + "] " + e.what());
  }
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
  }
  RunConfig cfg;
  cfg.source_text = text;
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    const std::string path = trim(o.substr(0, eq)), value = trim(o.substr(eq + 1));
    if (path.empty()) throw ConfigError("override '" + o + "' has an empty key");
    tree.put(pt::ptree::path_type(path, '.'), value);
    cfg.source_text += "\n" + path + "=" + value;
  }

  // The INI reader drops sections without keys; find their headers directly.
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.size() < 2 || line.front() != '[' || line.back() != ']') continue;
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!kKeys.count(name)) throw ConfigError("unknown section [" + name + "]");
      cfg.sections.insert(name);
    }
  }

  // Reject unknown sections and keys before reading anything.
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name == "seed") continue;
      if (kKeys.count(name) && node.data().empty()) {
        cfg.sections.insert(name);
        continue;
      }
      throw ConfigError("unknown top-level key '" + name + "'");
    }
    auto it = kKeys.find(name);
    if (it == kKeys.end()) throw ConfigError("unknown section [" + name + "]");
    for (const auto& [key, leaf] : node) {
      if (!it->second.count(key)) fail(name, key, "unknown key");
      if (!leaf.empty()) fail(name, key, "nested keys are not allowed");
    }
    cfg.sections.insert(name);
  }

  if (auto s = tree.get_optional<std::string>("seed")) cfg.seed = seed_value("top", trim(*s));
  auto get = [&](const std::string& section, const std::string& key) -> std::optional<std::string> {
    auto sec = tree.get_child_optional(section);
    if (!sec) return std::nullopt;
    auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  };

  if (cfg.has("system")) {
    const std::string S = "system";
    auto name = get(S, "name");
    if (!name) name = get(S, "hamiltonian");
    if (!name) fail(S, "name", "required");
    wrap(S, [&] { cfg.system.name = parse_builtin(*name); return 0; });
    if (auto v = get(S, "drift")) {
      wrap(S, [&] { cfg.system.drift = parse_drift(*v); return 0; });
      if (cfg.system.drift == DriftSpec::custom) fail(S, "drift", "custom drifts are only available through the library");
    }
    if (auto v = get(S, "density")) wrap(S, [&] { cfg.system.density = parse_density(*v); return 0; });
    if (auto v = get(S, "epsilon")) cfg.system.epsilon = to_number(S, "epsilon", *v);
    if (!(cfg.system.epsilon > 0)) fail(S, "epsilon", "must be positive");
    if (auto v = get(S, "h_max")) cfg.system.h_max = to_number(S, "h_max", *v);
    if (auto v = get(S, "domain")) {
      const auto d = to_list(S, "domain", *v);
      if (d.size() == 1 && d[0] > 0) {
        cfg.system.domain = Rect{-d[0], d[0], -d[0], d[0]};
      } else if (d.size() == 4 && d[1] > d[0] && d[3] > d[2]) {
        cfg.system.domain = Rect{d[0], d[1], d[2], d[3]};
      } else {
        fail(S, "domain", "expected 'L' or 'x0, x1, y0, y1'");
      }
    }
    if (auto v = get(S, "resolution")) cfg.resolution = static_cast<int>(to_integer(S, "resolution", *v));
    if (cfg.resolution < 16) fail(S, "resolution", "must be at least 16");
    if (auto v = get(S, "n_levels")) cfg.n_levels = static_cast<int>(to_integer(S, "n_levels", *v));
    if (cfg.n_levels < 4) fail(S, "n_levels", "must be at least 4");
    if (auto v = get(S, "trace_step")) cfg.trace_step = to_number(S, "trace_step", *v);
    if (!(cfg.trace_step > 0 && cfg.trace_step < 1)) fail(S, "trace_step", "must lie in (0, 1)");
    if (auto v = get(S, "init_point")) {
      const auto p = to_list(S, "init_point", *v);
      if (p.size() != 2) fail(S, "init_point", "expected 'x, y'");
      cfg.init_point = Vec2{p[0], p[1]};
    }
    if (auto v = get(S, "init_law")) {
      if (*v == "level_set") cfg.init_law = InitLaw::level_set;
      else if (*v == "point") cfg.init_law = InitLaw::point;
      else fail(S, "init_law", "expected level_set or point, got '" + *v + "'");
    }
  }

  if (cfg.has("sde")) {
    const std::string S = "sde";
    SdeConfig& c = cfg.sde;
    if (auto v = get(S, "alpha")) c.alpha = to_number(S, "alpha", *v);
    if (auto v = get(S, "dt")) c.dt = to_number(S, "dt", *v);
    if (auto v = get(S, "t_end")) c.t_end = to_number(S, "t_end", *v);
    if (auto v = get(S, "n_paths")) c.n_paths = static_cast<int>(to_integer(S, "n_paths", *v));
    if (auto v = get(S, "scheme")) wrap(S, [&] { c.scheme = parse_scheme(*v); return 0; });
    if (auto v = get(S, "snapshot_times")) c.snapshot_times = to_list(S, "snapshot_times", *v);
    if (auto v = get(S, "fast_substeps_cap"))
      c.fast_substeps_cap = static_cast<int>(to_integer(S, "fast_substeps_cap", *v));
    c.seed = cfg.seed;
    if (auto v = get(S, "seed")) c.seed = seed_value(S, *v);
    wrap(S, [&] { validate(c); return 0; });
  }

  if (cfg.has("graph_sde")) {
    const std::string S = "graph_sde";
    GraphSimConfig& c = cfg.graph;
    if (auto v = get(S, "dt")) c.dt = to_number(S, "dt", *v);
    if (auto v = get(S, "t_end")) c.t_end = to_number(S, "t_end", *v);
    if (auto v = get(S, "n_paths")) c.n_paths = static_cast<int>(to_integer(S, "n_paths", *v));
    if (auto v = get(S, "delta_v")) c.delta_v_rel = to_number(S, "delta_v", *v);
    if (auto v = get(S, "snapshot_times")) c.snapshot_times = to_list(S, "snapshot_times", *v);
    c.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    if (auto v = get(S, "seed")) c.seed = seed_value(S, *v);
    wrap(S, [&] { validate(c); return 0; });
  }

  if (cfg.has("study")) {
    const std::string S = "study";
    if (auto v = get(S, "alphas")) cfg.study_alphas = to_list(S, "alphas", *v);
    if (cfg.study_alphas.empty()) fail(S, "alphas", "required");
    for (double a : cfg.study_alphas)
      if (!(a > 0)) fail(S, "alphas", "must be positive");
    if (auto v = get(S, "times")) cfg.study_times = to_list(S, "times", *v);
    if (cfg.study_times.empty()) fail(S, "times", "required");
    for (std::size_t i = 0; i < cfg.study_times.size(); ++i)
      if (!(cfg.study_times[i] > 0) || (i > 0 && cfg.study_times[i] <= cfg.study_times[i - 1]))
        fail(S, "times", "must be positive and strictly increasing");
    if (auto v = get(S, "n_paths")) cfg.study_paths = static_cast<int>(to_integer(S, "n_paths", *v));
    if (cfg.study_paths < 2) fail(S, "n_paths", "must be at least 2");
    if (auto v = get(S, "max_deficit")) cfg.max_deficit = to_number(S, "max_deficit", *v);
    if (!(cfg.max_deficit >= 0 && cfg.max_deficit < 1)) fail(S, "max_deficit", "must lie in [0, 1)");
    if (auto v = get(S, "noise_factor")) cfg.noise_factor = to_number(S, "noise_factor", *v);
    if (!(cfg.noise_factor > 0)) fail(S, "noise_factor", "must be positive");
  }

  if (auto v = get("output", "dir")) {
    if (v->empty()) fail("output", "dir", "must not be empty");
    cfg.out_dir = *v;
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

void require_sections(const RunConfig& cfg, const std::vector<std::string>& sections) {
  for (const auto& s : sections)
    if (!cfg.has(s)) throw ConfigError("missing section [" + s + "]");
}

}  // namespace hamavg
