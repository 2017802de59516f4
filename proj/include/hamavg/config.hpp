#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hamavg/graph_diffusion.hpp"
#include "hamavg/hamiltonian.hpp"
#include "hamavg/sde.hpp"

namespace hamavg {

enum class InitLaw { level_set, point };

// Parsed INI run configuration. Sections: [system], [sde], [graph_sde],
// [study], [output]; `seed` may also appear before the first section.
struct RunConfig {
  BuiltinOptions system;
  int resolution = 256;
  int n_levels = 24;
  double trace_step = 0.01;
  std::optional<Vec2> init_point;
  InitLaw init_law = InitLaw::level_set;

  SdeConfig sde;
  GraphSimConfig graph;

  std::vector<double> study_alphas;
  std::vector<double> study_times;
  int study_paths = 10000;
  double max_deficit = 0.005;
  double noise_factor = 2.0;

  std::string out_dir = "out";
  std::uint64_t seed = 1;

  std::set<std::string> sections;  // sections present in the file
  std::string source_text;         // file contents followed by the overrides, for hashing

  bool has(const std::string& section) const { return sections.count(section) > 0; }
};

// Overrides are "section.key=value" (or "seed=value").
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Throws ConfigError naming the first missing section.
void require_sections(const RunConfig& cfg, const std::vector<std::string>& sections);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace hamavg
