#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hamavg/hamiltonian.hpp"
#include "hamavg/levelset.hpp"
#include "hamavg/reeb_graph.hpp"
#include "hamavg/rng.hpp"

namespace hamavg {

enum class Scheme { splitting, euler_maruyama };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct SdeConfig {
  double alpha = 0.1;
  double dt = 1e-3;
  double t_end = 1.0;
  int n_paths = 1000;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::splitting;
  int fast_substeps_cap = 4000;
  std::vector<double> snapshot_times;  // empty -> {t_end}
  int threads = 0;                     // 0 -> hardware concurrency

  int n_steps() const;
  std::vector<int> snapshot_steps() const;
};

// Throws ConfigError on inconsistent settings.
void validate(const SdeConfig& cfg);

// One slow step with externally supplied standard normals (xi1 for the first
// half step, xi2 for the second; euler_maruyama uses xi1 only).
Vec2 step(const HamiltonianSystem& sys, const SdeConfig& cfg, Vec2 x, Vec2 xi1, Vec2 xi2);

// Flow of (1/alpha) A grad H over time dt.
Vec2 fast_flow(const HamiltonianSystem& sys, Vec2 x, double dt, double alpha, int substeps_cap);

// Mixture of point masses and level-curve laws on R^2.
class InitialLaw2D {
 public:
  enum class CurveMeasure { liouville, arc_length };

  static InitialLaw2D point(Vec2 x);
  static InitialLaw2D level_curve(const LevelCurve& c, CurveMeasure w = CurveMeasure::liouville);
  // Adds a component with the given relative weight.
  InitialLaw2D& add(const InitialLaw2D& other, double weight);

  Vec2 sample(RngStream& rng) const;
  bool has_point_mass() const;

 private:
  struct Part {
    bool is_point = true;
    Vec2 x;
    std::vector<Vec2> nodes;
    std::vector<double> cdf;  // cumulative node weights, last == 1
    double weight = 1.0;
  };
  std::vector<Part> parts_;
  std::vector<double> part_cdf_;
  void rebuild();
};

struct Ensemble {
  std::vector<double> times;
  std::vector<std::vector<Vec2>> states;  // [path][snapshot]
  std::vector<char> alive;                // alive at the end of the run
  std::vector<int> death_snapshot;        // first snapshot index missed by a dead path, or -1
  int breaches = 0;
  bool point_mass_start = false;

  int n_paths() const { return static_cast<int>(states.size()); }
  int snapshot_index(double t) const;  // throws MissingSnapshot
  bool alive_at(int path, int snap) const { return death_snapshot[path] < 0 || snap < death_snapshot[path]; }
};

// Per-step hook for a single path: (step index, state before, state after).
using StepObserver = std::function<void(int, Vec2, Vec2)>;

// Runs path `index` and records states at the configured snapshot steps.
// Returns false if the path breached the truncation.
bool simulate_path(const HamiltonianSystem& sys, const SdeConfig& cfg, const InitialLaw2D& init, int index,
                   std::vector<Vec2>& snaps, int& death_snapshot, const StepObserver& obs = {});

Ensemble simulate_paths(const HamiltonianSystem& sys, const SdeConfig& cfg, const InitialLaw2D& init);

struct ProjectedEnsemble {
  std::vector<double> times;
  std::vector<std::vector<GraphPoint>> points;  // [path][snapshot], truncated at death
  int anomalies = 0;  // consecutive snapshots on edges that share no vertex

  int n_paths() const { return static_cast<int>(points.size()); }
};

ProjectedEnsemble project_trajectory(const ReebGraph& graph, const HamiltonianSystem& sys, const Ensemble& ens);

// Runs f(i) for i in [0, n) on `threads` workers (0 -> hardware concurrency).
void parallel_for(int n, int threads, const std::function<void(int)>& f);

}  // namespace hamavg
