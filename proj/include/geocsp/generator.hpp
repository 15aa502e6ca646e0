#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "geocsp/problem.hpp"
#include "geocsp/rng.hpp"

namespace geocsp {

struct GeneratorConfig {
  int grid_side = 20;
  int min_constraints = 1;
  int max_constraints = 16;
  /// Probability per kind; only kinds in `allowed_kinds` may carry weight.
  std::map<ConstraintKind, double> type_weights;
  int min_parents = 1;
  int max_parents = 2;
  std::uint64_t seed = 0;
  std::vector<ConstraintKind> allowed_kinds;
  /// Whole-problem attempts before ErrorKind::GenerationFailure.
  int max_attempts = 1000;
  /// Rewiring attempts for a single constraint after integrality/degeneracy failures.
  int wiring_attempts = 64;

  /// Throws ErrorKind::Config when weights do not sum to 1 over allowed kinds
  /// or a range is empty.
  void validate() const;

  /// The 20x20 training distribution.
  static GeneratorConfig training();
  /// The harder 20x20 test distribution.
  static GeneratorConfig test();
  /// Square + translation only, equal weights, for grid-size scaling runs.
  static GeneratorConfig square_translation(int grid_side);
};

/// Samples one solvable problem. Each attempt samples a constraint DAG, wires
/// variables so every non-root constraint takes its determining arguments
/// from its parents, anchors root points, solves the figure exactly, rejects
/// it if it does not fit the grid, and otherwise translates it to a uniformly
/// random position.
Problem generate_problem(const GeneratorConfig& cfg, Rng& rng);

struct DatasetStats {
  std::map<int, std::size_t> constraint_counts;
  std::map<int, std::size_t> point_counts;
  std::map<int, std::size_t> depth_counts;
  std::array<std::size_t, 4> kind_counts{};
  std::size_t problems = 0;
  std::size_t failures = 0;

  void add(const Problem& p, int max_depth);
  double mean_constraints() const;
  double mean_points() const;
  double mean_depth() const;
  /// Fraction of constraints of each kind, indexed by ConstraintKind.
  std::array<double, 4> kind_fractions() const;
};

struct Dataset {
  std::vector<Problem> problems;
  DatasetStats stats;
};

/// Generates `count` problems; item i uses the stream derive_seed(cfg.seed, i),
/// so output is independent of `workers`. Failed items are skipped and
/// counted in stats.failures.
Dataset generate_dataset(const GeneratorConfig& cfg, std::size_t count, unsigned workers = 1);

DatasetStats compute_stats(const std::vector<Problem>& problems);

}  // namespace geocsp
