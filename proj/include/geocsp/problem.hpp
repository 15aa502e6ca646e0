#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geocsp/geometry.hpp"

namespace geocsp {

/// A geometric constraint-satisfaction instance on an n x n grid.
///
/// `fixed` holds the pinned points (the P constraints); `labels` holds the
/// ground truth for every other variable and may be empty for unlabelled input.
struct Problem {
  int grid_side = 0;
  std::vector<std::string> variables;
  std::vector<Constraint> constraints;
  Assignment fixed;
  Assignment labels;
  std::optional<std::uint64_t> generator_seed;

  std::size_t variable_count() const { return variables.size(); }
  bool is_fixed(VarId v) const { return fixed.has(v); }
  std::vector<VarId> unknowns() const;
  std::vector<VarId> knowns() const;
  /// fixed merged with labels.
  Assignment full_assignment() const;
  /// Throws ErrorKind::Format when the structural invariants do not hold
  /// (disjoint fixed/labels, coverage when labelled, points on grid, arity,
  /// and every constraint satisfied when labelled).
  void validate(bool require_labels = true) const;
  bool has_labels() const { return labels.assigned_count() > 0 || unknowns().empty(); }
};

/// Spreadsheet-style names: A..Z, AA, AB, ...
std::string variable_name(std::size_t index);

}  // namespace geocsp
