#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "geocsp/problem.hpp"

namespace geocsp {

struct DependencyInfo {
  /// Constraints in the order they were resolved.
  std::vector<int> constraint_order;
  /// Resolution depth per variable; fixed variables have depth 0.
  std::vector<int> point_depth;
  int max_depth = 0;
};

/// One resolution step: the constraint, the arguments already known when it
/// fired (argument order), and the variables it implied (argument order).
struct ResolutionStep {
  int constraint = -1;
  std::vector<VarId> known;
  std::vector<VarId> implied;
};

struct Solution {
  Assignment assignment;
  DependencyInfo dependencies;
  std::vector<ResolutionStep> steps;
};

/// Forward-propagation solver. Works in rounds: each round resolves, in input
/// order, every constraint whose determining arguments were known at the start
/// of the round, choosing the determining subset of smallest maximum depth.
/// Ignores `p.labels`.
///
/// Errors: ErrorKind::Unsolvable when propagation stalls with unassigned
/// variables, ErrorKind::Inconsistency when a constraint re-derives a
/// different point for an assigned variable, and resolution errors
/// (integrality, degeneracy) propagated from resolve_constraint.
Solution solve(const Problem& p);

/// Depth per variable as computed by solve().
std::vector<int> point_depths(const Problem& p);

/// Solver log with one clause per line:
///
///   SQUARE ( 0 1 2 3 ) , TRANSLATION ( 1 4 5 6 ) ;
///   fixed 0 = #42 , 1 = #43 ;
///   Solution begins ;
///   Con SQUARE ( 0 1 2 3 ) ;
///   Known 0 = #42 , 1 = #43 ;
///   Impl 2 = #63 , 3 = #62 ;
///   ...
///   Solution ends
///
/// Variables are rendered by their position in the problem's variable list,
/// points as `#<grid index>`. Ends with a newline.
std::string emit_solver_log(const Problem& p);

struct ParsedSolverLog {
  std::vector<Constraint> constraints;
  /// (variable, grid index) in the order listed.
  std::vector<std::pair<VarId, int>> fixed;
  struct Step {
    Constraint constraint;
    std::vector<std::pair<VarId, int>> known;
    std::vector<std::pair<VarId, int>> implied;
  };
  std::vector<Step> steps;
  std::size_t variable_count = 0;
};

/// Inverse of emit_solver_log. Throws ErrorKind::Format on malformed input.
ParsedSolverLog parse_solver_log(std::string_view text);

}  // namespace geocsp
