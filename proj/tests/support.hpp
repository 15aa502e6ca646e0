#pragma once

#include <optional>
#include <vector>

#include "geocsp/error.hpp"
#include "geocsp/problem.hpp"

namespace geocsp::testing {

/// Eight points on a 20x20 grid: T(A,B,C,D), S(B,D,E,F), S(B,F,G,H) with
/// A=(5,2), B=(2,2), C=(4,3) fixed.
inline Problem worked_example(bool with_labels = true) {
  Problem p;
  p.grid_side = 20;
  for (int i = 0; i < 8; ++i) p.variables.push_back(variable_name(i));
  p.constraints = {{ConstraintKind::Translation, {0, 1, 2, 3}},
                   {ConstraintKind::Square, {1, 3, 4, 5}},
                   {ConstraintKind::Square, {1, 5, 6, 7}}};
  p.fixed = Assignment(8);
  p.fixed.set(0, {5, 2});
  p.fixed.set(1, {2, 2});
  p.fixed.set(2, {4, 3});
  p.labels = Assignment(8);
  if (with_labels) {
    const GridPoint truth[] = {{1, 3}, {0, 2}, {1, 1}, {2, 0}, {3, 1}};
    for (int i = 0; i < 5; ++i) p.labels.set(3 + i, truth[i]);
  }
  return p;
}

/// Every grid completion of the unknown slots consistent with the known ones.
inline std::vector<std::array<GridPoint, 4>> brute_force(ConstraintKind kind, std::array<GridPoint, 4> slots,
                                                         unsigned mask, int n) {
  std::vector<int> free;
  for (int s = 0; s < arity(kind); ++s) {
    if (!(mask & (1u << s))) free.push_back(s);
  }
  std::vector<std::array<GridPoint, 4>> out;
  const int cells = n * n;
  std::vector<int> idx(free.size(), 0);
  while (true) {
    for (std::size_t k = 0; k < free.size(); ++k) slots[free[k]] = index_to_point(idx[k], n);
    if (check_slots(kind, slots)) out.push_back(slots);
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == cells) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return out;
}

/// resolve_slots restricted to the grid; integrality and degeneracy errors
/// mean no completion.
inline std::optional<std::array<GridPoint, 4>> resolved_on_grid(ConstraintKind kind,
                                                                const std::array<GridPoint, 4>& slots, unsigned mask,
                                                                int n) {
  try {
    const auto r = resolve_slots(kind, slots, mask);
    for (int s = 0; s < arity(kind); ++s) {
      if (!on_grid(r[s], n)) return std::nullopt;
    }
    return r;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Integrality && e.kind() != ErrorKind::Degeneracy) throw;
    return std::nullopt;
  }
}

/// Calls f(kind, mask, slots) for every determining subset of every kind and
/// every placement of its known slots on an n x n grid.
template <class F>
void for_each_determined_placement(int n, F&& f) {
  const int cells = n * n;
  for (ConstraintKind kind : kAllKinds) {
    for (unsigned mask : determining_masks(kind)) {
      std::vector<int> known;
      for (int s = 0; s < arity(kind); ++s) {
        if (mask & (1u << s)) known.push_back(s);
      }
      std::vector<int> idx(known.size(), 0);
      while (true) {
        std::array<GridPoint, 4> slots{};
        for (std::size_t k = 0; k < known.size(); ++k) slots[known[k]] = index_to_point(idx[k], n);
        f(kind, mask, slots);
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == cells) idx[k++] = 0;
        if (k == idx.size()) break;
      }
    }
  }
}

}  // namespace geocsp::testing
