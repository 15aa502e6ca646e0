#include "geocsp/problem.hpp"

#include "geocsp/error.hpp"

namespace geocsp {

std::vector<VarId> Problem::unknowns() const {
  std::vector<VarId> out;
  for (VarId v = 0; v < static_cast<VarId>(variables.size()); ++v) {
    if (!fixed.has(v)) out.push_back(v);
  }
  return out;
}

std::vector<VarId> Problem::knowns() const {
  std::vector<VarId> out;
  for (VarId v = 0; v < static_cast<VarId>(variables.size()); ++v) {
    if (fixed.has(v)) out.push_back(v);
  }
  return out;
}

Assignment Problem::full_assignment() const {
  Assignment out(variables.size());
  for (VarId v = 0; v < static_cast<VarId>(variables.size()); ++v) {
    if (fixed.has(v)) out.set(v, fixed.at(v));
    else if (labels.has(v)) out.set(v, labels.at(v));
  }
  return out;
}

void Problem::validate(bool require_labels) const {
  if (grid_side < 1) fail(ErrorKind::Format, "grid_side must be positive");
  const auto count = variables.size();
  if (fixed.size() != count || (labels.size() != count && labels.size() != 0)) {
    fail(ErrorKind::Format, "assignment size does not match variable count");
  }
  for (const auto& c : constraints) {
    for (VarId v : c.vars()) {
      if (v < 0 || static_cast<std::size_t>(v) >= count) fail(ErrorKind::Format, "constraint references unknown variable");
    }
  }
  for (VarId v = 0; v < static_cast<VarId>(count); ++v) {
    const bool f = fixed.has(v);
    const bool l = labels.size() == count && labels.has(v);
    if (f && l) fail(ErrorKind::Format, "variable " + variables[v] + " is both fixed and labelled");
    if (require_labels && !f && !l) fail(ErrorKind::Format, "variable " + variables[v] + " has no label");
    if (f && !on_grid(fixed.at(v), grid_side)) fail(ErrorKind::Range, "fixed point of " + variables[v] + " is off the grid");
    if (l && !on_grid(labels.at(v), grid_side)) fail(ErrorKind::Range, "label of " + variables[v] + " is off the grid");
  }
  if (require_labels) {
    const auto full = full_assignment();
    for (const auto& c : constraints) {
      if (!check_constraint(c, full)) fail(ErrorKind::Format, "labelled assignment violates a constraint");
    }
  }
}

std::string variable_name(std::size_t index) {
  std::string name;
  std::size_t i = index + 1;
  while (i > 0) {
    --i;
    name.insert(name.begin(), static_cast<char>('A' + i % 26));
    i /= 26;
  }
  return name;
}

}  // namespace geocsp
