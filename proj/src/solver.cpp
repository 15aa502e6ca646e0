#include "geocsp/solver.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <sstream>

#include "geocsp/error.hpp"

namespace geocsp {

namespace {

/// Chooses the determining mask (subset of `known`) whose largest depth is
/// smallest; ties keep the canonical order. Returns 0 if none applies.
unsigned pick_determining(const Constraint& c, unsigned known, const std::vector<int>& depth) {
  unsigned best = 0;
  int best_depth = 0;
  const auto vars = c.vars();
  for (unsigned mask : determining_masks(c.kind)) {
    if ((mask & known) != mask) continue;
    int d = 0;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (mask & (1u << i)) d = std::max(d, depth[vars[i]]);
    }
    if (best == 0 || d < best_depth) {
      best = mask;
      best_depth = d;
    }
  }
  return best;
}

}  // namespace

Solution solve(const Problem& p) {
  const std::size_t n = p.variables.size();
  Solution out;
  out.assignment = Assignment(n);
  auto& depth = out.dependencies.point_depth;
  depth.assign(n, -1);
  for (VarId v = 0; v < static_cast<VarId>(n); ++v) {
    if (p.fixed.has(v)) {
      out.assignment.set(v, p.fixed.at(v));
      depth[v] = 0;
    }
  }

  std::vector<bool> done(p.constraints.size(), false);
  bool progress = true;
  while (progress) {
    progress = false;
    const Assignment snapshot = out.assignment;
    for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
      if (done[ci]) continue;
      const Constraint& c = p.constraints[ci];
      const unsigned all = (1u << arity(c.kind)) - 1;
      const unsigned known = known_slot_mask(c, snapshot);
      if (known == all) {
        // Everything was derived elsewhere; it only needs to hold.
        if (!check_constraint(c, out.assignment)) {
          fail(ErrorKind::Inconsistency, "constraint " + std::to_string(ci) + " is violated by derived points");
        }
        done[ci] = true;
        continue;
      }
      const unsigned mask = pick_determining(c, known, depth);
      if (mask == 0) continue;

      Assignment given(n);
      int parent_depth = 0;
      const auto vars = c.vars();
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if (mask & (1u << i)) {
          given.set(vars[i], snapshot.at(vars[i]));
          parent_depth = std::max(parent_depth, depth[vars[i]]);
        }
      }
      ResolutionStep step;
      step.constraint = static_cast<int>(ci);
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if ((known & (1u << i)) &&
            std::find(step.known.begin(), step.known.end(), vars[i]) == step.known.end()) {
          step.known.push_back(vars[i]);
        }
      }
      for (const auto& [v, point] : resolve_constraint(c, given)) {
        if (out.assignment.has(v)) {
          if (out.assignment.at(v) != point) {
            fail(ErrorKind::Inconsistency, "variable " + p.variables[v] + " derived at two different points");
          }
          continue;
        }
        out.assignment.set(v, point);
        depth[v] = parent_depth + 1;
        step.implied.push_back(v);
      }
      done[ci] = true;
      progress = true;
      out.dependencies.constraint_order.push_back(step.constraint);
      if (!step.implied.empty()) out.steps.push_back(std::move(step));
    }
  }

  for (VarId v = 0; v < static_cast<VarId>(n); ++v) {
    if (!out.assignment.has(v)) fail(ErrorKind::Unsolvable, "variable " + p.variables[v] + " cannot be derived");
  }
  for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
    if (!check_constraint(p.constraints[ci], out.assignment)) {
      fail(ErrorKind::Inconsistency, "constraint " + std::to_string(ci) + " is violated by the derived assignment");
    }
  }
  out.dependencies.max_depth = depth.empty() ? 0 : *std::max_element(depth.begin(), depth.end());
  return out;
}

std::vector<int> point_depths(const Problem& p) { return solve(p).dependencies.point_depth; }

namespace {

void write_constraint(std::ostringstream& os, const Constraint& c) {
  os << kind_name(c.kind) << " (";
  for (VarId v : c.vars()) os << ' ' << v;
  os << " )";
}

void write_bindings(std::ostringstream& os, const std::vector<VarId>& vars, const Assignment& a, int n) {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (i) os << " ,";
    os << ' ' << vars[i] << " = #" << point_to_index(a.at(vars[i]), n);
  }
  os << " ;\n";
}

}  // namespace

std::string emit_solver_log(const Problem& p) {
  const Solution sol = solve(p);
  std::ostringstream os;
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    if (i) os << " , ";
    write_constraint(os, p.constraints[i]);
  }
  os << " ;\n";
  os << "fixed";
  write_bindings(os, p.knowns(), p.fixed, p.grid_side);
  os << "Solution begins ;\n";
  for (const auto& step : sol.steps) {
    os << "Con ";
    write_constraint(os, p.constraints[step.constraint]);
    os << " ;\nKnown";
    write_bindings(os, step.known, sol.assignment, p.grid_side);
    os << "Impl";
    write_bindings(os, step.implied, sol.assignment, p.grid_side);
  }
  os << "Solution ends\n";
  return os.str();
}

namespace {

class TokenStream {
 public:
  explicit TokenStream(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\r' || text[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ' && text[j] != '\n' && text[j] != '\r' && text[j] != '\t') ++j;
      if (j > i) tokens_.push_back(text.substr(i, j - i));
      i = j;
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }
  std::string_view peek() const { return done() ? std::string_view{} : tokens_[pos_]; }
  std::string_view next() {
    if (done()) fail(ErrorKind::Format, "solver log ends unexpectedly");
    return tokens_[pos_++];
  }
  void expect(std::string_view token) {
    const auto got = next();
    if (got != token) {
      fail(ErrorKind::Format, "solver log: expected '" + std::string(token) + "' but found '" + std::string(got) + "'");
    }
  }
  int integer(std::string_view token) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      fail(ErrorKind::Format, "solver log: expected integer, found '" + std::string(token) + "'");
    }
    return value;
  }
  int integer() { return integer(next()); }

 private:
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
};

Constraint read_constraint(TokenStream& ts) {
  Constraint c;
  c.kind = parse_kind(ts.next());
  ts.expect("(");
  for (int i = 0; i < arity(c.kind); ++i) c.args[i] = ts.integer();
  ts.expect(")");
  return c;
}

std::vector<std::pair<VarId, int>> read_bindings(TokenStream& ts) {
  std::vector<std::pair<VarId, int>> out;
  if (ts.peek() == ";") {
    ts.next();
    return out;
  }
  while (true) {
    const VarId v = ts.integer();
    ts.expect("=");
    const auto point = ts.next();
    if (point.size() < 2 || point[0] != '#') fail(ErrorKind::Format, "solver log: expected #<index>");
    out.emplace_back(v, ts.integer(point.substr(1)));
    const auto sep = ts.next();
    if (sep == ";") break;
    if (sep != ",") fail(ErrorKind::Format, "solver log: expected ',' or ';'");
  }
  return out;
}

}  // namespace

ParsedSolverLog parse_solver_log(std::string_view text) {
  TokenStream ts(text);
  ParsedSolverLog out;
  VarId max_var = -1;
  auto note = [&](VarId v) { max_var = std::max(max_var, v); };

  while (true) {
    out.constraints.push_back(read_constraint(ts));
    for (VarId v : out.constraints.back().vars()) note(v);
    const auto sep = ts.next();
    if (sep == ";") break;
    if (sep != ",") fail(ErrorKind::Format, "solver log: expected ',' or ';' between constraints");
  }
  ts.expect("fixed");
  out.fixed = read_bindings(ts);
  for (auto& [v, _] : out.fixed) note(v);
  ts.expect("Solution");
  ts.expect("begins");
  ts.expect(";");
  while (ts.peek() == "Con") {
    ts.next();
    ParsedSolverLog::Step step;
    step.constraint = read_constraint(ts);
    ts.expect(";");
    ts.expect("Known");
    step.known = read_bindings(ts);
    ts.expect("Impl");
    step.implied = read_bindings(ts);
    for (auto& [v, _] : step.implied) note(v);
    out.steps.push_back(std::move(step));
  }
  ts.expect("Solution");
  ts.expect("ends");
  if (!ts.done()) fail(ErrorKind::Format, "solver log: trailing tokens after 'Solution ends'");
  out.variable_count = static_cast<std::size_t>(max_var + 1);
  return out;
}

}  // namespace geocsp
