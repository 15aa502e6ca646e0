#include "geocsp/geometry.hpp"

#include <bit>
#include <cstdint>
#include <string>

#include "geocsp/error.hpp"

namespace geocsp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Range: return "range";
    case ErrorKind::MissingAssignment: return "missing_assignment";
    case ErrorKind::Integrality: return "integrality";
    case ErrorKind::Degeneracy: return "degeneracy";
    case ErrorKind::Underdetermined: return "underdetermined";
    case ErrorKind::Unsolvable: return "unsolvable";
    case ErrorKind::Inconsistency: return "inconsistency";
    case ErrorKind::GenerationFailure: return "generation_failure";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Graph: return "graph";
    case ErrorKind::TrainingAbort: return "training_abort";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
  }
  return "unknown";
}

bool on_grid(GridPoint p, int n) { return p.x >= 0 && p.y >= 0 && p.x < n && p.y < n; }

int point_to_index(GridPoint p, int n) {
  if (!on_grid(p, n)) {
    fail(ErrorKind::Range, "point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                               ") outside grid of side " + std::to_string(n));
  }
  return p.x + p.y * n;
}

GridPoint index_to_point(int index, int n) {
  if (index < 0 || index >= n * n) {
    fail(ErrorKind::Range, "grid index " + std::to_string(index) + " outside [0, " + std::to_string(n * n) + ")");
  }
  return {index % n, index / n};
}

char kind_letter(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Midpoint: return 'M';
    case ConstraintKind::Reflection: return 'R';
    case ConstraintKind::Square: return 'S';
    case ConstraintKind::Translation: return 'T';
  }
  return '?';
}

std::string_view kind_name(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Midpoint: return "MIDPOINT";
    case ConstraintKind::Reflection: return "REFLECTION";
    case ConstraintKind::Square: return "SQUARE";
    case ConstraintKind::Translation: return "TRANSLATION";
  }
  return "?";
}

ConstraintKind parse_kind(std::string_view text) {
  for (auto kind : kAllKinds) {
    if (text.size() == 1 && text[0] == kind_letter(kind)) return kind;
    if (text == kind_name(kind)) return kind;
  }
  fail(ErrorKind::Format, "unknown constraint kind '" + std::string(text) + "'");
}

Constraint::Constraint(ConstraintKind k, std::initializer_list<VarId> vars) : kind(k) {
  if (static_cast<int>(vars.size()) != arity(k)) {
    fail(ErrorKind::Dimension, std::string("constraint ") + kind_letter(k) + " takes " +
                                   std::to_string(arity(k)) + " arguments");
  }
  int i = 0;
  for (VarId v : vars) args[i++] = v;
}

GridPoint Assignment::at(VarId v) const {
  if (!has(v)) fail(ErrorKind::MissingAssignment, "variable " + std::to_string(v) + " is unassigned");
  return *points_[v];
}

std::size_t Assignment::assigned_count() const {
  std::size_t n = 0;
  for (const auto& p : points_) n += p.has_value();
  return n;
}

namespace {

using i64 = std::int64_t;

struct Vec2 {
  i64 x;
  i64 y;
};

Vec2 widen(GridPoint p) { return {p.x, p.y}; }

constexpr unsigned kMidpointMasks[] = {0b011, 0b101, 0b110};
constexpr unsigned kReflectionMasks[] = {0b0111, 0b1011};
constexpr unsigned kSquareMasks[] = {0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100};
constexpr unsigned kTranslationMasks[] = {0b0111, 0b1011, 0b1101, 0b1110};

int narrow(i64 v) {
  if (v > INT32_MAX || v < INT32_MIN) fail(ErrorKind::Range, "coordinate overflow");
  return static_cast<int>(v);
}

/// Exact reflection of c across the line through a and b.
GridPoint reflect(GridPoint a, GridPoint b, GridPoint c) {
  const Vec2 u{i64(b.x) - a.x, i64(b.y) - a.y};
  const i64 len2 = u.x * u.x + u.y * u.y;
  if (len2 == 0) fail(ErrorKind::Degeneracy, "reflection axis has coincident points");
  const Vec2 w{i64(c.x) - a.x, i64(c.y) - a.y};
  const i64 dot = w.x * u.x + w.y * u.y;
  // d = a + 2 (w.u / |u|^2) u - w, scaled by |u|^2.
  const i64 nx = i64(a.x) * len2 + 2 * dot * u.x - w.x * len2;
  const i64 ny = i64(a.y) * len2 + 2 * dot * u.y - w.y * len2;
  if (nx % len2 != 0 || ny % len2 != 0) fail(ErrorKind::Integrality, "reflection lands off the lattice");
  return {narrow(nx / len2), narrow(ny / len2)};
}

GridPoint half(i64 x2, i64 y2, const char* what) {
  if (x2 % 2 != 0 || y2 % 2 != 0) fail(ErrorKind::Integrality, what);
  return {narrow(x2 / 2), narrow(y2 / 2)};
}

std::array<GridPoint, 4> resolve_midpoint(std::array<GridPoint, 4> s, unsigned mask) {
  const Vec2 a = widen(s[0]), b = widen(s[1]), c = widen(s[2]);
  switch (mask) {
    case 0b101: s[1] = half(a.x + c.x, a.y + c.y, "midpoint has odd coordinate sum"); break;
    case 0b011: s[2] = {narrow(2 * b.x - a.x), narrow(2 * b.y - a.y)}; break;
    case 0b110: s[0] = {narrow(2 * b.x - c.x), narrow(2 * b.y - c.y)}; break;
    default: fail(ErrorKind::Underdetermined, "midpoint needs exactly two known arguments");
  }
  return s;
}

std::array<GridPoint, 4> resolve_translation(std::array<GridPoint, 4> s, unsigned mask) {
  // A + D == B + C
  switch (mask) {
    case 0b0111: s[3] = s[1] + s[2] - s[0]; break;
    case 0b1011: s[2] = s[0] + s[3] - s[1]; break;
    case 0b1101: s[1] = s[0] + s[3] - s[2]; break;
    case 0b1110: s[0] = s[1] + s[2] - s[3]; break;
    default: fail(ErrorKind::Underdetermined, "translation needs exactly three known arguments");
  }
  return s;
}

std::array<GridPoint, 4> resolve_reflection(std::array<GridPoint, 4> s, unsigned mask) {
  switch (mask) {
    case 0b0111: s[3] = reflect(s[0], s[1], s[2]); break;
    case 0b1011: s[2] = reflect(s[0], s[1], s[3]); break;
    default:
      fail(ErrorKind::Underdetermined, "reflection needs both axis points and exactly one reflected point");
  }
  return s;
}

std::array<GridPoint, 4> resolve_square(std::array<GridPoint, 4> s, unsigned mask) {
  if (std::popcount(mask) != 2 || mask > 0b1111) {
    fail(ErrorKind::Underdetermined, "square needs exactly two known vertices");
  }
  const int i = std::countr_zero(mask);
  const int j = std::countr_zero(mask & (mask - 1));
  if (s[i] == s[j]) fail(ErrorKind::Degeneracy, "square vertices coincide");
  if (j - i == 2) {
    // Diagonal pair (P, R): the others are mid -/+ rot90((R - P) / 2).
    const Vec2 p = widen(s[i]), r = widen(s[j]);
    const Vec2 e{r.x - p.x, r.y - p.y};
    const Vec2 rot_e{-e.y, e.x};
    s[(i + 1) % 4] = half(p.x + r.x - rot_e.x, p.y + r.y - rot_e.y, "diagonal square vertex off the lattice");
    s[(i + 3) % 4] = half(p.x + r.x + rot_e.x, p.y + r.y + rot_e.y, "diagonal square vertex off the lattice");
  } else {
    // Adjacent pair in cycle order: (P, Q) with Q following P.
    const int p = (j - i == 1) ? i : j;  // (0,3) wraps: 3 -> 0
    const int q = (p + 1) % 4;
    const GridPoint side = rot90(s[q] - s[p]);
    s[(p + 2) % 4] = s[q] + side;
    s[(p + 3) % 4] = s[p] + side;
  }
  return s;
}

}  // namespace

bool is_determining_mask(ConstraintKind kind, unsigned mask) {
  for (unsigned m : determining_masks(kind)) {
    if (m == mask) return true;
  }
  return false;
}

std::span<const unsigned> determining_masks(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Midpoint: return kMidpointMasks;
    case ConstraintKind::Reflection: return kReflectionMasks;
    case ConstraintKind::Square: return kSquareMasks;
    case ConstraintKind::Translation: return kTranslationMasks;
  }
  return {};
}

bool check_slots(ConstraintKind kind, const std::array<GridPoint, 4>& s) {
  switch (kind) {
    case ConstraintKind::Midpoint:
      return 2 * i64(s[1].x) == i64(s[0].x) + s[2].x && 2 * i64(s[1].y) == i64(s[0].y) + s[2].y;
    case ConstraintKind::Translation: return s[3] - s[2] == s[1] - s[0];
    case ConstraintKind::Reflection: {
      if (s[0] == s[1]) return false;
      // Midpoint of CD on line AB and CD perpendicular to AB, in doubled coordinates.
      const Vec2 u{i64(s[1].x) - s[0].x, i64(s[1].y) - s[0].y};
      const Vec2 m2{i64(s[2].x) + s[3].x - 2 * i64(s[0].x), i64(s[2].y) + s[3].y - 2 * i64(s[0].y)};
      const Vec2 cd{i64(s[3].x) - s[2].x, i64(s[3].y) - s[2].y};
      const bool mid_on_axis = m2.x * u.y - m2.y * u.x == 0;
      const bool perpendicular = cd.x * u.x + cd.y * u.y == 0;
      return mid_on_axis && perpendicular;
    }
    case ConstraintKind::Square: {
      if (s[0] == s[1]) return false;
      const GridPoint side = rot90(s[1] - s[0]);
      return s[2] == s[1] + side && s[3] == s[0] + side;
    }
  }
  return false;
}

std::array<GridPoint, 4> resolve_slots(ConstraintKind kind, const std::array<GridPoint, 4>& slots,
                                       unsigned known_mask) {
  std::array<GridPoint, 4> out;
  switch (kind) {
    case ConstraintKind::Midpoint: out = resolve_midpoint(slots, known_mask); break;
    case ConstraintKind::Reflection: out = resolve_reflection(slots, known_mask); break;
    case ConstraintKind::Square: out = resolve_square(slots, known_mask); break;
    case ConstraintKind::Translation: out = resolve_translation(slots, known_mask); break;
  }
  return out;
}

bool check_constraint(const Constraint& c, const Assignment& a) {
  std::array<GridPoint, 4> slots{};
  const auto vars = c.vars();
  for (std::size_t i = 0; i < vars.size(); ++i) slots[i] = a.at(vars[i]);
  return check_slots(c.kind, slots);
}

unsigned known_slot_mask(const Constraint& c, const Assignment& a) {
  unsigned mask = 0;
  const auto vars = c.vars();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (a.has(vars[i])) mask |= 1u << i;
  }
  return mask;
}

std::vector<std::pair<VarId, GridPoint>> resolve_constraint(const Constraint& c, const Assignment& a) {
  const unsigned mask = known_slot_mask(c, a);
  if (!is_determining_mask(c.kind, mask)) {
    fail(ErrorKind::Underdetermined, std::string("assigned arguments of ") + kind_letter(c.kind) +
                                         " are not a determining subset");
  }
  std::array<GridPoint, 4> slots{};
  const auto vars = c.vars();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (mask & (1u << i)) slots[i] = a.at(vars[i]);
  }
  const auto solved = resolve_slots(c.kind, slots, mask);

  std::vector<std::pair<VarId, GridPoint>> out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (mask & (1u << i)) continue;
    bool repeated = false;
    for (auto& [v, p] : out) {
      if (v != vars[i]) continue;
      repeated = true;
      if (p != solved[i]) fail(ErrorKind::Inconsistency, "repeated variable resolves to two different points");
    }
    if (!repeated) out.emplace_back(vars[i], solved[i]);
  }
  return out;
}

}  // namespace geocsp
