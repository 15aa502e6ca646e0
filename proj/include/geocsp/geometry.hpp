#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace geocsp {

using VarId = int;

/// Integer point of the (possibly unbounded) lattice. Points placed on a grid
/// of side n satisfy 0 <= x, y < n; intermediate solver values may not.
struct GridPoint {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
  friend GridPoint operator+(GridPoint a, GridPoint b) { return {a.x + b.x, a.y + b.y}; }
  friend GridPoint operator-(GridPoint a, GridPoint b) { return {a.x - b.x, a.y - b.y}; }
};

/// Counter-clockwise quarter turn, (x, y) -> (-y, x).
constexpr GridPoint rot90(GridPoint v) { return {-v.y, v.x}; }

bool on_grid(GridPoint p, int n);
/// x + y * n. Throws ErrorKind::Range for points outside the grid.
int point_to_index(GridPoint p, int n);
GridPoint index_to_point(int index, int n);

enum class ConstraintKind : std::uint8_t { Midpoint = 0, Reflection = 1, Square = 2, Translation = 3 };

inline constexpr std::array<ConstraintKind, 4> kAllKinds = {
    ConstraintKind::Midpoint, ConstraintKind::Reflection, ConstraintKind::Square,
    ConstraintKind::Translation};

constexpr int arity(ConstraintKind kind) { return kind == ConstraintKind::Midpoint ? 3 : 4; }

/// Single-letter tag: M, R, S, T.
char kind_letter(ConstraintKind kind);
/// Upper-case name used by solver logs: MIDPOINT, REFLECTION, SQUARE, TRANSLATION.
std::string_view kind_name(ConstraintKind kind);
/// Accepts either the letter or the long name.
ConstraintKind parse_kind(std::string_view text);

/// A typed constraint over ordered variable slots. Slot order is significant:
///   M(A,B,C)    B is the midpoint of AC
///   R(A,B,C,D)  C and D mirror each other across line AB
///   S(A,B,C,D)  square with vertices in cyclic order A->B->C->D
///   T(A,B,C,D)  D - C == B - A
struct Constraint {
  ConstraintKind kind = ConstraintKind::Square;
  std::array<VarId, 4> args{-1, -1, -1, -1};

  Constraint() = default;
  Constraint(ConstraintKind k, std::initializer_list<VarId> vars);

  std::span<const VarId> vars() const { return {args.data(), static_cast<std::size_t>(arity(kind))}; }
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Partial map from variable to point.
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(std::size_t variable_count) : points_(variable_count) {}

  std::size_t size() const { return points_.size(); }
  void resize(std::size_t variable_count) { points_.resize(variable_count); }

  bool has(VarId v) const { return v >= 0 && static_cast<std::size_t>(v) < points_.size() && points_[v].has_value(); }
  /// Throws ErrorKind::MissingAssignment when `v` is unassigned.
  GridPoint at(VarId v) const;
  const std::optional<GridPoint>& get(VarId v) const { return points_.at(v); }
  void set(VarId v, GridPoint p) { points_.at(v) = p; }
  void clear(VarId v) { points_.at(v).reset(); }
  std::size_t assigned_count() const;

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<std::optional<GridPoint>> points_;
};

/// Exact predicate. Throws ErrorKind::MissingAssignment if any argument is unassigned.
bool check_constraint(const Constraint& c, const Assignment& a);

/// Slot bitmask of the arguments assigned in `a` (bit i == slot i).
unsigned known_slot_mask(const Constraint& c, const Assignment& a);

/// True when the slots in `mask` uniquely determine the remaining slots.
bool is_determining_mask(ConstraintKind kind, unsigned mask);

/// Every determining slot mask of a kind, in a fixed canonical order.
std::span<const unsigned> determining_masks(ConstraintKind kind);

/// Computes the arguments left unassigned in `a`, given that the assigned
/// arguments are exactly a determining subset. Returns (variable, point) pairs
/// in slot order.
///
/// Errors: ErrorKind::Underdetermined when the assigned slots are not a
/// determining subset, ErrorKind::Degeneracy for a zero-length axis or square
/// side, ErrorKind::Integrality when the unique real solution is off-lattice.
std::vector<std::pair<VarId, GridPoint>> resolve_constraint(const Constraint& c, const Assignment& a);

/// Slot-level resolution: `slots` holds one point per slot of `kind`, and
/// `known_mask` selects which of them are given. Returns all slot values.
std::array<GridPoint, 4> resolve_slots(ConstraintKind kind, const std::array<GridPoint, 4>& slots,
                                       unsigned known_mask);

/// Slot-level form of check_constraint.
bool check_slots(ConstraintKind kind, const std::array<GridPoint, 4>& slots);

}  // namespace geocsp
