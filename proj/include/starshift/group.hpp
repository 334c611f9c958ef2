#pragma once

#include <optional>
#include <string>
#include <vector>

#include "starshift/xnum.hpp"

namespace starshift {

enum class GroupId { Z, Z2 };

int rank_of(GroupId id);
std::string group_name(GroupId id);
std::optional<GroupId> parse_group(const std::string& name);

/// A lattice group element: one coordinate for Z, two for Z^2. Coordinates
/// are exact symbolic integers so deep-level positions never overflow.
struct GroupElement {
  std::vector<XNum> c;

  GroupElement() = default;
  explicit GroupElement(std::vector<XNum> coords) : c(std::move(coords)) {}
};

GroupElement identity(GroupId id);
GroupElement compose(const GroupElement& a, const GroupElement& b);
GroupElement invert(const GroupElement& a);
bool equal(const GroupElement& a, const GroupElement& b);

/// The fixed enumeration g_1, g_2, ... : for Z it is 0, 1, -1, 2, -2, ...;
/// for Z^2 it walks l-infinity shells outward, lexicographically inside each
/// shell. enumerate_element requires an explicit index for Z^2 (shell lookup
/// takes an integer square root); enum_rank inverts it for any element.
GroupElement enumerate_element(GroupId id, const XNum& index);
XNum enum_rank(GroupId id, const GroupElement& g);

/// Axis-aligned half-open box [lo[i], hi[i]) per axis; the workhorse finite
/// subset of a lattice group. An empty box has hi[i] <= lo[i] on some axis.
struct Box {
  std::vector<XNum> lo, hi;

  Box() = default;
  Box(std::vector<XNum> l, std::vector<XNum> h) : lo(std::move(l)), hi(std::move(h)) {}

  int rank() const { return static_cast<int>(lo.size()); }
  bool empty() const;
  XNum size() const;
  bool contains(const GroupElement& g) const;
};

/// A finite disjoint union of boxes (the invariant is the caller's duty; all
/// constructors here produce disjoint lists).
using Region = std::vector<Box>;

Box box_translate(const Box& b, const GroupElement& g);
Box box_intersect(const Box& a, const Box& b);
/// a minus b as at most 2*rank disjoint boxes.
std::vector<Box> box_subtract(const Box& a, const Box& b);

XNum region_size(const Region& r);
bool region_contains(const Region& r, const GroupElement& g);
Region region_intersect(const Region& r, const Box& b);
Region region_subtract(const Region& r, const Box& b);

/// All positions strictly before g in the enumeration order, as a disjoint
/// box list derived from g's coordinates alone (no rank arithmetic), so it
/// stays exact at symbolic scale. |before_region(g)| = enum_rank(g) - 1.
Region before_region(GroupId id, const GroupElement& g);

/// The centered ball [-n, n]^rank (the Folner sequence F_n).
Box folner_box(GroupId id, const XNum& n);

/// A finite subset in either box-union or explicit-element form.
struct FiniteSubset {
  GroupId gid = GroupId::Z;
  Region boxes;                       // used when !explicit_form
  std::vector<GroupElement> elems;    // used when explicit_form
  bool explicit_form = false;

  static FiniteSubset from_box(GroupId gid, Box b);
  static FiniteSubset from_region(GroupId gid, Region r);
  static FiniteSubset from_elements(GroupId gid, std::vector<GroupElement> es);

  XNum size() const;
  bool contains(const GroupElement& g) const;
  bool empty_set() const;
  /// Materializes all elements (explicit coordinates required, guarded by a
  /// size cap); deterministic order.
  std::vector<GroupElement> elements(std::size_t cap = (1u << 22)) const;
};

FiniteSubset translate(const FiniteSubset& f, const GroupElement& g);
FiniteSubset product_set(const FiniteSubset& a, const FiniteSubset& b);

/// B(F,T) = { g : Tg meets F and Tg meets the complement of F }.
FiniteSubset boundary(const FiniteSubset& f, const FiniteSubset& t);

/// |B(F,T)| / |F| as an exact rational (explicit-size operands).
BigRat invariance_ratio(const FiniteSubset& f, const FiniteSubset& t);

}  // namespace starshift
