#pragma once

#include <functional>
#include <vector>

#include "starshift/group.hpp"
#include "starshift/xnum.hpp"

namespace starshift {

/// A point of the three-pronged cone: three unit segments glued at one apex.
/// branch in {0, 1, 2}, position t in [0, 1] measured from the apex; t == 0
/// is the apex regardless of branch and canonicalizes to branch 0.
struct ConePoint {
  int branch = 0;
  BigRat t = BigRat(0);

  ConePoint() = default;
  ConePoint(int b, BigRat pos);

  bool is_apex() const { return t == 0; }
};

bool operator==(const ConePoint& a, const ConePoint& b);
bool operator!=(const ConePoint& a, const ConePoint& b);

/// Path metric on the cone: |s - t| along a common branch, s + t through the
/// apex otherwise. Diameter 2.
BigRat cone_distance(const ConePoint& a, const ConePoint& b);

/// Max metric on d-fold tuples of cone points. Diameter 2.
BigRat linf_distance(const std::vector<ConePoint>& a, const std::vector<ConePoint>& b);

/// A finite delta-dense subset of the cone used as the symbol alphabet.
/// The dyadic net at level n has delta = 2^-n and 3 * 2^n + 1 points: the
/// apex first, then branch-major with t ascending in steps of 2^-n.
struct Net {
  int level = 1;
  BigRat delta = BigRat(1, 2);
  std::vector<ConePoint> points;
  /// True when the net is delta-dense in the cone (the dyadic nets); the
  /// reduced test profile below is not and is flagged so.
  bool conforming = true;

  static Net dyadic(int n);
  /// Tiny three-point alphabet (apex plus the first two points of the level-1
  /// net) used to keep cross-check constructions small. Not delta-dense.
  static Net small_profile();

  int nu() const { return static_cast<int>(points.size()); }
  /// points[digit] computed without touching the vector, so callers can map
  /// symbolic digit values; digit must still be explicit (< nu).
  ConePoint point_at(long digit) const;
};

/// Tuples over a net, in the fixed product order: an index in
/// [0, nu^(m*d)) spells the tuple in big-endian base-nu digits, slot s
/// holding digit floor(index / nu^(m*d-1-s)) mod nu. Slot s of the flat list
/// is coordinate s mod d of tuple s / d.
ConePoint net_power_slot(const Net& net, const XNum& slots, const XNum& index, const XNum& slot);

/// Materialized form of the same bijection (explicit small indices only).
std::vector<ConePoint> net_power_index(const Net& net, long slots, const XNum& index);

/// Inverse: the index whose digit expansion matches the given flat tuple.
XNum net_power_rank(const Net& net, const std::vector<ConePoint>& tuple);

/// Summable site weights used by the metric on pattern space: weight
/// 3^-|g| on the line (total 2), 5^-(|g1|+|g2|) on the plane (total 9/4).
struct WeightScheme {
  GroupId gid = GroupId::Z;

  explicit WeightScheme(GroupId g) : gid(g) {}

  BigRat weight(const GroupElement& g) const;
  BigRat total() const;
  /// Exact sum of weights outside the centered ball [-radius, radius]^rank.
  BigRat tail_outside_ball(long radius) const;
};

/// Pattern access for metric evaluation: site -> tuple of cone points.
using PatternOracle = std::function<std::vector<ConePoint>(const GroupElement&)>;

/// A certified enclosure of an exact rational quantity.
struct RatInterval {
  BigRat lo, hi;
};

/// Weighted-sum distance between two patterns, truncated to the centered
/// ball of the given radius; the interval accounts for the tail exactly
/// (tail weight times cone diameter).
RatInterval rho_truncated(GroupId gid, const PatternOracle& a, const PatternOracle& b,
                          long radius);

/// max over f in F of rho(shift_f a, shift_f b), where (shift_f x)(g) =
/// x(g + f); same enclosure guarantee, F materialized (capped).
RatInterval rho_F_truncated(GroupId gid, const PatternOracle& a, const PatternOracle& b,
                            const FiniteSubset& F, long radius);

}  // namespace starshift
