#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "starshift/cone.hpp"
#include "starshift/group.hpp"
#include "starshift/tiling.hpp"
#include "starshift/xnum.hpp"

namespace starshift {

/// Iterated block-substitution pipeline over a box tiling tower.
///
/// Step k produces a partial pattern ("block pattern") on the level-n_k
/// shape: some sites carry a point of the d-fold cone power, the rest are
/// undetermined placeholders ("stars"). Step k+1 builds a catalog block
/// that enumerates every possible star filling of the step-k block along an
/// arithmetic row of tiles, embeds that catalog into the next shape, and
/// keeps just enough inherited stars outside it to hit a prescribed density
/// window. All bookkeeping (star counts, kept-region boundaries, row
/// descriptors) is exact at every depth, including levels whose shapes are
/// far too large to materialize.

/// A symbol of a partial pattern: either the undetermined placeholder
/// ("star") or a d-tuple of cone points.
struct Symbol {
  bool star = false;
  std::vector<ConePoint> value;  // size d when star == false

  static Symbol star_site() {
    Symbol s;
    s.star = true;
    return s;
  }
  static Symbol point(std::vector<ConePoint> v) {
    Symbol s;
    s.value = std::move(v);
    return s;
  }
};

bool operator==(const Symbol& a, const Symbol& b);
inline bool operator!=(const Symbol& a, const Symbol& b) { return !(a == b); }

/// Arithmetic progression {start + j*stride : 0 <= j < count} along the
/// first coordinate axis; describes the catalog row without materializing it.
struct ProgressionDescriptor {
  XNum start;
  XNum stride;
  XNum count;
};

/// The kept star set outside the catalog block, realized as an enumeration
/// prefix: a site is kept iff it is an inherited star, lies outside the
/// catalog block, and falls in `region` (or equals `extra`). When the
/// boundary cannot be materialized at this depth, only prefix-shaped counts
/// and pointwise membership are available.
struct KeptSet {
  bool materialized = false;
  Region region;
  std::optional<GroupElement> extra;
};

/// Everything recorded about one step of the pipeline.
struct StepRecord {
  long k = 1;
  XNum level;           // tower level n_k of the block shape
  BigRat delta;         // density parameter of this step
  int net_level = 1;    // value-net level used to fill the previous block
  bool net_small = false;
  XNum star_count;      // number of star sites of the block pattern (m_k)
  XNum shape_size;      // number of sites of the level-n_k shape

  // Transition data from step k-1 (meaningful for k >= 2):
  XNum catalog_level;          // level l_{k-1} of the catalog block
  ProgressionDescriptor row;   // catalog row R_{k-1}
  XNum row_size;               // |R_{k-1}| = nu^(d * m_{k-1})
  XNum carry_shift;            // h_{k-1}: star positions carry forward by it
  XNum carry_total;            // h_1 + ... + h_{k-1} (first axis)
  XNum catalog_tiles;          // q: level-n_{k-1} tiles inside the catalog
  XNum tile_count;             // Q: level-n_{k-1} tiles inside the shape
  XNum catalog_star_count;     // stars of the block pattern inside the catalog
  XNum kept_count;             // inherited stars kept outside the catalog
  XNum inherited_count;        // inherited star sites outside the catalog
  KeptSet kept;
};

/// Descriptor of the family of full patterns obtained by filling the stars
/// of the step-k block pattern with value-net points.
struct BlockFamilyDescriptor {
  long k = 1;
  XNum star_count;   // star sites of the block pattern
  XNum slot_count;   // d * star_count value slots
  int net_level = 1;
  bool net_small = false;
  XNum family_size;  // nu^slot_count distinct fillings
};

struct ConstructionConfig {
  TowerConfig tower;            // group and growth; growth must be >= 3
  long d = 1;                   // cone-power dimension of the symbol space
  long max_depth = 6;           // number of steps K
  bool small_profile = false;   // 3-point level-1 value net (test profile)
  std::vector<BigRat> delta_override;  // schedule override; default 2^-k
  bool fixture_h_in_row = false;  // test fixture: record a carry shift that
                                  // collides with the catalog row

  BigRat delta(long k) const;
};

/// Planner failure carrying the identifier of the violated condition.
struct PlanError : std::runtime_error {
  std::string tag;
  PlanError(std::string t, const std::string& msg)
      : std::runtime_error(msg), tag(std::move(t)) {}
};

/// The J/T window pair of one step: T_k is the block shape pulled back by
/// the accumulated carry shift, J_k the star sites pulled back the same way.
struct JTWindow {
  Box t_box;
  XNum t_size;
  XNum j_size;
  GroupElement shift;  // the translation applied to the shape (negative carry)
};

class Construction {
 public:
  explicit Construction(ConstructionConfig cfg);

  const ConstructionConfig& config() const { return cfg_; }
  const Tower& tower() const { return tower_; }
  GroupId gid() const { return cfg_.tower.gid; }
  int rank() const { return rank_of(cfg_.tower.gid); }
  long depth() const { return static_cast<long>(steps_.size()); }
  const StepRecord& step(long k) const;
  const Net& net(long k) const;  // value net attached to step k
  BlockFamilyDescriptor block_family(long k) const;
  Box shape_box(long k) const;    // box of the level-n_k shape
  Box catalog_box(long k) const;  // box of the level-l_k catalog block (k < K)

  // --- pattern oracles ----------------------------------------------------
  /// Block pattern of step k on the level-n_k shape (may return stars).
  Symbol block_pattern(long k, const GroupElement& g) const;
  /// Catalog block of step k on the level-l_k shape (may return stars).
  Symbol catalog_pattern(long k, const GroupElement& g) const;
  /// Periodic extension of the block pattern over the whole group.
  Symbol pattern_value(long k, const GroupElement& g) const;
  /// The limit pattern: fully determined values, stable across depths.
  /// Requires z_horizon(g) + 1 <= depth().
  std::vector<ConePoint> z_value(const GroupElement& g) const;
  /// Smallest step index whose shape contains g.
  long z_horizon(const GroupElement& g) const;
  PatternOracle z_oracle() const;

  // --- star bookkeeping ---------------------------------------------------
  bool is_star_site(long k, const GroupElement& g) const;
  /// Number of star sites of the block pattern strictly before g in the
  /// group's canonical enumeration order. Exact at every depth.
  XNum star_rank(long k, const GroupElement& g) const;
  /// Stars of the block pattern inside a sub-region of the shape box.
  XNum block_star_count(long k, const Region& v) const;
  /// Stars of the periodic pattern inside an arbitrary region.
  XNum pattern_star_count(long k, const Region& w) const;
  /// Inherited star sites outside the catalog block strictly before g
  /// (the kept-set ordering); defined for k >= 2.
  XNum count_before(long k, const GroupElement& g) const;
  /// Star sites of the block pattern in canonical order; only for shapes
  /// small enough to enumerate (throws otherwise).
  std::vector<GroupElement> star_sites(long k, std::size_t cap = (1u << 20)) const;

  // --- windows ------------------------------------------------------------
  JTWindow j_and_t(long k) const;
  bool j_member(long k, const GroupElement& g) const;

 private:
  ConstructionConfig cfg_;
  Tower tower_;
  std::vector<StepRecord> steps_;
  std::vector<Net> nets_;
  Region level1_stars_;  // star sites of the step-1 block, as a region

  friend struct ConstructionImpl;
};

/// One re-checked condition: `tag` identifies it ("A.3.2", "B.2.4",
/// "C.4.3", "Pre.2.delta", ...), `exact` marks an exhaustive arithmetic
/// check as opposed to a sampled one.
struct ConditionCheck {
  std::string tag;
  bool pass = false;
  bool exact = false;
  long samples = 0;
  std::string detail;
};

struct StepConditionReport {
  long k = 1;
  bool ok = false;
  std::vector<ConditionCheck> checks;
};

/// Independently re-checks every condition defining step k: preconditions
/// and arithmetic inequalities exactly, pattern identities by structured
/// sampling (at least `min_samples` sites per sampled condition).
StepConditionReport verify_step_conditions(const Construction& c, long k,
                                           long min_samples, unsigned long seed);

}  // namespace starshift
