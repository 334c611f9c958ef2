#pragma once

#include <map>
#include <string>
#include <vector>

#include "starshift/group.hpp"
#include "starshift/xnum.hpp"

namespace starshift {

/// Parameters for a nested box tiling tower on Z or Z^2.
struct TowerConfig {
  GroupId gid = GroupId::Z;
  /// Side-length ratio between consecutive levels (>= 3).
  long growth = 4;
  /// Test fixture: shift the anchor of one level to break the alignment
  /// invariants (0 = none).
  long corrupt_level = 0;
  long corrupt_offset = 0;
};

/// A tower of box tilings: level n tiles the group by translates of the
/// shape [a_n, a_n + gamma^n)^rank along the lattice (gamma^n Z)^rank, with
/// a_1 = 0 and a_n = a_{n-1} - gamma^(n-1). Consecutive levels align: every
/// level-(n+1) tile is a disjoint union of whole level-n tiles, and shapes
/// nest with union exhausting the group. Level indices are symbolic, so
/// arbitrarily deep levels stay exact.
class Tower {
 public:
  explicit Tower(TowerConfig cfg);

  GroupId gid() const { return cfg_.gid; }
  int rank() const { return rank_of(cfg_.gid); }
  long growth() const { return cfg_.growth; }
  const TowerConfig& config() const { return cfg_; }

  /// Side length gamma^n.
  XNum side(const XNum& n) const;
  /// Base point coordinate a_n = -gamma * (gamma^(n-1) - 1)/(gamma - 1),
  /// the same on every axis.
  XNum anchor(const XNum& n) const;
  /// Center lattice step at level n (= side(n)).
  XNum center_step(const XNum& n) const { return side(n); }
  /// The shape box [a_n, a_n + gamma^n)^rank.
  Box shape(const XNum& n) const;
  XNum shape_size(const XNum& n) const;

  /// Center of the unique level-n tile of the tiling translated by `shift`
  /// that contains g. Centers lie on (gamma^n Z)^rank.
  GroupElement tile_center(const XNum& n, const GroupElement& g,
                           const GroupElement& shift) const;
  GroupElement tile_center(const XNum& n, const GroupElement& g) const;
  /// The box of the tile with the given center (shape + center + shift).
  Box tile_box(const XNum& n, const GroupElement& center, const GroupElement& shift) const;

 private:
  TowerConfig cfg_;
  // Explicit-level values are exact big integers that grow with the level;
  // cache them so repeated geometry queries at one level cost one powering.
  mutable std::map<BigInt, XNum> side_memo_;
  mutable std::map<BigInt, XNum> anchor_memo_;
};

/// One tile's intersection with a queried window.
struct TileFragment {
  GroupElement center;
  Box piece;
  bool whole = false;  // piece equals the full tile box
};

struct PartitionReport {
  bool ok = false;
  std::vector<TileFragment> fragments;
  std::string detail;
};

/// Checks that level-n tiles cover the window disjointly (fragment sizes
/// add up to the window size) and returns the fragment list in grid order.
PartitionReport verify_partition_window(const Tower& tower, const XNum& level, const Box& window,
                                        const GroupElement& shift);

struct CongruenceReport {
  bool ok = false;
  long pairs_checked = 0;
  std::string detail;
};

/// Checks that level-(n+1) tiles are exactly partitioned into whole level-n
/// tiles, and that sampled pairs of level-(n+1) tiles carry identical
/// level-n fragment patterns up to translation by the center difference.
CongruenceReport verify_prime_congruence(const Tower& tower, const XNum& level, int sample_pairs,
                                         unsigned long seed);

/// Certificate that level n is a good approximate-invariance test set: the
/// boundary of the reference window [-n*L_n, n*L_n]^rank against the shape,
/// recorded as exact sizes (their ratio shrinks like 1/n).
struct LevelCertificate {
  Box test_set;        // the level shape
  Box reference_window;
  XNum boundary_size;
  XNum window_size;
};

LevelCertificate level_certificate(const Tower& tower, const XNum& level);

/// Constants for the covered-proportion property: test set K = the level
/// shape, threshold delta = eps / |K|. Every (K, delta)-invariant window has
/// more than (1 - eps) of its mass covered by whole tiles, for every shift.
struct BigProportionConstants {
  Box K;
  BigRat delta;
};

BigProportionConstants prop_big_proportion_constants(const Tower& tower, const XNum& level,
                                                     const BigRat& eps);

struct BigProportionResult {
  BigRat ratio;
  bool pass = false;
};

/// Exact covered proportion of F by whole level-n tiles of the shifted
/// tiling; throws if F fails the (K, delta)-invariance precondition.
BigProportionResult prop_big_proportion_check(const Tower& tower, const XNum& level,
                                              const BigRat& eps, const Box& F,
                                              const GroupElement& shift);

/// Constants for the tile-count property: any (K, eps)-invariant window
/// contains at least n_tiles whole tiles. Stage one of the underlying
/// argument produces (K', eps'): any (K', eps')-invariant set contains one
/// tile; for n_tiles = 1, K = K'. Otherwise K concatenates n_tiles disjoint
/// translates of a (K', eps')-invariant box.
struct ManyTilesConstants {
  Box K;
  BigRat eps;
  Box K_prime;
  BigRat eps_prime;
};

ManyTilesConstants prop_many_tiles_constants(const Tower& tower, const XNum& level, long n_tiles);

/// Number of whole level-n tiles of the shifted tiling lying inside F
/// (closed form per axis; no materialization).
XNum count_full_tiles(const Tower& tower, const XNum& level, const Box& F,
                      const GroupElement& shift);

/// Exact invariance ratio of the Folner box [-n, n]^rank against T.
BigRat folner_ratio(GroupId gid, const XNum& n, const FiniteSubset& T);

}  // namespace starshift
