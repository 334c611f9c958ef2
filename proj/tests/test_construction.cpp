#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "doctest.h"
#include "starshift/construction.hpp"

using namespace starshift;

namespace {

namespace mp = boost::multiprecision;

GroupElement ze(long v) { return GroupElement({XNum(v)}); }
GroupElement z2e(long a, long b) { return GroupElement({XNum(a), XNum(b)}); }

Box zbox(const XNum& lo, const XNum& hi) { return Box({lo}, {hi}); }
Box zbox(long lo, long hi) { return zbox(XNum(lo), XNum(hi)); }

ConstructionConfig small_cfg(long depth) {
  ConstructionConfig cfg;
  cfg.tower = TowerConfig{GroupId::Z, 4, 0, 0};
  cfg.small_profile = true;
  cfg.max_depth = depth;
  return cfg;
}

ConstructionConfig line_cfg(long depth) {
  ConstructionConfig cfg;
  cfg.tower = TowerConfig{GroupId::Z, 4, 0, 0};
  cfg.max_depth = depth;
  return cfg;
}

ConstructionConfig plane_cfg(long depth) {
  ConstructionConfig cfg;
  cfg.tower = TowerConfig{GroupId::Z2, 4, 0, 0};
  cfg.max_depth = depth;
  return cfg;
}

// Independent materialization of the reduced-alphabet construction over Z
// (growth 4), built from plain long arithmetic and explicit enumeration.
// Level 1: shape [0, 4), every site a star, 3-point alphabet, row of
// 3^4 = 81 tiles, catalog level 5 = [-340, 684), hole of the level-2 block.
// Level 2: shape [-5460, 10924), 10241 stars = 700 catalog stars + 9541 kept.
struct SmallBrute {
  static bool in_hole(long g) { return g >= -340 && g < 684; }
  static bool in_shape2(long g) { return g >= -5460 && g < 10924; }

  // enumeration order of Z: 0, 1, -1, 2, -2, ...
  static long elem_at(long i) {
    if (i == 0) return 0;
    return (i % 2 == 1) ? (i + 1) / 2 : -(i / 2);
  }

  std::set<long> kept;  // the kept inherited stars outside the hole
  long threshold = 0;   // the last of them in enumeration order

  SmallBrute() {
    long need = 9541;
    for (long i = 0; need > 0; ++i) {
      long g = elem_at(i);
      if (in_hole(g)) continue;
      kept.insert(g);
      threshold = g;
      --need;
    }
  }

  struct Sym {
    bool star = false;
    long digit = -1;  // value = alphabet point at this digit when star == false
  };

  // catalog block at level 5: row tiles [4j, 4j + 4) for 0 <= j < 81 carry
  // base-3 digit fills (slot rank = site offset, most significant first),
  // every other tile repeats the all-star level-1 pattern.
  static Sym w1(long g) {
    long j = g >= 0 ? g / 4 : -((-g + 3) / 4);
    long p = g - 4 * j;
    Sym s;
    if (j >= 0 && j < 81) {
      long pw = 1;
      for (long i = 0; i < 3 - p; ++i) pw *= 3;
      s.digit = (j / pw) % 3;
    } else {
      s.star = true;
    }
    return s;
  }

  Sym x2(long g) const {
    if (in_hole(g)) return w1(g);
    Sym s;
    if (kept.count(g))
      s.star = true;
    else
      s.digit = 0;  // dropped inherited stars collapse to the apex tuple
    return s;
  }
};

void check_symbol(const Symbol& got, const SmallBrute::Sym& want, const Net& net) {
  if (want.star) {
    CHECK(got.star);
    return;
  }
  REQUIRE(!got.star);
  REQUIRE(got.value.size() == 1);
  CHECK(got.value[0] == net.point_at(want.digit));
}

const ConditionCheck* find_check(const StepConditionReport& r, const std::string& tag) {
  for (const auto& c : r.checks)
    if (c.tag == tag) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("construction configuration validation") {
  ConstructionConfig cfg = small_cfg(2);
  cfg.d = 0;
  CHECK_THROWS_AS(Construction{cfg}, std::invalid_argument);
  cfg = small_cfg(2);
  cfg.max_depth = 0;
  CHECK_THROWS_AS(Construction{cfg}, std::invalid_argument);
  cfg = small_cfg(2);
  cfg.delta_override = {BigRat(1, 2), BigRat(1)};
  CHECK_THROWS_AS(Construction{cfg}, std::invalid_argument);
  cfg = small_cfg(2);
  cfg.delta_override = {BigRat(0), BigRat(1, 2)};
  CHECK_THROWS_AS(Construction{cfg}, std::invalid_argument);
}

TEST_CASE("reduced-alphabet step records") {
  Construction c(small_cfg(2));
  REQUIRE(c.depth() == 2);

  const StepRecord& s1 = c.step(1);
  CHECK(s1.level == XNum(1));
  CHECK(s1.shape_size == XNum(4));
  CHECK(s1.star_count == XNum(4));
  CHECK(s1.delta == BigRat(1, 2));
  CHECK(s1.net_small);

  const StepRecord& s2 = c.step(2);
  CHECK(s2.level == XNum(7));
  CHECK(s2.shape_size == XNum(16384));
  CHECK(s2.star_count == XNum(10241));
  CHECK(s2.delta == BigRat(1, 4));
  CHECK(s2.catalog_level == XNum(5));
  CHECK(s2.row_size == XNum(81));
  CHECK(s2.carry_shift == XNum(324));
  CHECK(s2.carry_total == XNum(324));
  CHECK(s2.catalog_tiles == XNum(256));
  CHECK(s2.tile_count == XNum(4096));
  CHECK(s2.catalog_star_count == XNum(700));
  CHECK(s2.kept_count == XNum(9541));
  CHECK(s2.inherited_count == XNum(15360));

  REQUIRE(s2.kept.materialized);
  REQUIRE(s2.kept.region.size() == 1);
  CHECK(s2.kept.region[0].lo[0] == XNum(-5282));
  CHECK(s2.kept.region[0].hi[0] == XNum(5283));
  CHECK_FALSE(s2.kept.extra.has_value());

  CHECK(c.shape_box(1).lo[0] == XNum(0));
  CHECK(c.shape_box(1).hi[0] == XNum(4));
  CHECK(c.shape_box(2).lo[0] == XNum(-5460));
  CHECK(c.shape_box(2).hi[0] == XNum(10924));
  CHECK(c.catalog_box(1).lo[0] == XNum(-340));
  CHECK(c.catalog_box(1).hi[0] == XNum(684));

  BlockFamilyDescriptor f1 = c.block_family(1);
  CHECK(f1.star_count == XNum(4));
  CHECK(f1.slot_count == XNum(4));
  CHECK(f1.family_size == XNum(81));
  CHECK(f1.net_small);
  BlockFamilyDescriptor f2 = c.block_family(2);
  CHECK(f2.slot_count == XNum(10241));
  CHECK(f2.family_size == XNum::pow(13, XNum(10241)));
  CHECK(c.net(1).nu() == 3);
  CHECK(c.net(2).nu() == 13);
}

TEST_CASE("reduced-alphabet catalog matches the digit-fill recipe") {
  Construction c(small_cfg(2));
  const Net& net = c.net(1);
  for (long g = -340; g < 684; ++g) {
    Symbol got = c.catalog_pattern(1, ze(g));
    check_symbol(got, SmallBrute::w1(g), net);
  }
}

TEST_CASE("reduced-alphabet level-two block matches explicit materialization") {
  Construction c(small_cfg(2));
  SmallBrute bb;
  CHECK(bb.threshold == -5282);

  const Net& net = c.net(1);
  long stars_seen = 0;
  for (long g = -5460; g < 10924; ++g) {
    SmallBrute::Sym want = bb.x2(g);
    Symbol got = c.block_pattern(2, ze(g));
    check_symbol(got, want, net);
    CHECK(c.is_star_site(2, ze(g)) == want.star);
    stars_seen += want.star ? 1 : 0;
  }
  CHECK(stars_seen == 10241);

  // Periodicity of the full pattern: translates by level-2 tile steps repeat.
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 32; ++t) {
    long g = static_cast<long>(rng() % 16384) - 5460;
    XNum shift = XNum(16384) * (XNum(static_cast<long>(rng() % 4096)) - XNum(2048));
    Symbol a = c.block_pattern(2, ze(g));
    Symbol b = c.pattern_value(2, GroupElement({XNum(g) + shift}));
    CHECK(a == b);
  }
}

TEST_CASE("prefix counts match explicit enumeration") {
  Construction c(small_cfg(2));
  SmallBrute bb;
  std::mt19937_64 rng(77);
  for (int t = 0; t < 40; ++t) {
    long g = static_cast<long>(rng() % 16384) - 5460;
    long inherited_before = 0, stars_before = 0;
    for (long i = 0;; ++i) {
      long e = SmallBrute::elem_at(i);
      if (e == g) break;
      if (!SmallBrute::in_shape2(e)) continue;
      if (!SmallBrute::in_hole(e)) ++inherited_before;
      if (bb.x2(e).star) ++stars_before;
    }
    CHECK(c.count_before(2, ze(g)) == XNum(inherited_before));
    CHECK(c.star_rank(2, ze(g)) == XNum(stars_before));
  }
}

TEST_CASE("explicit star site enumeration") {
  Construction c(small_cfg(2));
  auto s1 = c.star_sites(1);
  REQUIRE(s1.size() == 4);
  for (long i = 0; i < 4; ++i) CHECK(s1[static_cast<std::size_t>(i)].c[0] == XNum(i));

  auto s2 = c.star_sites(2);
  REQUIRE(s2.size() == 10241);
  SmallBrute bb;
  bool all_match = true;
  std::size_t idx = 0;
  for (long i = 0; idx < s2.size(); ++i) {
    long e = SmallBrute::elem_at(i);
    if (!SmallBrute::in_shape2(e) || !bb.x2(e).star) continue;
    all_match = all_match && (s2[idx].c[0] == XNum(e));
    ++idx;
  }
  CHECK(all_match);
}

TEST_CASE("star accounting over windows") {
  Construction c(small_cfg(2));
  SmallBrute bb;

  auto brute_window = [&](long lo, long hi) {
    long n = 0;
    for (long g = lo; g < hi; ++g) {
      // reduce to the level-2 tile through its center
      long q = (g + 5460) >= 0 ? (g + 5460) / 16384 : -((-(g + 5460) + 16383) / 16384);
      long rep = g - 16384 * q;
      n += bb.x2(rep).star ? 1 : 0;
    }
    return n;
  };

  for (auto [lo, hi] : std::vector<std::pair<long, long>>{
           {-20000, -19000}, {-1, 1}, {-17000, 18000}, {324, 325}, {-5460, 10924}}) {
    CHECK(c.pattern_star_count(2, {zbox(lo, hi)}) == XNum(brute_window(lo, hi)));
  }

  // A tile-aligned astronomically long window counts whole tiles exactly.
  XNum t0 = XNum::pow(10, XNum(40));
  XNum runlen = XNum::pow(10, XNum(30));
  XNum lo = XNum(-5460) + XNum(16384) * t0;
  XNum hi = lo + XNum(16384) * runlen;
  CHECK(c.pattern_star_count(2, {zbox(lo, hi)}) == XNum(10241) * runlen);

  // Block-restricted star counts.
  CHECK(c.block_star_count(2, {zbox(-340, 684)}) == XNum(700));
  CHECK(c.block_star_count(2, {zbox(-5460, 10924)}) == XNum(10241));
}

TEST_CASE("windows for J and T") {
  Construction c(small_cfg(2));
  JTWindow w = c.j_and_t(2);
  CHECK(w.t_box.lo[0] == XNum(-5784));
  CHECK(w.t_box.hi[0] == XNum(10600));
  CHECK(w.t_size == XNum(16384));
  CHECK(w.j_size == XNum(10241));
  CHECK(w.shift.c[0] == XNum(-324));

  long hits = 0;
  for (long g = -5784; g < -3784; ++g) {
    bool member = c.j_member(2, ze(g));
    CHECK(member == c.is_star_site(2, ze(g + 324)));
    hits += member ? 1 : 0;
  }
  CHECK(hits > 0);
  CHECK_FALSE(c.j_member(2, ze(-5785)));
  CHECK_FALSE(c.j_member(2, ze(10600)));

  // Carried level-1 stars stay stars one level up, so J nests.
  for (long s = 0; s < 4; ++s) {
    CHECK(c.is_star_site(2, ze(s + 324)));
    CHECK(c.j_member(2, ze(s)));
  }
}

TEST_CASE("z values stabilize to the apexified level-two pattern") {
  Construction c(small_cfg(3));
  CHECK(c.z_horizon(ze(0)) == 1);
  CHECK(c.z_horizon(ze(3)) == 1);
  CHECK(c.z_horizon(ze(4)) == 2);
  CHECK(c.z_horizon(ze(-1)) == 2);
  CHECK(c.z_horizon(ze(-5461)) == 3);
  CHECK(c.z_horizon(ze(10924)) == 3);

  bool all_ok = true;
  for (long g = -5460; g < 10924; ++g) {
    Symbol b = c.block_pattern(2, ze(g));
    std::vector<ConePoint> z = c.z_value(ze(g));
    if (z.size() != 1) {
      all_ok = false;
      break;
    }
    bool ok = b.star ? z[0].is_apex() : (z[0] == b.value[0]);
    all_ok = all_ok && ok;
  }
  CHECK(all_ok);
}

TEST_CASE("line group depth-two records") {
  Construction c(line_cfg(2));
  const StepRecord& s1 = c.step(1);
  CHECK(s1.level == XNum(1));
  CHECK(s1.star_count == XNum(4));
  CHECK_FALSE(s1.net_small);
  CHECK(c.net(1).nu() == 7);

  const StepRecord& s2 = c.step(2);
  CHECK(s2.level == XNum(9));
  CHECK(s2.catalog_level == XNum(7));
  CHECK(s2.row_size == XNum(2401));
  CHECK(s2.carry_shift == XNum(9604));
  CHECK(s2.catalog_tiles == XNum(4096));
  CHECK(s2.tile_count == XNum(65536));
  CHECK(s2.star_count == XNum(163841));
  CHECK(s2.catalog_star_count == XNum(6780));
  CHECK(s2.kept_count == XNum(157061));
  CHECK(s2.inherited_count == XNum(245760));
  REQUIRE(s2.kept.materialized);
  REQUIRE(s2.kept.region.size() == 1);
  CHECK(s2.kept.region[0].lo[0] == XNum(-86722));
  CHECK(s2.kept.region[0].hi[0] == XNum(86723));

  // The kept interval minus the hole carries exactly the kept stars
  // (every site is inherited at this profile: all level-1 sites are stars).
  Region outside = {zbox(-86722, -5460), zbox(10924, 86723)};
  CHECK(c.pattern_star_count(1, outside) == XNum(157061));
}

TEST_CASE("plane group level-one stars") {
  Construction c(plane_cfg(2));
  const StepRecord& s1 = c.step(1);
  CHECK(s1.level == XNum(1));
  CHECK(s1.shape_size == XNum(16));
  CHECK(s1.star_count == XNum(13));

  for (long x = 0; x < 4; ++x)
    for (long y = 0; y < 4; ++y) {
      bool expect = !(x == 3 && y >= 1);
      CHECK(c.is_star_site(1, z2e(x, y)) == expect);
    }

  // Frozen enumeration order of the 13 stars.
  std::vector<std::pair<long, long>> order = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 2},
                                              {1, 2}, {2, 0}, {2, 1}, {2, 2}, {0, 3},
                                              {1, 3}, {2, 3}, {3, 0}};
  auto sites = c.star_sites(1);
  REQUIRE(sites.size() == order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    CHECK(sites[i].c[0] == XNum(order[i].first));
    CHECK(sites[i].c[1] == XNum(order[i].second));
  }
}

TEST_CASE("plane group depth-two records") {
  Construction c(plane_cfg(2));
  const StepRecord& s2 = c.step(2);
  CHECK(s2.level == XNum(21));
  CHECK(s2.catalog_level == XNum(20));
  CHECK(s2.row_size == XNum(BigInt("96889010407")));
  CHECK(s2.row_size == XNum::pow(7, XNum(13)));
  CHECK(s2.carry_shift == XNum(BigInt("387556041628")));
  CHECK(s2.catalog_tiles == XNum::pow(16, XNum(19)));
  CHECK(s2.tile_count == XNum::pow(16, XNum(20)));
  CHECK(s2.shape_size == XNum::pow(2, XNum(84)));
  CHECK(s2.star_count == XNum(5) * XNum::pow(2, XNum(81)) + XNum(1));
  CHECK(s2.catalog_star_count ==
        XNum(13) * (XNum::pow(16, XNum(19)) - XNum::pow(7, XNum(13))));
  CHECK(s2.kept_count == XNum(147) * XNum::pow(2, XNum(76)) +
                             XNum(13) * XNum::pow(7, XNum(13)) + XNum(1));
  CHECK(s2.inherited_count == XNum(195) * XNum::pow(2, XNum(76)));
}

TEST_CASE("plane group kept boundary") {
  Construction c(plane_cfg(2));
  const StepRecord& s2 = c.step(2);
  REQUIRE(s2.kept.materialized);
  REQUIRE(s2.kept.extra.has_value());
  const GroupElement& th = *s2.kept.extra;

  CHECK(c.is_star_site(2, th));
  CHECK(c.count_before(2, th) == s2.kept_count - XNum(1));

  XNum rk = enum_rank(GroupId::Z2, th);
  CHECK(rk.cmp(XNum::pow(2, XNum(82))) > 0);
  CHECK(rk.cmp(XNum::pow(2, XNum(85))) < 0);

  // The hole sits wholly inside the enumeration prefix of the boundary, so
  // the boundary element is the last star of the block in enumeration order.
  Box hole = c.catalog_box(1);
  for (auto [cx, cy] : {std::pair{0, 0}, {0, 1}, {1, 0}, {1, 1}}) {
    GroupElement corner({cx ? hole.hi[0] - XNum(1) : hole.lo[0],
                         cy ? hole.hi[1] - XNum(1) : hole.lo[1]});
    CHECK(enum_rank(GroupId::Z2, corner).cmp(rk) < 0);
  }
  CHECK(c.star_rank(2, th) == s2.star_count - XNum(1));
}

TEST_CASE("plane group catalog digit fills") {
  Construction c(plane_cfg(2));
  const Net& net = c.net(1);
  REQUIRE(net.nu() == 7);
  std::vector<std::pair<long, long>> stars = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 2},
                                              {1, 2}, {2, 0}, {2, 1}, {2, 2}, {0, 3},
                                              {1, 3}, {2, 3}, {3, 0}};

  // Row tile with index j = 3 * 7^5 + 2: digit 3 at place 5, digit 2 at
  // place 0, zeros elsewhere. Slot ranks run most significant first.
  long j = 3 * 16807 + 2;
  auto probe = [&](long star_idx) {
    auto [sx, sy] = stars[static_cast<std::size_t>(star_idx)];
    return c.catalog_pattern(1, z2e(4 * j + sx, sy));
  };
  {
    Symbol s = probe(12 - 5);  // carries digit 3
    REQUIRE(!s.star);
    REQUIRE(s.value.size() == 1);
    CHECK(s.value[0] == net.point_at(3));
  }
  {
    Symbol s = probe(12 - 0);  // carries digit 2
    REQUIRE(!s.star);
    CHECK(s.value[0] == net.point_at(2));
  }
  {
    Symbol s = probe(0);  // most significant digit of j is zero
    REQUIRE(!s.star);
    CHECK(s.value[0].is_apex());
  }
  {
    Symbol s = c.catalog_pattern(1, z2e(4 * j + 3, 1));  // non-star site
    REQUIRE(!s.star);
    CHECK(s.value[0].is_apex());
  }

  // Index zero fills every slot with the apex.
  for (auto [sx, sy] : stars) {
    Symbol s = c.catalog_pattern(1, z2e(sx, sy));
    REQUIRE(!s.star);
    CHECK(s.value[0].is_apex());
  }

  // Tiles off the row repeat the level-1 block verbatim, stars included.
  CHECK(c.catalog_pattern(1, z2e(0, 4)).star);
  {
    Symbol s = c.catalog_pattern(1, z2e(3, 5));
    REQUIRE(!s.star);
    CHECK(s.value[0].is_apex());
  }
}

TEST_CASE("plane group star accounting") {
  Construction c(plane_cfg(2));
  auto star1 = [](long x, long y) {
    long rx = x - 4 * (x >= 0 ? x / 4 : -((-x + 3) / 4));
    long ry = y - 4 * (y >= 0 ? y / 4 : -((-y + 3) / 4));
    return !(rx == 3 && ry >= 1);
  };
  long brute = 0;
  for (long x = -9; x < 14; ++x)
    for (long y = -6; y < 21; ++y) brute += star1(x, y) ? 1 : 0;
  CHECK(c.pattern_star_count(1, {Box({XNum(-9), XNum(-6)}, {XNum(14), XNum(21)})}) ==
        XNum(brute));

  XNum huge = XNum::pow(10, XNum(30));
  // Fully aligned run of tiles.
  CHECK(c.pattern_star_count(
            1, {Box({XNum(0), XNum(0)}, {XNum(4) * huge, XNum(4)})}) == XNum(13) * huge);
  // Aligned along the run, partial across: 6 stars per partial slab.
  CHECK(c.pattern_star_count(
            1, {Box({XNum(0), XNum(1)}, {XNum(4) * huge, XNum(3)})}) == XNum(6) * huge);
}

TEST_CASE("deep line group structure") {
  Construction c(line_cfg(4));
  REQUIRE(c.depth() == 4);

  // The shallow prefix of the plan is depth-independent.
  CHECK(c.step(2).level == XNum(9));
  CHECK(c.step(2).star_count == XNum(163841));

  const StepRecord& s3 = c.step(3);
  CHECK(s3.catalog_level.is_explicit());
  CHECK(s3.level.is_explicit());
  CHECK(s3.level == s3.catalog_level + XNum(9));
  CHECK(s3.row_size == XNum::pow(13, XNum(163841)));

  // Exact oracle for the catalog padding: the smallest e with
  // 2 * 4^e >= 3 * 13^163841 + 2.
  BigInt reach = 3 * mp::pow(BigInt(13), 163841) + 2;
  BigInt e2 = (s3.catalog_level - XNum(9)).as_int();
  CHECK(2 * mp::pow(BigInt(4), e2.convert_to<unsigned>()) >= reach);
  CHECK(2 * mp::pow(BigInt(4), e2.convert_to<unsigned>() - 1) < reach);
  CHECK(e2 > 300000);
  CHECK(e2 < 310000);

  // Star budget of step 3 follows the density formula exactly.
  CHECK(s3.star_count ==
        XNum::floor_div(XNum(9) * XNum::pow(4, s3.level), XNum(16)).first + XNum(1));
  CHECK(s3.star_count.is_explicit());
  CHECK(s3.kept.materialized);

  const StepRecord& s4 = c.step(4);
  CHECK(s4.level == s4.catalog_level + s3.level);
  CHECK(s4.level.is_explicit());
  CHECK_FALSE(s4.shape_size.is_explicit());
  CHECK_FALSE(s4.star_count.is_explicit());
  CHECK(s4.row_size == XNum::pow(25, s3.star_count));
  CHECK(s4.carry_shift == s4.row_size * XNum::pow(4, s3.level));
  CHECK_FALSE(s4.kept.materialized);
  CHECK(c.net(3).nu() == 25);
  CHECK(c.net(4).nu() == 49);

  // Deep tile-aligned counting stays exact.
  XNum s3side = XNum::pow(4, s3.level);
  XNum lo = c.shape_box(4).lo[0];
  XNum runlen = XNum::pow(10, XNum(24));
  CHECK(c.pattern_star_count(4, {zbox(lo, lo + s3side * runlen)}) ==
        s3.star_count * runlen);
}

TEST_CASE("deep plane group guards") {
  Construction c(plane_cfg(3));
  const StepRecord& s3 = c.step(3);
  CHECK(s3.level.is_explicit());
  CHECK(s3.level == s3.catalog_level + XNum(21));
  CHECK(s3.level.cmp(XNum::pow(2, XNum(80))) > 0);
  CHECK_FALSE(s3.shape_size.is_explicit());
  CHECK_FALSE(s3.star_count.is_explicit());
  CHECK_FALSE(s3.kept.materialized);
  CHECK(s3.star_count == XNum(9) * XNum::pow(16, s3.level - XNum(1)) + XNum(1));

  // Carried stars of the previous chain stay stars through the catalog route
  // even where the kept boundary is not materialized.
  XNum h2 = c.step(3).carry_shift;
  CHECK(h2 == XNum::pow(13, c.step(2).star_count) * XNum::pow(4, XNum(21)));
  XNum carry = c.step(3).carry_total;
  GroupElement chain00({carry + XNum(0), XNum(0)});
  GroupElement chain01({carry + XNum(0), XNum(1)});
  CHECK(c.is_star_site(3, chain00));
  CHECK(c.is_star_site(3, chain01));
  CHECK_FALSE(c.is_star_site(3, GroupElement({carry + XNum(3), XNum(1)})));
  XNum r0 = c.star_rank(3, chain00);
  XNum r1 = c.star_rank(3, chain01);
  CHECK(r0.cmp(r1) < 0);

  // Prefix counting works one level down; unaligned windows outside the
  // catalog hole cannot be counted without the kept boundary and say so.
  CHECK(c.count_before(3, chain00).cmp(XNum(0)) > 0);
  XNum far = XNum::pow(4, s3.catalog_level) * XNum(2);
  Region bad = {Box({far, XNum(0)}, {far + XNum(10), XNum(10)})};
  CHECK_THROWS_AS(c.pattern_star_count(3, bad), std::runtime_error);
}

TEST_CASE("planner reports infeasible schedules") {
  {
    ConstructionConfig cfg = small_cfg(2);
    cfg.delta_override = {BigRat(1, 2), BigRat(1, mp::pow(BigInt(4), 70))};
    try {
      Construction c(cfg);
      FAIL("expected a planning failure");
    } catch (const PlanError& e) {
      CHECK(e.tag == "B.2.2");
    }
  }
  {
    // A density arbitrarily close to 1 still fits: the star budget can fill
    // the whole level-1 shape, so step 1 plans with every site a star.
    ConstructionConfig cfg = line_cfg(1);
    BigInt big = mp::pow(BigInt(4), 40);
    cfg.delta_override = {BigRat(big - 1, big)};
    Construction c(cfg);
    CHECK(c.step(1).level == XNum(1));
    CHECK(c.step(1).star_count == c.step(1).shape_size);
  }
}

TEST_CASE("verifier passes the canonical configurations") {
  {
    Construction c(small_cfg(2));
    StepConditionReport r1 = verify_step_conditions(c, 1, 50, 7);
    CHECK(r1.ok);
    REQUIRE(r1.checks.size() == 1);
    CHECK(r1.checks[0].tag == "C.1.3");
    CHECK(r1.checks[0].exact);

    StepConditionReport r2 = verify_step_conditions(c, 2, 50, 7);
    CHECK(r2.ok);
    CHECK(r2.checks.size() == 13);
    for (const auto& ck : r2.checks) {
      INFO(ck.tag << ": " << ck.detail);
      CHECK(ck.pass);
    }
    for (const char* tag : {"B.2.1", "B.2.2", "B.2.3", "B.2.4", "C.2.3"}) {
      const ConditionCheck* ck = find_check(r2, tag);
      REQUIRE(ck != nullptr);
      CHECK(ck->exact);
    }
  }
  {
    Construction c(line_cfg(2));
    StepConditionReport r = verify_step_conditions(c, 2, 50, 11);
    CHECK(r.ok);
    for (const auto& ck : r.checks) {
      INFO(ck.tag << ": " << ck.detail);
      CHECK(ck.pass);
    }
  }
  {
    Construction c(plane_cfg(2));
    StepConditionReport r = verify_step_conditions(c, 2, 50, 13);
    CHECK(r.ok);
    for (const auto& ck : r.checks) {
      INFO(ck.tag << ": " << ck.detail);
      CHECK(ck.pass);
    }
  }
}

TEST_CASE("verifier passes the reduced profile at depth three") {
  Construction c(small_cfg(3));
  StepConditionReport r = verify_step_conditions(c, 3, 50, 17);
  CHECK(r.ok);
  for (const auto& ck : r.checks) {
    INFO(ck.tag << ": " << ck.detail);
    CHECK(ck.pass);
  }
}

TEST_CASE("fixture: non-decreasing density schedule is flagged") {
  ConstructionConfig cfg = small_cfg(2);
  cfg.delta_override = {BigRat(1, 2), BigRat(3, 4)};
  Construction c(cfg);
  StepConditionReport r = verify_step_conditions(c, 2, 50, 19);
  CHECK_FALSE(r.ok);
  const ConditionCheck* bad = find_check(r, "Pre.2.delta");
  REQUIRE(bad != nullptr);
  CHECK_FALSE(bad->pass);
  const ConditionCheck* good = find_check(r, "B.2.4");
  REQUIRE(good != nullptr);
  CHECK(good->pass);
}

TEST_CASE("fixture: carry shift landing inside the row is flagged") {
  ConstructionConfig cfg = small_cfg(2);
  cfg.fixture_h_in_row = true;
  Construction c(cfg);
  StepConditionReport r = verify_step_conditions(c, 2, 50, 23);
  CHECK_FALSE(r.ok);
  const ConditionCheck* bad = find_check(r, "Pre.2.h");
  REQUIRE(bad != nullptr);
  CHECK_FALSE(bad->pass);
}

TEST_CASE("rebuild determinism") {
  Construction a(small_cfg(2));
  Construction b(small_cfg(2));
  CHECK(a.step(2).kept.region[0].lo[0] == b.step(2).kept.region[0].lo[0]);
  CHECK(a.step(2).kept.region[0].hi[0] == b.step(2).kept.region[0].hi[0]);

  StepConditionReport ra = verify_step_conditions(a, 2, 50, 1234);
  StepConditionReport rb = verify_step_conditions(b, 2, 50, 1234);
  REQUIRE(ra.checks.size() == rb.checks.size());
  CHECK(ra.ok == rb.ok);
  for (std::size_t i = 0; i < ra.checks.size(); ++i) {
    CHECK(ra.checks[i].tag == rb.checks[i].tag);
    CHECK(ra.checks[i].pass == rb.checks[i].pass);
    CHECK(ra.checks[i].samples == rb.checks[i].samples);
    CHECK(ra.checks[i].detail == rb.checks[i].detail);
  }
}
