#include <algorithm>
#include <random>
#include <vector>

#include "doctest.h"
#include "starshift/group.hpp"

using namespace starshift;

namespace {

GroupElement ge1(long x) { return GroupElement({XNum(x)}); }
GroupElement ge2(long x, long y) { return GroupElement({XNum(x), XNum(y)}); }

Box box1(long lo, long hi) { return Box({XNum(lo)}, {XNum(hi)}); }
Box box2(long lx, long ly, long hx, long hy) {
  return Box({XNum(lx), XNum(ly)}, {XNum(hx), XNum(hy)});
}

// Independent brute-force boundary: scan a window guaranteed to contain
// every g with Tg meeting F, testing the definition pointwise.
std::vector<GroupElement> brute_boundary(const FiniteSubset& f, const FiniteSubset& t) {
  auto ef = f.elements();
  auto et = t.elements();
  std::vector<GroupElement> out;
  std::vector<GroupElement> candidates;
  for (const auto& p : ef)
    for (const auto& q : et) candidates.push_back(compose(p, invert(q)));
  auto less = [](const GroupElement& a, const GroupElement& b) {
    for (std::size_t i = 0; i < a.c.size(); ++i) {
      int s = a.c[i].cmp(b.c[i]);
      if (s != 0) return s < 0;
    }
    return false;
  };
  std::sort(candidates.begin(), candidates.end(), less);
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const GroupElement& a, const GroupElement& b) {
                                 return equal(a, b);
                               }),
                   candidates.end());
  for (const auto& g : candidates) {
    bool meets = false, exits = false;
    for (const auto& q : et) {
      if (f.contains(compose(q, g)))
        meets = true;
      else
        exits = true;
    }
    if (meets && exits) out.push_back(g);
  }
  return out;
}

bool same_elements(const std::vector<GroupElement>& a, const std::vector<GroupElement>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!equal(a[i], b[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("group identification") {
  CHECK(rank_of(GroupId::Z) == 1);
  CHECK(rank_of(GroupId::Z2) == 2);
  CHECK(group_name(GroupId::Z) == "Z");
  CHECK(group_name(GroupId::Z2) == "Z2");
  CHECK(parse_group("Z") == GroupId::Z);
  CHECK(parse_group("Z2") == GroupId::Z2);
  CHECK(!parse_group("Z3").has_value());
}

TEST_CASE("element algebra") {
  auto e = identity(GroupId::Z2);
  auto g = ge2(3, -5);
  CHECK(equal(compose(g, e), g));
  CHECK(equal(compose(e, g), g));
  CHECK(equal(compose(g, invert(g)), e));
  CHECK(equal(compose(ge2(1, 2), ge2(-4, 7)), ge2(-3, 9)));
  CHECK(!equal(ge2(1, 2), ge2(2, 1)));
}

TEST_CASE("Z enumeration: interleaved signs") {
  long expected[] = {0, 1, -1, 2, -2, 3, -3, 4, -4};
  for (int i = 0; i < 9; ++i) {
    auto g = enumerate_element(GroupId::Z, XNum(i + 1));
    CHECK(g.c[0].as_int() == expected[i]);
  }
  for (long i = 1; i <= 500; ++i) {
    auto g = enumerate_element(GroupId::Z, XNum(i));
    CHECK(enum_rank(GroupId::Z, g).as_int() == i);
  }
  // Rank works on symbolic coordinates too.
  XNum big = XNum::pow(4, XNum(100));
  CHECK(enum_rank(GroupId::Z, GroupElement({big})).cmp(big * XNum(2)) == 0);
  CHECK(enum_rank(GroupId::Z, GroupElement({-big})).cmp(big * XNum(2) + XNum(1)) == 0);
}

TEST_CASE("Z2 enumeration: square shells, lex inside each shell") {
  long expected[][2] = {{0, 0},  {-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                        {0, 1},  {1, -1},  {1, 0},  {1, 1},  {-2, -2}};
  for (int i = 0; i < 10; ++i) {
    auto g = enumerate_element(GroupId::Z2, XNum(i + 1));
    CHECK(g.c[0].as_int() == expected[i][0]);
    CHECK(g.c[1].as_int() == expected[i][1]);
  }
  for (long i = 1; i <= 500; ++i) {
    auto g = enumerate_element(GroupId::Z2, XNum(i));
    CHECK(enum_rank(GroupId::Z2, g).as_int() == i);
  }
  // Shell boundaries: the ball of radius r ends exactly at rank (2r+1)^2.
  CHECK(equal(enumerate_element(GroupId::Z2, XNum(9)), ge2(1, 1)));
  CHECK(equal(enumerate_element(GroupId::Z2, XNum(25)), ge2(2, 2)));
  CHECK(equal(enumerate_element(GroupId::Z2, XNum(26)), ge2(-3, -3)));
}

TEST_CASE("Z2 enumeration covers the Folner box exactly") {
  auto f = FiniteSubset::from_box(GroupId::Z2, folner_box(GroupId::Z2, XNum(3)));
  auto es = f.elements();
  REQUIRE(es.size() == 49);
  std::vector<long> ranks;
  for (const auto& g : es) ranks.push_back(static_cast<long>(enum_rank(GroupId::Z2, g).as_int()));
  std::sort(ranks.begin(), ranks.end());
  for (long i = 0; i < 49; ++i) CHECK(ranks[static_cast<std::size_t>(i)] == i + 1);
}

TEST_CASE("before_region matches enumeration order") {
  for (auto gid : {GroupId::Z, GroupId::Z2}) {
    long n = gid == GroupId::Z ? 200 : 300;
    for (long i = 1; i <= n; ++i) {
      auto g = enumerate_element(gid, XNum(i));
      auto r = before_region(gid, g);
      CHECK(region_size(r).as_int() == i - 1);
    }
    // Membership: before_region(g) holds exactly the ranks below g's.
    for (long i : {1L, 2L, 5L, 9L, 10L, 26L, 49L, 77L}) {
      auto g = enumerate_element(gid, XNum(i));
      auto r = before_region(gid, g);
      for (long j = 1; j <= i + 30; ++j) {
        auto h = enumerate_element(gid, XNum(j));
        CHECK(region_contains(r, h) == (j < i));
      }
    }
  }
  // Symbolic coordinates stay exact: |before(4^50)| = 2*4^50 - 1.
  XNum big = XNum::pow(4, XNum(50));
  auto r = before_region(GroupId::Z, GroupElement({big}));
  CHECK(region_size(r).cmp(big * XNum(2) - XNum(1)) == 0);
}

TEST_CASE("box basics") {
  Box b = box2(-2, 0, 3, 4);
  CHECK(b.size().as_int() == 20);
  CHECK(b.contains(ge2(-2, 0)));
  CHECK(b.contains(ge2(2, 3)));
  CHECK(!b.contains(ge2(3, 0)));
  CHECK(!b.contains(ge2(0, 4)));
  CHECK(box1(5, 5).empty());
  CHECK(box1(5, 4).empty());
  CHECK(box1(5, 4).size().is_zero());

  Box t = box_translate(b, ge2(10, -1));
  CHECK(t.contains(ge2(8, -1)));
  CHECK(!t.contains(ge2(-2, 0)));
  CHECK(t.size().as_int() == 20);

  Box i = box_intersect(box2(0, 0, 5, 5), box2(3, -2, 9, 2));
  CHECK(i.size().as_int() == 4);  // [3,5) x [0,2)
}

TEST_CASE("box subtraction: exact cover of the difference") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<long> d(-8, 8);
  for (int rank = 1; rank <= 2; ++rank) {
    for (int trial = 0; trial < 120; ++trial) {
      std::vector<XNum> alo, ahi, blo, bhi;
      for (int ax = 0; ax < rank; ++ax) {
        long l = d(rng), h = d(rng);
        alo.emplace_back(std::min(l, h));
        ahi.emplace_back(std::max(l, h) + 1);
        l = d(rng), h = d(rng);
        blo.emplace_back(std::min(l, h));
        bhi.emplace_back(std::max(l, h) + 1);
      }
      Box a(alo, ahi), b(blo, bhi);
      auto parts = box_subtract(a, b);
      CHECK(parts.size() <= static_cast<std::size_t>(2 * rank));
      // Size identity |a \ b| = |a| - |a n b| proves disjointness + coverage
      // together with the membership scan below.
      XNum want = a.size() - box_intersect(a, b).size();
      CHECK(region_size(parts).cmp(want) == 0);
      auto gid = rank == 1 ? GroupId::Z : GroupId::Z2;
      for (int s = 0; s < 40; ++s) {
        std::vector<XNum> c;
        for (int ax = 0; ax < rank; ++ax) c.emplace_back(d(rng));
        GroupElement g(c);
        bool in_diff = a.contains(g) && !b.contains(g);
        CHECK(region_contains(parts, g) == in_diff);
        (void)gid;
      }
    }
  }
}

TEST_CASE("finite subsets: sizes, membership, materialization") {
  auto f = FiniteSubset::from_box(GroupId::Z, box1(0, 10));
  CHECK(f.size().as_int() == 10);
  CHECK(f.contains(ge1(0)));
  CHECK(f.contains(ge1(9)));
  CHECK(!f.contains(ge1(10)));
  CHECK(f.elements().size() == 10);

  auto ex = FiniteSubset::from_elements(GroupId::Z, {ge1(3), ge1(1), ge1(3), ge1(-2)});
  CHECK(ex.size().as_int() == 3);  // duplicates collapse
  CHECK(ex.contains(ge1(3)));
  CHECK(!ex.contains(ge1(0)));

  auto big = FiniteSubset::from_box(GroupId::Z2, folner_box(GroupId::Z2, XNum(3000)));
  CHECK_THROWS(big.elements());

  auto tr = translate(f, ge1(-4));
  CHECK(tr.contains(ge1(-4)));
  CHECK(tr.contains(ge1(5)));
  CHECK(!tr.contains(ge1(6)));
}

TEST_CASE("product sets") {
  auto a = FiniteSubset::from_box(GroupId::Z, box1(0, 2));
  auto b = FiniteSubset::from_box(GroupId::Z, box1(0, 3));
  auto ab = product_set(a, b);
  CHECK(ab.size().as_int() == 4);
  CHECK(ab.contains(ge1(0)));
  CHECK(ab.contains(ge1(3)));
  CHECK(!ab.contains(ge1(4)));

  auto c = product_set(FiniteSubset::from_box(GroupId::Z, box1(-1, 2)),
                       FiniteSubset::from_box(GroupId::Z, box1(0, 10)));
  CHECK(c.size().as_int() == 12);
  CHECK(c.contains(ge1(-1)));
  CHECK(c.contains(ge1(10)));

  auto e = FiniteSubset::from_elements(GroupId::Z, {identity(GroupId::Z)});
  auto d = product_set(e, b);
  CHECK(d.size().as_int() == 3);
  CHECK(d.contains(ge1(2)));

  // 2-D Minkowski sum of boxes.
  auto p = product_set(FiniteSubset::from_box(GroupId::Z2, box2(0, 0, 2, 2)),
                       FiniteSubset::from_box(GroupId::Z2, box2(-1, 0, 1, 3)));
  CHECK(p.size().as_int() == 3 * 4);
  CHECK(p.contains(ge2(-1, 0)));
  CHECK(p.contains(ge2(1, 3)));
  CHECK(!p.contains(ge2(2, 0)));
}

TEST_CASE("boundary: pinned small cases") {
  auto F = FiniteSubset::from_box(GroupId::Z, box1(0, 10));
  auto T01 = FiniteSubset::from_box(GroupId::Z, box1(0, 2));
  auto B = boundary(F, T01);
  CHECK(B.size().as_int() == 2);
  CHECK(B.contains(ge1(-1)));
  CHECK(B.contains(ge1(9)));

  auto Te = FiniteSubset::from_box(GroupId::Z, box1(0, 1));  // {identity}
  CHECK(boundary(F, Te).size().is_zero());

  // F = [0,100), T = [0,4): translates clip only near the two ends.
  auto F100 = FiniteSubset::from_box(GroupId::Z, box1(0, 100));
  auto T4 = FiniteSubset::from_box(GroupId::Z, box1(0, 4));
  auto B4 = boundary(F100, T4);
  CHECK(B4.size().as_int() == 6);
  for (long g : {-3, -2, -1, 97, 98, 99}) CHECK(B4.contains(ge1(g)));
  CHECK(!B4.contains(ge1(96)));  // [96,100) sits fully inside F

  // |T| > |F|: every translate that meets F also exits it, so the boundary
  // is the whole outer window [-7, 4).
  auto F4 = FiniteSubset::from_box(GroupId::Z, box1(0, 4));
  auto T8 = FiniteSubset::from_box(GroupId::Z, box1(0, 8));
  auto B8 = boundary(F4, T8);
  CHECK(B8.size().as_int() == 11);
  CHECK(B8.contains(ge1(-7)));
  CHECK(B8.contains(ge1(3)));
  CHECK(!B8.contains(ge1(4)));
}

TEST_CASE("invariance ratio: pinned values") {
  auto F = FiniteSubset::from_box(GroupId::Z, box1(0, 100));
  auto T = FiniteSubset::from_box(GroupId::Z, box1(0, 2));
  CHECK(invariance_ratio(F, T) == BigRat(1, 50));

  auto Te = FiniteSubset::from_box(GroupId::Z, box1(0, 1));
  CHECK(invariance_ratio(FiniteSubset::from_box(GroupId::Z, box1(0, 10)), Te) == BigRat(0));

  CHECK(invariance_ratio(FiniteSubset::from_box(GroupId::Z, box1(0, 4)),
                         FiniteSubset::from_box(GroupId::Z, box1(0, 8))) == BigRat(11, 4));
}

TEST_CASE("boundary box closed form agrees with the definition scan") {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<long> off(-10, 10);
  std::uniform_int_distribution<long> flen(1, 20);
  std::uniform_int_distribution<long> tlen(1, 3);
  for (int rank = 1; rank <= 2; ++rank) {
    auto gid = rank == 1 ? GroupId::Z : GroupId::Z2;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<XNum> flo, fhi, tlo, thi;
      for (int ax = 0; ax < rank; ++ax) {
        long l = off(rng);
        flo.emplace_back(l);
        fhi.emplace_back(l + flen(rng));
        long m = off(rng) / 3;
        tlo.emplace_back(m);
        thi.emplace_back(m + tlen(rng));
      }
      auto F = FiniteSubset::from_box(gid, Box(flo, fhi));
      auto T = FiniteSubset::from_box(gid, Box(tlo, thi));
      auto closed = boundary(F, T);
      auto brute = brute_boundary(F, T);
      CHECK(closed.size().as_int() == static_cast<long>(brute.size()));
      for (const auto& g : brute) CHECK(closed.contains(g));

      // Explicit-operand path must agree as well.
      auto Fx = FiniteSubset::from_elements(gid, F.elements());
      auto Tx = FiniteSubset::from_elements(gid, T.elements());
      auto viaExplicit = boundary(Fx, Tx);
      CHECK(same_elements(viaExplicit.elements(), brute));

      // Product sets agree between the box and explicit paths too.
      auto pBox = product_set(F, T);
      auto pExp = product_set(Fx, Tx);
      CHECK(pBox.size().cmp(pExp.size()) == 0);
      for (const auto& g : pExp.elements()) CHECK(pBox.contains(g));
    }
  }
}

TEST_CASE("boundary is equivariant under right translation") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<long> off(-12, 12);
  std::uniform_int_distribution<long> len(1, 10);
  std::uniform_int_distribution<long> pick(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    int rank = trial % 2 == 0 ? 1 : 2;
    auto gid = rank == 1 ? GroupId::Z : GroupId::Z2;
    std::vector<GroupElement> fe, te;
    for (int i = 0; i < 12; ++i) {
      std::vector<XNum> c;
      for (int ax = 0; ax < rank; ++ax) c.emplace_back(off(rng));
      fe.emplace_back(c);
    }
    for (int i = 0; i < 3; ++i) {
      std::vector<XNum> c;
      for (int ax = 0; ax < rank; ++ax) c.emplace_back(off(rng) / 4);
      te.emplace_back(c);
    }
    auto F = FiniteSubset::from_elements(gid, fe);
    auto T = FiniteSubset::from_elements(gid, te);
    std::vector<XNum> gc;
    for (int ax = 0; ax < rank; ++ax) gc.emplace_back(off(rng));
    GroupElement g(gc);
    auto lhs = boundary(translate(F, g), T);
    auto rhs = translate(boundary(F, T), g);
    CHECK(same_elements(lhs.elements(), rhs.elements()));
  }
}

TEST_CASE("Folner sequence: boundary ratios shrink to zero") {
  // Box test set {0,1} in Z: ratio is exactly 2/(2n+1).
  auto T = FiniteSubset::from_box(GroupId::Z, box1(0, 2));
  BigRat prev(1);
  for (long n : {1L, 2L, 5L, 10L, 20L, 100L, 1000L, 10000L}) {
    auto F = FiniteSubset::from_box(GroupId::Z, folner_box(GroupId::Z, XNum(n)));
    BigRat r = invariance_ratio(F, T);
    CHECK(r == BigRat(2, 2 * n + 1));
    CHECK(r < prev);
    prev = r;
  }
  CHECK(prev == BigRat(2, 20001));

  // Sparse test set {0, 5}: ten split positions once n >= 5.
  auto Ts = FiniteSubset::from_elements(GroupId::Z, {ge1(0), ge1(5)});
  for (long n : {5L, 10L, 20L, 40L}) {
    auto F = FiniteSubset::from_box(GroupId::Z, folner_box(GroupId::Z, XNum(n)));
    auto Fx = FiniteSubset::from_elements(GroupId::Z, F.elements());
    CHECK(invariance_ratio(Fx, Ts) == BigRat(10, 2 * n + 1));
  }

  // Z^2 with the 2x2 test box: ratio 4/(2n+1).
  auto T2 = FiniteSubset::from_box(GroupId::Z2, box2(0, 0, 2, 2));
  for (long n : {2L, 10L, 100L}) {
    auto F = FiniteSubset::from_box(GroupId::Z2, folner_box(GroupId::Z2, XNum(n)));
    CHECK(invariance_ratio(F, T2) == BigRat(4, 2 * n + 1));
  }
}
