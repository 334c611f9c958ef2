#include "starshift/tiling.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

namespace starshift {

namespace {

const XNum kZero;
const XNum kOne(1);

// ceil(a / d) for positive divisor d.
XNum ceil_div(const XNum& a, const XNum& d) {
  return -XNum::floor_div(-a, d).first;
}

}  // namespace

Tower::Tower(TowerConfig cfg) : cfg_(cfg) {
  if (cfg_.gid != GroupId::Z && cfg_.gid != GroupId::Z2)
    throw std::invalid_argument("Tower: unsupported group");
  if (cfg_.growth < 3) throw std::invalid_argument("Tower: growth factor must be >= 3");
}

XNum Tower::side(const XNum& n) const {
  if (!n.is_explicit()) return XNum::pow(static_cast<unsigned>(cfg_.growth), n);
  BigInt key = n.as_int();
  auto it = side_memo_.find(key);
  if (it != side_memo_.end()) return it->second;
  XNum v = XNum::pow(static_cast<unsigned>(cfg_.growth), n);
  side_memo_.emplace(std::move(key), v);
  return v;
}

XNum Tower::anchor(const XNum& n) const {
  // a_1 = 0, a_n = a_{n-1} - gamma^{n-1}: telescoping to
  // -(gamma + ... + gamma^{n-1}) = -gamma * (gamma^{n-1} - 1)/(gamma - 1).
  if (n.is_explicit()) {
    BigInt key = n.as_int();
    auto it = anchor_memo_.find(key);
    if (it != anchor_memo_.end()) return it->second;
    XNum base = XNum::repunit(static_cast<unsigned>(cfg_.growth), n - kOne) *
                XNum(-cfg_.growth);
    if (cfg_.corrupt_level != 0 && n.cmp(XNum(cfg_.corrupt_level)) == 0)
      base = base + XNum(cfg_.corrupt_offset);
    anchor_memo_.emplace(std::move(key), base);
    return base;
  }
  XNum base = XNum::repunit(static_cast<unsigned>(cfg_.growth), n - kOne) *
              XNum(-cfg_.growth);
  if (cfg_.corrupt_level != 0 && n.cmp(XNum(cfg_.corrupt_level)) == 0)
    base = base + XNum(cfg_.corrupt_offset);
  return base;
}

Box Tower::shape(const XNum& n) const {
  XNum a = anchor(n), l = side(n);
  std::vector<XNum> lo(static_cast<std::size_t>(rank()), a);
  std::vector<XNum> hi(static_cast<std::size_t>(rank()), a + l);
  return Box(std::move(lo), std::move(hi));
}

XNum Tower::shape_size(const XNum& n) const {
  XNum l = side(n);
  return rank() == 1 ? l : l * l;
}

GroupElement Tower::tile_center(const XNum& n, const GroupElement& g,
                                const GroupElement& shift) const {
  XNum a = anchor(n), l = side(n);
  GroupElement c;
  c.c.reserve(g.c.size());
  for (std::size_t i = 0; i < g.c.size(); ++i) {
    XNum q = XNum::floor_div(g.c[i] - a - shift.c[i], l).first;
    c.c.push_back(q * l);
  }
  return c;
}

GroupElement Tower::tile_center(const XNum& n, const GroupElement& g) const {
  return tile_center(n, g, identity(cfg_.gid));
}

Box Tower::tile_box(const XNum& n, const GroupElement& center, const GroupElement& shift) const {
  return box_translate(shape(n), compose(center, shift));
}

PartitionReport verify_partition_window(const Tower& tower, const XNum& level, const Box& window,
                                        const GroupElement& shift) {
  PartitionReport rep;
  if (window.empty()) {
    rep.ok = true;
    rep.detail = "empty window";
    return rep;
  }
  int r = tower.rank();
  XNum l = tower.side(level);
  // Grid of candidate tile centers per axis: from the tile containing the
  // low corner to the last center whose tile starts below the window top.
  GroupElement lo_corner(std::vector<XNum>(window.lo.begin(), window.lo.end()));
  GroupElement first = tower.tile_center(level, lo_corner, shift);
  std::vector<std::vector<XNum>> axis_centers(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    XNum a = tower.anchor(level);
    XNum c = first.c[static_cast<std::size_t>(i)];
    while ((a + c + shift.c[static_cast<std::size_t>(i)]).cmp(window.hi[static_cast<std::size_t>(i)]) < 0) {
      axis_centers[static_cast<std::size_t>(i)].push_back(c);
      c = c + l;
    }
  }
  XNum covered = kZero;
  std::vector<std::size_t> idx(static_cast<std::size_t>(r), 0);
  while (true) {
    std::vector<XNum> cc;
    for (int i = 0; i < r; ++i) cc.push_back(axis_centers[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]]);
    GroupElement center(cc);
    Box tile = tower.tile_box(level, center, shift);
    Box piece = box_intersect(tile, window);
    if (!piece.empty()) {
      TileFragment frag;
      frag.center = center;
      frag.whole = piece.size().cmp(tile.size()) == 0;
      frag.piece = std::move(piece);
      covered = covered + frag.piece.size();
      rep.fragments.push_back(std::move(frag));
    }
    std::size_t axis = static_cast<std::size_t>(r);
    while (axis > 0) {
      --axis;
      if (++idx[axis] < axis_centers[axis].size()) break;
      idx[axis] = 0;
      if (axis == 0) goto done;
    }
  }
done:
  if (covered.cmp(window.size()) == 0) {
    rep.ok = true;
  } else {
    std::ostringstream os;
    os << "fragment mass " << covered.str() << " != window size " << window.size().str();
    rep.detail = os.str();
  }
  return rep;
}

CongruenceReport verify_prime_congruence(const Tower& tower, const XNum& level, int sample_pairs,
                                         unsigned long seed) {
  CongruenceReport rep;
  XNum up = level + kOne;
  GroupElement e = identity(tower.gid());
  XNum step_up = tower.center_step(up);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> pick(-1000, 1000);
  auto fragments_of = [&](const GroupElement& center) {
    Box w = tower.tile_box(up, center, e);
    return verify_partition_window(tower, level, w, e);
  };
  for (int p = 0; p < sample_pairs; ++p) {
    std::vector<XNum> c1c, c2c;
    for (int i = 0; i < tower.rank(); ++i) {
      c1c.push_back(XNum(pick(rng)) * step_up);
      c2c.push_back(XNum(pick(rng)) * step_up);
    }
    if (p == 0) {  // always include the degenerate pair at the origin
      c1c.assign(static_cast<std::size_t>(tower.rank()), kZero);
      c2c = c1c;
    }
    GroupElement c1(c1c), c2(c2c);
    auto f1 = fragments_of(c1);
    auto f2 = fragments_of(c2);
    if (!f1.ok || !f2.ok) {
      rep.detail = "tile window not exactly covered: " + (f1.ok ? f2.detail : f1.detail);
      return rep;
    }
    for (const PartitionReport* fr : {&f1, &f2}) {
      for (const auto& frag : fr->fragments) {
        if (!frag.whole) {
          rep.detail = "level-" + level.str() + " tile clipped inside a level-" + up.str() +
                       " tile: fragment at center";
          for (const auto& v : frag.center.c) rep.detail += " " + v.str();
          return rep;
        }
      }
    }
    if (f1.fragments.size() != f2.fragments.size()) {
      rep.detail = "fragment counts differ between sampled tiles";
      return rep;
    }
    GroupElement d = compose(c1, invert(c2));
    for (std::size_t i = 0; i < f1.fragments.size(); ++i) {
      GroupElement moved = compose(f2.fragments[i].center, d);
      if (!equal(moved, f1.fragments[i].center)) {
        rep.detail = "fragment patterns do not correspond under translation";
        return rep;
      }
    }
    ++rep.pairs_checked;
  }
  rep.ok = true;
  return rep;
}

LevelCertificate level_certificate(const Tower& tower, const XNum& level) {
  LevelCertificate cert;
  cert.test_set = tower.shape(level);
  XNum radius = tower.side(level) * level;
  cert.reference_window = folner_box(tower.gid(), radius);
  auto F = FiniteSubset::from_box(tower.gid(), cert.reference_window);
  auto T = FiniteSubset::from_box(tower.gid(), cert.test_set);
  cert.boundary_size = boundary(F, T).size();
  cert.window_size = F.size();
  return cert;
}

BigProportionConstants prop_big_proportion_constants(const Tower& tower, const XNum& level,
                                                     const BigRat& eps) {
  if (eps <= 0) throw std::invalid_argument("prop_big_proportion_constants: eps must be > 0");
  BigProportionConstants out;
  out.K = tower.shape(level);
  out.delta = eps / BigRat(tower.shape_size(level).as_int());
  return out;
}

XNum count_full_tiles(const Tower& tower, const XNum& level, const Box& F,
                      const GroupElement& shift) {
  if (F.empty()) return kZero;
  XNum a = tower.anchor(level), l = tower.side(level);
  XNum count = kOne;
  for (int i = 0; i < F.rank(); ++i) {
    auto iu = static_cast<std::size_t>(i);
    // Center c = l*k fits when F.lo <= a + c + shift and a + c + shift + l <= F.hi.
    XNum klo = ceil_div(F.lo[iu] - a - shift.c[iu], l);
    XNum khi = XNum::floor_div(F.hi[iu] - a - shift.c[iu] - l, l).first;
    XNum axis = khi - klo + kOne;
    if (axis.cmp(kZero) <= 0) return kZero;
    count = count * axis;
  }
  return count;
}

BigProportionResult prop_big_proportion_check(const Tower& tower, const XNum& level,
                                              const BigRat& eps, const Box& F,
                                              const GroupElement& shift) {
  auto constants = prop_big_proportion_constants(tower, level, eps);
  auto Fset = FiniteSubset::from_box(tower.gid(), F);
  auto K = FiniteSubset::from_box(tower.gid(), constants.K);
  BigRat inv = invariance_ratio(Fset, K);
  if (inv >= constants.delta) {
    std::ostringstream os;
    os << "window is not (K, delta)-invariant: ratio " << inv << " >= delta " << constants.delta;
    throw std::invalid_argument(os.str());
  }
  XNum tiles = count_full_tiles(tower, level, F, shift);
  XNum covered = tiles * tower.shape_size(level);
  BigProportionResult res;
  res.ratio = BigRat(covered.as_int(), F.size().as_int());
  res.pass = res.ratio > BigRat(1) - eps;
  return res;
}

ManyTilesConstants prop_many_tiles_constants(const Tower& tower, const XNum& level, long n_tiles) {
  if (n_tiles < 1) throw std::invalid_argument("prop_many_tiles_constants: n_tiles must be >= 1");
  ManyTilesConstants out;
  int r = tower.rank();
  XNum l = tower.side(level);
  // Stage one: R = [0, l)^rank lists tile centers modulo the lattice, so
  // R * C(S) covers the group; K' = R + S - S - R per axis.
  XNum w = l * XNum(2) - XNum(2);  // half-width: (l-1) + (l-1)
  std::vector<XNum> plo(static_cast<std::size_t>(r), -w);
  std::vector<XNum> phi(static_cast<std::size_t>(r), w + kOne);
  out.K_prime = Box(plo, phi);
  out.eps_prime = BigRat(1, 2);
  if (n_tiles == 1) {
    out.K = out.K_prime;
    out.eps = out.eps_prime;
    return out;
  }
  // Stage two: find a Folner box A = [-m, m]^rank that is (K', eps')-
  // invariant, then chain n_tiles disjoint copies of A along the first axis.
  auto Kp = FiniteSubset::from_box(tower.gid(), out.K_prime);
  XNum m = kOne;
  while (true) {
    auto A = FiniteSubset::from_box(tower.gid(), folner_box(tower.gid(), m));
    XNum b = boundary(A, Kp).size();
    // ratio < eps' checked as cross-multiplication to stay exact.
    if ((b * XNum(2)).cmp(A.size()) < 0) break;
    m = m * XNum(2);
  }
  XNum span = m * XNum(2) + kOne;
  std::vector<XNum> lo(static_cast<std::size_t>(r), -m);
  std::vector<XNum> hi(static_cast<std::size_t>(r), m + kOne);
  hi[0] = hi[0] + span * XNum(n_tiles - 1);
  out.K = Box(lo, hi);
  out.eps = BigRat(1, 2);
  return out;
}

BigRat folner_ratio(GroupId gid, const XNum& n, const FiniteSubset& T) {
  auto F = FiniteSubset::from_box(gid, folner_box(gid, n));
  return invariance_ratio(F, T);
}

}  // namespace starshift
