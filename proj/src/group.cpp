#include "starshift/group.hpp"

#include <algorithm>
#include <stdexcept>

namespace starshift {

namespace {

const XNum kZero;
const XNum kOne(1);

XNum xabs(const XNum& v) { return v.cmp(kZero) < 0 ? -v : v; }

bool lex_less(const GroupElement& a, const GroupElement& b) {
  for (std::size_t i = 0; i < a.c.size(); ++i) {
    int s = a.c[i].cmp(b.c[i]);
    if (s != 0) return s < 0;
  }
  return false;
}

}  // namespace

int rank_of(GroupId id) { return id == GroupId::Z ? 1 : 2; }

std::string group_name(GroupId id) { return id == GroupId::Z ? "Z" : "Z2"; }

std::optional<GroupId> parse_group(const std::string& name) {
  if (name == "Z") return GroupId::Z;
  if (name == "Z2") return GroupId::Z2;
  return std::nullopt;
}

GroupElement identity(GroupId id) {
  return GroupElement(std::vector<XNum>(static_cast<std::size_t>(rank_of(id)), kZero));
}

GroupElement compose(const GroupElement& a, const GroupElement& b) {
  GroupElement r;
  r.c.reserve(a.c.size());
  for (std::size_t i = 0; i < a.c.size(); ++i) r.c.push_back(a.c[i] + b.c[i]);
  return r;
}

GroupElement invert(const GroupElement& a) {
  GroupElement r;
  r.c.reserve(a.c.size());
  for (const auto& v : a.c) r.c.push_back(-v);
  return r;
}

bool equal(const GroupElement& a, const GroupElement& b) {
  if (a.c.size() != b.c.size()) return false;
  for (std::size_t i = 0; i < a.c.size(); ++i)
    if (a.c[i].cmp(b.c[i]) != 0) return false;
  return true;
}

GroupElement enumerate_element(GroupId id, const XNum& index) {
  if (index.cmp(kOne) < 0) throw std::invalid_argument("enumerate_element: index must be >= 1");
  if (id == GroupId::Z) {
    if (index.cmp(kOne) == 0) return identity(id);
    auto [q, r] = XNum::floor_div(index, XNum(2));
    // even index 2k -> +k, odd index 2k+1 -> -k
    XNum v = r.is_zero() ? q : -q;
    return GroupElement({v});
  }
  // Z^2: shell lookup needs an integer square root, so the index must be
  // explicit (every use sits far below the explicit cap).
  BigInt i = index.as_int();
  if (i == 1) return identity(id);
  // smallest rho with (2 rho + 1)^2 >= i
  BigInt im1 = i - 1;
  BigInt t = boost::multiprecision::sqrt(im1);  // floor sqrt
  BigInt rho = (t + 1) / 2;
  auto sq = [](const BigInt& v) { return BigInt(v * v); };
  while (sq(2 * rho + 1) < i) ++rho;
  while (rho > 1 && sq(2 * rho - 1) >= i) --rho;
  BigInt r = i - sq(2 * rho - 1);  // 1..8 rho, lex within shell
  BigInt col_len = 2 * rho + 1;
  auto mk = [](const BigInt& x, const BigInt& y) {
    return GroupElement({XNum(x), XNum(y)});
  };
  if (r <= col_len) return mk(BigInt(-rho), BigInt(-rho + r - 1));
  r -= col_len;
  BigInt mid_cols = 2 * rho - 1;
  if (r <= 2 * mid_cols) {
    BigInt col = (r - 1) / 2, pos = (r - 1) % 2;
    return mk(BigInt(-rho + 1 + col), pos == 0 ? BigInt(-rho) : rho);
  }
  r -= 2 * mid_cols;
  return mk(rho, BigInt(-rho + r - 1));
}

XNum enum_rank(GroupId id, const GroupElement& g) {
  if (id == GroupId::Z) {
    const XNum& v = g.c[0];
    int s = v.cmp(kZero);
    if (s == 0) return kOne;
    if (s > 0) return v * XNum(2);
    return (-v) * XNum(2) + kOne;
  }
  const XNum& x = g.c[0];
  const XNum& y = g.c[1];
  XNum rho = XNum::max(xabs(x), xabs(y));
  if (rho.is_zero()) return kOne;
  XNum base = (rho * XNum(2) - kOne);
  base = base * base;  // ball of radius rho-1 fills ranks 1..(2 rho - 1)^2
  XNum r;
  if (x.cmp(-rho) == 0) {
    r = y + rho + kOne;
  } else {
    XNum col_len = rho * XNum(2) + kOne;
    if (x.cmp(rho) < 0) {
      r = col_len + (x + rho - kOne) * XNum(2) + (y.cmp(-rho) == 0 ? kOne : XNum(2));
    } else {
      r = col_len + (rho * XNum(2) - kOne) * XNum(2) + (y + rho) + kOne;
    }
  }
  return base + r;
}

bool Box::empty() const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (hi[i].cmp(lo[i]) <= 0) return true;
  return lo.empty();
}

XNum Box::size() const {
  if (empty()) return kZero;
  XNum s = kOne;
  for (std::size_t i = 0; i < lo.size(); ++i) s = s * (hi[i] - lo[i]);
  return s;
}

bool Box::contains(const GroupElement& g) const {
  if (empty()) return false;
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (g.c[i].cmp(lo[i]) < 0 || g.c[i].cmp(hi[i]) >= 0) return false;
  return true;
}

Box box_translate(const Box& b, const GroupElement& g) {
  Box r = b;
  for (std::size_t i = 0; i < r.lo.size(); ++i) {
    r.lo[i] = r.lo[i] + g.c[i];
    r.hi[i] = r.hi[i] + g.c[i];
  }
  return r;
}

Box box_intersect(const Box& a, const Box& b) {
  Box r;
  r.lo.reserve(a.lo.size());
  r.hi.reserve(a.lo.size());
  for (std::size_t i = 0; i < a.lo.size(); ++i) {
    r.lo.push_back(XNum::max(a.lo[i], b.lo[i]));
    r.hi.push_back(XNum::min(a.hi[i], b.hi[i]));
  }
  return r;
}

std::vector<Box> box_subtract(const Box& a, const Box& b) {
  if (a.empty()) return {};
  Box mid = box_intersect(a, b);
  if (mid.empty()) return {a};
  std::vector<Box> out;
  // Peel slabs axis by axis around the intersection.
  Box rest = a;
  for (std::size_t i = 0; i < a.lo.size(); ++i) {
    if (rest.lo[i].cmp(mid.lo[i]) < 0) {
      Box slab = rest;
      slab.hi[i] = mid.lo[i];
      if (!slab.empty()) out.push_back(slab);
      rest.lo[i] = mid.lo[i];
    }
    if (mid.hi[i].cmp(rest.hi[i]) < 0) {
      Box slab = rest;
      slab.lo[i] = mid.hi[i];
      if (!slab.empty()) out.push_back(slab);
      rest.hi[i] = mid.hi[i];
    }
  }
  return out;
}

XNum region_size(const Region& r) {
  XNum s = kZero;
  for (const auto& b : r) s = s + b.size();
  return s;
}

bool region_contains(const Region& r, const GroupElement& g) {
  for (const auto& b : r)
    if (b.contains(g)) return true;
  return false;
}

Region region_intersect(const Region& r, const Box& b) {
  Region out;
  for (const auto& x : r) {
    Box m = box_intersect(x, b);
    if (!m.empty()) out.push_back(m);
  }
  return out;
}

Region region_subtract(const Region& r, const Box& b) {
  Region out;
  for (const auto& x : r) {
    auto parts = box_subtract(x, b);
    out.insert(out.end(), parts.begin(), parts.end());
  }
  return out;
}

Region before_region(GroupId id, const GroupElement& g) {
  Region out;
  if (id == GroupId::Z) {
    const XNum& v = g.c[0];
    int s = v.cmp(kZero);
    if (s == 0) return out;
    if (s > 0) {
      out.push_back(Box({kOne - v}, {v}));  // [-(v-1), v)
    } else {
      XNum w = -v;
      out.push_back(Box({kOne - w}, {w + kOne}));  // [-(w-1), w]
    }
    return out;
  }
  const XNum& x = g.c[0];
  const XNum& y = g.c[1];
  XNum rho = XNum::max(xabs(x), xabs(y));
  if (rho.is_zero()) return out;
  XNum bl = kOne - rho, bh = rho;  // ball of radius rho-1
  Box ball({bl, bl}, {bh, bh});
  if (!ball.empty()) out.push_back(ball);
  XNum lo = -rho, hi = rho + kOne;
  if (x.cmp(-rho) == 0) {
    Box part({lo, lo}, {lo + kOne, y});
    if (!part.empty()) out.push_back(part);
    return out;
  }
  out.push_back(Box({lo, lo}, {lo + kOne, hi}));  // full left column
  if (x.cmp(rho) < 0) {
    Box bot({lo + kOne, lo}, {x, lo + kOne});
    Box top({lo + kOne, rho}, {x, hi});
    if (!bot.empty()) out.push_back(bot);
    if (!top.empty()) out.push_back(top);
    if (y.cmp(rho) == 0) out.push_back(Box({x, lo}, {x + kOne, lo + kOne}));
    return out;
  }
  Box bot({lo + kOne, lo}, {rho, lo + kOne});
  Box top({lo + kOne, rho}, {rho, hi});
  if (!bot.empty()) out.push_back(bot);
  if (!top.empty()) out.push_back(top);
  Box part({rho, lo}, {rho + kOne, y});
  if (!part.empty()) out.push_back(part);
  return out;
}

Box folner_box(GroupId id, const XNum& n) {
  int r = rank_of(id);
  std::vector<XNum> lo(static_cast<std::size_t>(r), -n);
  std::vector<XNum> hi(static_cast<std::size_t>(r), n + kOne);
  return Box(std::move(lo), std::move(hi));
}

FiniteSubset FiniteSubset::from_box(GroupId gid, Box b) {
  FiniteSubset f;
  f.gid = gid;
  if (!b.empty()) f.boxes.push_back(std::move(b));
  return f;
}

FiniteSubset FiniteSubset::from_region(GroupId gid, Region r) {
  FiniteSubset f;
  f.gid = gid;
  for (auto& b : r)
    if (!b.empty()) f.boxes.push_back(std::move(b));
  return f;
}

FiniteSubset FiniteSubset::from_elements(GroupId gid, std::vector<GroupElement> es) {
  FiniteSubset f;
  f.gid = gid;
  f.explicit_form = true;
  std::sort(es.begin(), es.end(), lex_less);
  es.erase(std::unique(es.begin(), es.end(),
                       [](const GroupElement& a, const GroupElement& b) { return equal(a, b); }),
           es.end());
  f.elems = std::move(es);
  return f;
}

XNum FiniteSubset::size() const {
  if (explicit_form) return XNum(static_cast<long>(elems.size()));
  return region_size(boxes);
}

bool FiniteSubset::contains(const GroupElement& g) const {
  if (explicit_form) {
    for (const auto& e : elems)
      if (equal(e, g)) return true;
    return false;
  }
  return region_contains(boxes, g);
}

bool FiniteSubset::empty_set() const { return size().is_zero(); }

std::vector<GroupElement> FiniteSubset::elements(std::size_t cap) const {
  if (explicit_form) return elems;
  XNum total = size();
  if (total.cmp(XNum(static_cast<long>(cap))) > 0)
    throw std::runtime_error("FiniteSubset::elements: set too large to materialize");
  std::vector<GroupElement> out;
  for (const auto& b : boxes) {
    if (b.empty()) continue;
    std::vector<BigInt> lo, hi, cur;
    for (std::size_t i = 0; i < b.lo.size(); ++i) {
      lo.push_back(b.lo[i].as_int());
      hi.push_back(b.hi[i].as_int());
      cur.push_back(lo.back());
    }
    while (true) {
      std::vector<XNum> coords;
      coords.reserve(cur.size());
      for (const auto& v : cur) coords.emplace_back(v);
      out.emplace_back(std::move(coords));
      std::size_t axis = cur.size();
      while (axis > 0) {
        --axis;
        if (++cur[axis] < hi[axis]) break;
        cur[axis] = lo[axis];
        if (axis == 0) goto next_box;
      }
    }
  next_box:;
  }
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

FiniteSubset translate(const FiniteSubset& f, const GroupElement& g) {
  FiniteSubset r = f;
  if (f.explicit_form) {
    for (auto& e : r.elems) e = compose(e, g);
    std::sort(r.elems.begin(), r.elems.end(), lex_less);
  } else {
    for (auto& b : r.boxes) b = box_translate(b, g);
  }
  return r;
}

FiniteSubset product_set(const FiniteSubset& a, const FiniteSubset& b) {
  if (!a.explicit_form && !b.explicit_form && a.boxes.size() == 1 && b.boxes.size() == 1) {
    const Box& x = a.boxes[0];
    const Box& y = b.boxes[0];
    Box r;
    for (std::size_t i = 0; i < x.lo.size(); ++i) {
      r.lo.push_back(x.lo[i] + y.lo[i]);
      r.hi.push_back(x.hi[i] + y.hi[i] - kOne);  // hi are exclusive: last sum is (hx-1)+(hy-1)
    }
    return FiniteSubset::from_box(a.gid, r);
  }
  auto ea = a.elements();
  auto eb = b.elements();
  std::vector<GroupElement> sums;
  sums.reserve(ea.size() * eb.size());
  for (const auto& p : ea)
    for (const auto& q : eb) sums.push_back(compose(p, q));
  return FiniteSubset::from_elements(a.gid, std::move(sums));
}

FiniteSubset boundary(const FiniteSubset& f, const FiniteSubset& t) {
  if (t.empty_set()) throw std::invalid_argument("boundary: T must be nonempty");
  if (!f.explicit_form && !t.explicit_form && f.boxes.size() == 1 && t.boxes.size() == 1) {
    const Box& fb = f.boxes[0];
    const Box& tb = t.boxes[0];
    // outer: Tg meets F; core: Tg inside F. Both are boxes; B = outer \ core.
    Box outer, core;
    for (std::size_t i = 0; i < fb.lo.size(); ++i) {
      outer.lo.push_back(fb.lo[i] - tb.hi[i] + kOne);
      outer.hi.push_back(fb.hi[i] - tb.lo[i]);
      core.lo.push_back(fb.lo[i] - tb.lo[i]);
      core.hi.push_back(fb.hi[i] - tb.hi[i] + kOne);
    }
    return FiniteSubset::from_region(f.gid, box_subtract(outer, core));
  }
  auto ef = f.elements();
  auto et = t.elements();
  std::vector<GroupElement> candidates;
  candidates.reserve(ef.size() * et.size());
  for (const auto& p : ef)
    for (const auto& q : et) candidates.push_back(compose(p, invert(q)));
  std::sort(candidates.begin(), candidates.end(), lex_less);
  candidates.erase(
      std::unique(candidates.begin(), candidates.end(),
                  [](const GroupElement& a, const GroupElement& b) { return equal(a, b); }),
      candidates.end());
  std::vector<GroupElement> out;
  for (const auto& g : candidates) {
    bool any = false, all = true;
    for (const auto& q : et) {
      if (f.contains(compose(q, g)))
        any = true;
      else
        all = false;
    }
    if (any && !all) out.push_back(g);
  }
  return FiniteSubset::from_elements(f.gid, std::move(out));
}

BigRat invariance_ratio(const FiniteSubset& f, const FiniteSubset& t) {
  if (f.empty_set()) throw std::invalid_argument("invariance_ratio: F must be nonempty");
  BigInt b = boundary(f, t).size().as_int();
  BigInt n = f.size().as_int();
  return BigRat(b, n);
}

}  // namespace starshift
