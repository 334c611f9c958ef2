#include "starshift/cone.hpp"

#include <stdexcept>

namespace starshift {

ConePoint::ConePoint(int b, BigRat pos) : branch(b), t(std::move(pos)) {
  if (branch < 0 || branch > 2) throw std::invalid_argument("ConePoint: branch must be 0..2");
  if (t < 0 || t > 1) throw std::invalid_argument("ConePoint: t must be in [0, 1]");
  if (t == 0) branch = 0;  // the apex is one point
}

bool operator==(const ConePoint& a, const ConePoint& b) {
  return a.branch == b.branch && a.t == b.t;
}

bool operator!=(const ConePoint& a, const ConePoint& b) { return !(a == b); }

BigRat cone_distance(const ConePoint& a, const ConePoint& b) {
  if (a.branch == b.branch) {
    BigRat d = a.t - b.t;
    return d < 0 ? BigRat(-d) : d;
  }
  return a.t + b.t;
}

BigRat linf_distance(const std::vector<ConePoint>& a, const std::vector<ConePoint>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("linf_distance: tuple sizes differ");
  BigRat m(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    BigRat d = cone_distance(a[i], b[i]);
    if (d > m) m = d;
  }
  return m;
}

Net Net::dyadic(int n) {
  if (n < 1) throw std::invalid_argument("Net::dyadic: level must be >= 1");
  Net net;
  net.level = n;
  net.delta = pow_rat(BigRat(1, 2), n);
  net.conforming = true;
  net.points.emplace_back(0, BigRat(0));
  long steps = 1L << n;
  for (int b = 0; b < 3; ++b)
    for (long j = 1; j <= steps; ++j) net.points.emplace_back(b, BigRat(j, steps));
  return net;
}

Net Net::small_profile() {
  Net net = dyadic(1);
  net.points.resize(3);  // apex, (0, 1/2), (0, 1)
  net.conforming = false;
  return net;
}

ConePoint Net::point_at(long digit) const {
  if (digit < 0 || digit >= nu()) throw std::out_of_range("Net::point_at: digit out of range");
  if (conforming) {
    if (digit == 0) return ConePoint(0, BigRat(0));
    long steps = 1L << level;
    long b = (digit - 1) / steps;
    long j = (digit - 1) % steps + 1;
    return ConePoint(static_cast<int>(b), BigRat(j, steps));
  }
  return points[static_cast<std::size_t>(digit)];
}

ConePoint net_power_slot(const Net& net, const XNum& slots, const XNum& index,
                         const XNum& slot) {
  XNum place = slots - XNum(1) - slot;
  if (place.cmp(XNum(0)) < 0) throw std::invalid_argument("net_power_slot: slot out of range");
  unsigned nu = static_cast<unsigned>(net.nu());
  if (index.is_explicit() && index.as_int() == 0) return net.point_at(0);
  XNum shifted = XNum::floor_div(index, XNum::pow(nu, place)).first;
  XNum digit = XNum::floor_div(shifted, XNum(static_cast<long>(nu))).second;
  return net.point_at(static_cast<long>(digit.as_int()));
}

std::vector<ConePoint> net_power_index(const Net& net, long slots, const XNum& index) {
  std::vector<ConePoint> out;
  out.reserve(static_cast<std::size_t>(slots));
  for (long s = 0; s < slots; ++s)
    out.push_back(net_power_slot(net, XNum(slots), index, XNum(s)));
  return out;
}

XNum net_power_rank(const Net& net, const std::vector<ConePoint>& tuple) {
  XNum acc(0);
  XNum nu(static_cast<long>(net.nu()));
  for (const auto& p : tuple) {
    long digit = -1;
    for (long d = 0; d < net.nu(); ++d)
      if (net.point_at(d) == p) {
        digit = d;
        break;
      }
    if (digit < 0) throw std::invalid_argument("net_power_rank: point not in net");
    acc = acc * nu + XNum(digit);
  }
  return acc;
}

namespace {

BigInt l1_norm_z(const GroupElement& g) {
  BigInt v = g.c[0].as_int();
  return v < 0 ? BigInt(-v) : v;
}

}  // namespace

BigRat WeightScheme::weight(const GroupElement& g) const {
  if (gid == GroupId::Z) {
    return BigRat(1, pow_int(3, l1_norm_z(g)));
  }
  BigInt a = g.c[0].as_int();
  BigInt b = g.c[1].as_int();
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  return BigRat(1, pow_int(5, BigInt(a + b)));
}

BigRat WeightScheme::total() const {
  return gid == GroupId::Z ? BigRat(2) : BigRat(9, 4);
}

BigRat WeightScheme::tail_outside_ball(long radius) const {
  if (radius < 0) return total();
  if (gid == GroupId::Z) {
    // 2 * sum_{k > R} 3^-k = 3^-R
    return BigRat(1, pow_int(3, radius));
  }
  // Ball sums factor per axis: (sum_{|k| <= R} 5^-|k|)^2 = ((3 - 5^-R)/2)^2.
  BigRat axis = (BigRat(3) - BigRat(1, pow_int(5, radius))) / 2;
  return total() - axis * axis;
}

RatInterval rho_truncated(GroupId gid, const PatternOracle& a, const PatternOracle& b,
                          long radius) {
  if (radius < 0) throw std::invalid_argument("rho_truncated: radius must be >= 0");
  WeightScheme w(gid);
  BigRat lower(0);
  auto ball = FiniteSubset::from_box(gid, folner_box(gid, XNum(radius)));
  for (const auto& g : ball.elements(1u << 20)) {
    BigRat d = linf_distance(a(g), b(g));
    if (d != 0) lower += w.weight(g) * d;
  }
  BigRat slack = w.tail_outside_ball(radius) * 2;  // cone diameter 2
  return {lower, lower + slack};
}

RatInterval rho_F_truncated(GroupId gid, const PatternOracle& a, const PatternOracle& b,
                            const FiniteSubset& F, long radius) {
  if (F.empty_set()) throw std::invalid_argument("rho_F_truncated: F must be nonempty");
  RatInterval best{BigRat(-1), BigRat(-1)};
  for (const auto& f : F.elements(1u << 20)) {
    PatternOracle sa = [&a, f](const GroupElement& g) { return a(compose(g, f)); };
    PatternOracle sb = [&b, f](const GroupElement& g) { return b(compose(g, f)); };
    RatInterval r = rho_truncated(gid, sa, sb, radius);
    if (r.lo > best.lo) best.lo = r.lo;
    if (r.hi > best.hi) best.hi = r.hi;
  }
  return best;
}

}  // namespace starshift
