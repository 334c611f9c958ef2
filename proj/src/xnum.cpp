#include "starshift/xnum.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace starshift {

namespace mp = boost::multiprecision;

BigInt pow_int(const BigInt& base, const BigInt& exp) {
  if (exp < 0) throw std::invalid_argument("pow_int: negative exponent");
  if (exp > std::numeric_limits<unsigned>::max())
    throw std::overflow_error("pow_int: exponent too large for explicit evaluation");
  return mp::pow(base, static_cast<unsigned>(exp));
}

BigRat pow_rat(const BigRat& base, long exp) {
  if (exp < 0) {
    if (base == 0) throw std::domain_error("pow_rat: 0^negative");
    return BigRat(1) / pow_rat(base, -exp);
  }
  BigRat r = 1, b = base;
  unsigned long e = static_cast<unsigned long>(exp);
  while (e) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

namespace {

// Floor division for (possibly negative) big integers.
BigInt fld(const BigInt& n, const BigInt& d) {
  BigInt q = n / d, r = n % d;
  if (r != 0 && ((r < 0) != (d < 0))) --q;
  return q;
}

unsigned long rat_bits(const BigRat& r) {
  BigInt n = mp::numerator(r);
  if (n == 0) return 1;
  return static_cast<unsigned long>(mp::msb(mp::abs(n))) +
         static_cast<unsigned long>(mp::msb(mp::denominator(r))) + 2;
}

std::vector<std::pair<unsigned, unsigned>> factorize_small(unsigned n) {
  std::vector<std::pair<unsigned, unsigned>> fs;
  for (unsigned p = 2; static_cast<unsigned long>(p) * p <= n; p += (p == 2 ? 1 : 2)) {
    unsigned m = 0;
    while (n % p == 0) { n /= p; ++m; }
    if (m) fs.push_back({p, m});
  }
  if (n > 1) fs.push_back({n, 1});
  return fs;
}

struct Mpfr {
  mpfr_t v;
  explicit Mpfr(mpfr_prec_t p) { mpfr_init2(v, p); }
  ~Mpfr() { mpfr_clear(v); }
  Mpfr(const Mpfr&) = delete;
  Mpfr& operator=(const Mpfr&) = delete;
};

void mpfr_set_bigint(mpfr_t rop, const BigInt& x, mpfr_rnd_t rnd) {
  if (x == 0) { mpfr_set_zero(rop, 1); return; }
  std::string hex = BigInt(mp::abs(x)).str(0, std::ios_base::hex);
  if (x < 0) hex = "-" + hex;
  mpfr_set_str(rop, hex.c_str(), 16, rnd);
}

BigRat mpfr_to_rat(const mpfr_t v) {
  if (mpfr_zero_p(v)) return BigRat(0);
  mpz_t m;
  mpz_init(m);
  mpfr_exp_t e = mpfr_get_z_2exp(m, v);
  size_t len = mpz_sizeinbase(m, 16) + 3;
  std::vector<char> buf(len);
  mpz_get_str(buf.data(), 16, m);
  mpz_clear(m);
  std::string s(buf.data());
  bool neg = !s.empty() && s[0] == '-';
  BigInt mag("0x" + (neg ? s.substr(1) : s));
  if (neg) mag = -mag;
  if (e >= 0) return BigRat(mag << e);
  return BigRat(mag, BigInt(1) << -e);
}

struct RatIv {
  BigRat lo, hi;
};

// Directed-rounding log2 of a positive rational: exact dyadic enclosure.
RatIv log2_iv_rat(const BigRat& x, mpfr_prec_t prec) {
  if (x <= 0) throw std::domain_error("log2_iv_rat: nonpositive");
  BigInt n = mp::numerator(x), d = mp::denominator(x);
  Mpfr a(prec), b(prec), la(prec), lb(prec), lo(prec), hi(prec);
  // lower: log2(n) down - log2(d) up
  mpfr_set_bigint(a.v, n, MPFR_RNDD);
  mpfr_log2(la.v, a.v, MPFR_RNDD);
  mpfr_set_bigint(b.v, d, MPFR_RNDU);
  mpfr_log2(lb.v, b.v, MPFR_RNDU);
  mpfr_sub(lo.v, la.v, lb.v, MPFR_RNDD);
  // upper: log2(n) up - log2(d) down
  mpfr_set_bigint(a.v, n, MPFR_RNDU);
  mpfr_log2(la.v, a.v, MPFR_RNDU);
  mpfr_set_bigint(b.v, d, MPFR_RNDD);
  mpfr_log2(lb.v, b.v, MPFR_RNDD);
  mpfr_sub(hi.v, la.v, lb.v, MPFR_RNDU);
  return {mpfr_to_rat(lo.v), mpfr_to_rat(hi.v)};
}

const RatIv& log2_iv_uint(unsigned x, mpfr_prec_t prec) {
  static std::map<std::pair<unsigned, mpfr_prec_t>, RatIv> cache;
  auto key = std::make_pair(x, prec);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, log2_iv_rat(BigRat(x), prec)).first;
  return it->second;
}

// Exact ceil/floor of a rational.
BigInt rat_floor(const BigRat& r) { return fld(mp::numerator(r), mp::denominator(r)); }

constexpr unsigned long kFoldBits = 512;  // explicit powers below this fold into coeffs

const mpfr_prec_t kPrecLadder[] = {192, 768, 3072, 12288, 49152, 196608, 786432, 2097152};

}  // namespace

namespace xdetail {

enum class FK : uint8_t { Pow, Rep, Atom };

struct Factor {
  FK kind;
  unsigned base = 0;  // prime for Pow, base for Rep
  unsigned mult = 1;  // multiplicity for Rep/Atom
  XNum exp;           // exponent for Pow/Rep
  uint32_t atom = 0;  // registry index for Atom
};

struct Term {
  BigRat coeff;
  std::vector<Factor> fs;
};

struct AtomDef {
  unsigned base;
  XNum x;        // atom value = minimal e with base^e >= x
  XNum lo, hi;   // certified enclosure of e
  std::string key;
  std::string why;  // why base^e = x is impossible (documentation)
};

struct XIv {
  XNum lo, hi;
};

}  // namespace xdetail

using xdetail::AtomDef;
using xdetail::Factor;
using xdetail::FK;
using xdetail::Term;
using xdetail::XIv;

struct XNum::Rep {
  BigRat konst;             // explicit part; the whole value iff terms empty
  std::vector<Term> terms;  // symbolic terms, each with at least one factor
  mutable std::string key;     // in-process canonical key (interned big constants)
  mutable std::string pretty;  // cross-run canonical expression
};

struct XNumImpl {
  using Rep = XNum::Rep;
  using RPtr = std::shared_ptr<const Rep>;

  static const RPtr& zero_rep() {
    static RPtr z = std::make_shared<Rep>();
    return z;
  }

  static XNum wrap(RPtr r) { return XNum(std::move(r)); }
  static const Rep& rep(const XNum& x) { return *x.rep_; }

  // Integer fast paths: rational arithmetic normalizes with a gcd whose
  // binary algorithm is quadratic in the operand size, so ops on O(10^4)-bit
  // explicit values must stay in plain integer arithmetic.
  static const BigInt& knum(const Rep& r) { return r.konst.backend().data().numerator(); }
  static const BigInt& kden(const Rep& r) { return r.konst.backend().data().denominator(); }
  static bool kint(const Rep& r) { return kden(r) == 1; }

  static std::vector<AtomDef>& atoms() {
    static std::vector<AtomDef> reg;
    return reg;
  }

  // ---- canonical keys -------------------------------------------------

  static uint32_t intern_const(const std::string& hexish) {
    static std::unordered_map<std::string, uint32_t> tab;
    auto it = tab.find(hexish);
    if (it == tab.end()) it = tab.emplace(hexish, static_cast<uint32_t>(tab.size())).first;
    return it->second;
  }

  static std::string rat_key(const BigRat& r) {
    if (rat_bits(r) <= 256) return r.str();
    BigInt n = mp::numerator(r);
    std::string hex = (n < 0 ? std::string("-") : std::string()) +
                      BigInt(mp::abs(n)).str(0, std::ios_base::hex) + "/" +
                      mp::denominator(r).str(0, std::ios_base::hex);
    return "z" + std::to_string(intern_const(hex));
  }

  static std::string factor_key(const Factor& f) {
    switch (f.kind) {
      case FK::Pow:
        return "p" + std::to_string(f.base) + "^{" + key(f.exp) + "}";
      case FK::Rep:
        return "r" + std::to_string(f.base) + "m" + std::to_string(f.mult) + "^{" +
               key(f.exp) + "}";
      case FK::Atom:
        return "a" + std::to_string(f.atom) + "m" + std::to_string(f.mult);
    }
    return "?";
  }

  static std::string term_key(const Term& t) {
    std::string s = rat_key(t.coeff);
    for (const auto& f : t.fs) s += "#" + factor_key(f);
    return s;
  }

  static std::string term_struct_key(const Term& t) {  // key without the coefficient
    std::string s;
    for (const auto& f : t.fs) s += "#" + factor_key(f);
    return s;
  }

  static const std::string& key(const XNum& x) {
    const Rep& r = rep(x);
    if (r.key.empty()) {
      if (r.terms.empty()) {
        r.key = "R:" + rat_key(r.konst);
      } else {
        std::string s = "S:" + rat_key(r.konst);
        for (const auto& t : r.terms) s += ";" + term_key(t);
        r.key = s;
      }
    }
    return r.key;
  }

  // ---- pretty printing -------------------------------------------------

  static std::string factor_pretty(const Factor& f) {
    switch (f.kind) {
      case FK::Pow:
        return std::to_string(f.base) + "^(" + pretty(f.exp) + ")";
      case FK::Rep: {
        std::string s = "rep(" + std::to_string(f.base) + ";" + pretty(f.exp) + ")";
        if (f.mult > 1) s += "^" + std::to_string(f.mult);
        return s;
      }
      case FK::Atom: {
        const AtomDef& d = atoms()[f.atom];
        std::string s = "lvl(" + std::to_string(d.base) + ";" + pretty(d.x) + ")";
        if (f.mult > 1) s += "^" + std::to_string(f.mult);
        return s;
      }
    }
    return "?";
  }

  static std::string term_pretty(const Term& t) {
    std::string s = t.coeff.str();
    for (const auto& f : t.fs) s += "*" + factor_pretty(f);
    return s;
  }

  static const std::string& pretty(const XNum& x) {
    const Rep& r = rep(x);
    if (r.pretty.empty()) {
      if (r.terms.empty()) {
        r.pretty = r.konst.str();
      } else {
        std::vector<std::string> parts;
        parts.reserve(r.terms.size() + 1);
        for (const auto& t : r.terms) parts.push_back(term_pretty(t));
        std::sort(parts.begin(), parts.end());
        if (r.konst != 0) parts.push_back(r.konst.str());
        std::string s = parts[0];
        for (size_t i = 1; i < parts.size(); ++i) s += " + " + parts[i];
        r.pretty = s;
      }
    }
    return r.pretty;
  }

  // ---- normalization ---------------------------------------------------

  static bool exp_is_small(const XNum& e, long& out) {
    const Rep& r = rep(e);
    if (!r.terms.empty()) return false;
    const BigRat& v = r.konst;
    if (mp::denominator(v) != 1) return false;
    BigInt n = mp::numerator(v);
    if (n != 0 && mp::msb(mp::abs(n)) > 46) return false;
    out = n.convert_to<long>();
    return true;
  }

  // Approximate bit size of p^e for explicit integer e; huge sentinel if not explicit.
  static double pow_bits(unsigned base, const XNum& e) {
    long ev;
    if (!exp_is_small(e, ev)) return 1e30;
    return static_cast<double>(ev) * std::log2(static_cast<double>(base));
  }

  // Canonicalize one term in place. Returns false if the term vanished.
  // May add an explicit contribution into `konst`.
  static bool canon_term(Term& t, BigRat& konst) {
    if (t.coeff == 0) return false;
    // merge same-prime Pow factors, same-key Rep factors, same-atom factors
    std::vector<Factor> out;
    for (auto& f : t.fs) {
      bool merged = false;
      for (auto& g : out) {
        if (g.kind != f.kind) continue;
        if (f.kind == FK::Pow && g.base == f.base) {
          g.exp = g.exp + f.exp;
          merged = true;
          break;
        }
        if (f.kind == FK::Rep && g.base == f.base && key(g.exp) == key(f.exp)) {
          g.mult += f.mult;
          merged = true;
          break;
        }
        if (f.kind == FK::Atom && g.atom == f.atom) {
          g.mult += f.mult;
          merged = true;
          break;
        }
      }
      if (!merged) out.push_back(f);
    }
    // fold explicit small factors into the coefficient; extract explicit
    // additive parts of Pow exponents (canonical: 2^(n+1) == 2*2^n)
    std::vector<Factor> kept;
    for (auto& f : out) {
      if (f.kind == FK::Pow) {
        long e;
        if (exp_is_small(f.exp, e)) {
          double bits = std::abs(static_cast<double>(e)) * std::log2(static_cast<double>(f.base));
          if (bits <= kFoldBits) {
            t.coeff *= pow_rat(BigRat(f.base), e);
            continue;
          }
          kept.push_back(f);
          continue;
        }
        const Rep& er = rep(f.exp);
        if (!er.terms.empty() && er.konst != 0 && mp::denominator(er.konst) == 1) {
          BigInt c = mp::numerator(er.konst);
          if (mp::msb(mp::abs(c)) <= 9) {  // |c| < 1024
            double bits = std::abs(static_cast<double>(c.convert_to<long>())) *
                          std::log2(static_cast<double>(f.base));
            if (bits <= kFoldBits) {
              t.coeff *= pow_rat(BigRat(f.base), c.convert_to<long>());
              auto nr = std::make_shared<Rep>();
              nr->terms = er.terms;
              Factor nf = f;
              nf.exp = wrap(nr);
              kept.push_back(nf);
              continue;
            }
          }
        }
        kept.push_back(f);
      } else if (f.kind == FK::Rep) {
        long e;
        if (exp_is_small(f.exp, e)) {
          if (e <= 0) return false;  // rep(b;0) == 0 annihilates the term
          double bits = static_cast<double>(e) * std::log2(static_cast<double>(f.base)) *
                        f.mult;
          if (bits <= kFoldBits) {
            BigInt v = (pow_int(BigInt(f.base), BigInt(e)) - 1) / (f.base - 1);
            t.coeff *= pow_rat(BigRat(v), static_cast<long>(f.mult));
            continue;
          }
        }
        kept.push_back(f);
      } else {
        kept.push_back(f);
      }
    }
    t.fs = std::move(kept);
    if (t.coeff == 0) return false;
    if (t.fs.empty()) {
      konst += t.coeff;
      return false;
    }
    // collapse to an explicit value when every factor is explicit and small enough
    double total = static_cast<double>(rat_bits(t.coeff));
    bool explicitable = true;
    for (const auto& f : t.fs) {
      if (f.kind == FK::Atom) { explicitable = false; break; }
      double b = pow_bits(f.base, f.exp) * (f.kind == FK::Rep ? f.mult : 1);
      if (b >= 1e29) { explicitable = false; break; }
      total += std::abs(b);
    }
    if (explicitable && total <= static_cast<double>(kExplicitBitCap)) {
      BigRat v = t.coeff;
      for (const auto& f : t.fs) {
        long e;
        exp_is_small(f.exp, e);
        if (f.kind == FK::Pow) {
          v *= pow_rat(BigRat(f.base), e);
        } else {
          BigInt u = (pow_int(BigInt(f.base), BigInt(e)) - 1) / (f.base - 1);
          v *= pow_rat(BigRat(u), static_cast<long>(f.mult));
        }
      }
      konst += v;
      return false;
    }
    std::sort(t.fs.begin(), t.fs.end(), [](const Factor& a, const Factor& b) {
      return factor_key(a) < factor_key(b);
    });
    return true;
  }

  // Try to express t2 = r * t1 with r explicit rational (same atoms/reps,
  // explicitly small prime-exponent differences). Returns engaged r on success.
  static std::optional<BigRat> ratio_of(const Term& t1, const Term& t2) {
    std::map<unsigned, std::pair<XNum, XNum>> pows;  // prime -> (e1, e2)
    std::vector<std::string> rest1, rest2;
    for (const auto& f : t1.fs) {
      if (f.kind == FK::Pow) pows[f.base].first = f.exp;
      else rest1.push_back(factor_key(f));
    }
    for (const auto& f : t2.fs) {
      if (f.kind == FK::Pow) pows[f.base].second = f.exp;
      else rest2.push_back(factor_key(f));
    }
    if (rest1 != rest2) return std::nullopt;  // both sorted already
    BigRat r = t2.coeff / t1.coeff;
    for (auto& [p, ee] : pows) {
      XNum d = ee.second - ee.first;
      long e;
      if (!exp_is_small(d, e)) return std::nullopt;
      if (std::abs(static_cast<double>(e)) * std::log2(static_cast<double>(p)) > kFoldBits)
        return std::nullopt;
      r *= pow_rat(BigRat(p), e);
    }
    return r;
  }

  static XNum make(BigRat konst, std::vector<Term> terms) {
    std::vector<Term> kept;
    kept.reserve(terms.size());
    for (auto& t : terms)
      if (canon_term(t, konst)) kept.push_back(std::move(t));
    // merge identical-key terms
    std::sort(kept.begin(), kept.end(), [](const Term& a, const Term& b) {
      return term_struct_key(a) < term_struct_key(b);
    });
    std::vector<Term> merged;
    for (auto& t : kept) {
      if (!merged.empty() && term_struct_key(merged.back()) == term_struct_key(t)) {
        merged.back().coeff += t.coeff;
      } else {
        merged.push_back(std::move(t));
      }
    }
    std::vector<Term> alive;
    for (auto& t : merged)
      if (t.coeff != 0) alive.push_back(std::move(t));
    // merge terms whose ratio is an explicit rational: t_j = r * t_i as values,
    // so their sum is t_i with coefficient scaled by (1 + r)
    for (size_t i = 0; i < alive.size(); ++i) {
      if (alive[i].coeff == 0) continue;
      for (size_t j = i + 1; j < alive.size(); ++j) {
        if (alive[j].coeff == 0) continue;
        auto r = ratio_of(alive[i], alive[j]);
        if (r) {
          alive[i].coeff *= (1 + *r);
          alive[j].coeff = 0;
          if (alive[i].coeff == 0) break;
        }
      }
    }
    std::vector<Term> fin;
    for (auto& t : alive)
      if (t.coeff != 0) {
        Term t2 = std::move(t);
        BigRat k2 = 0;
        if (canon_term(t2, k2)) fin.push_back(std::move(t2));
        konst += k2;
      }
    auto r = std::make_shared<Rep>();
    r->konst = std::move(konst);
    r->terms = std::move(fin);
    return wrap(std::move(r));
  }

  // ---- arithmetic -------------------------------------------------------

  static XNum add(const XNum& a, const XNum& b) {
    const Rep& ra = rep(a);
    const Rep& rb = rep(b);
    if (ra.terms.empty() && rb.terms.empty()) {
      auto r = std::make_shared<Rep>();
      if (kint(ra) && kint(rb))
        r->konst = BigRat(BigInt(knum(ra) + knum(rb)));
      else
        r->konst = ra.konst + rb.konst;
      return wrap(std::move(r));
    }
    std::vector<Term> ts = ra.terms;
    ts.insert(ts.end(), rb.terms.begin(), rb.terms.end());
    return make(ra.konst + rb.konst, std::move(ts));
  }

  static XNum neg(const XNum& a) {
    const Rep& ra = rep(a);
    auto r = std::make_shared<Rep>();
    if (ra.terms.empty() && kint(ra))
      r->konst = BigRat(BigInt(-knum(ra)));
    else
      r->konst = -ra.konst;
    r->terms = ra.terms;
    for (auto& t : r->terms) t.coeff = -t.coeff;
    return wrap(std::move(r));
  }

  static Term term_mul(const Term& a, const Term& b) {
    Term t;
    t.coeff = a.coeff * b.coeff;
    t.fs = a.fs;
    t.fs.insert(t.fs.end(), b.fs.begin(), b.fs.end());
    return t;
  }

  static XNum mul(const XNum& a, const XNum& b) {
    const Rep& ra = rep(a);
    const Rep& rb = rep(b);
    if (ra.terms.empty() && rb.terms.empty()) {
      auto r = std::make_shared<Rep>();
      if (kint(ra) && kint(rb))
        r->konst = BigRat(BigInt(knum(ra) * knum(rb)));
      else
        r->konst = ra.konst * rb.konst;
      return wrap(std::move(r));
    }
    std::vector<Term> ts;
    for (const auto& t : ra.terms) {
      if (rb.konst != 0) {
        Term u = t;
        u.coeff *= rb.konst;
        ts.push_back(std::move(u));
      }
      for (const auto& s : rb.terms) ts.push_back(term_mul(t, s));
    }
    if (ra.konst != 0) {
      for (const auto& s : rb.terms) {
        Term u = s;
        u.coeff *= ra.konst;
        ts.push_back(std::move(u));
      }
    }
    return make(ra.konst * rb.konst, std::move(ts));
  }

  static XNum mul_rat(const XNum& a, const BigRat& r) {
    if (r == 0) return XNum();
    const Rep& ra = rep(a);
    auto nr = std::make_shared<Rep>();
    nr->konst = ra.konst * r;
    nr->terms = ra.terms;
    for (auto& t : nr->terms) t.coeff *= r;
    return wrap(std::move(nr));
  }

  static XNum pow(unsigned base, const XNum& e) {
    if (base < 2) throw std::invalid_argument("pow: base must be >= 2");
    long ev;
    if (exp_is_small(e, ev)) {
      double bits = std::abs(static_cast<double>(ev)) * std::log2(static_cast<double>(base));
      if (bits <= static_cast<double>(kExplicitBitCap))
        return XNum(pow_rat(BigRat(base), ev));
    }
    Term t;
    t.coeff = 1;
    for (auto [p, m] : factorize_small(base)) {
      Factor f;
      f.kind = FK::Pow;
      f.base = p;
      f.exp = m == 1 ? e : e.mul_rat(BigRat(m));
      t.fs.push_back(std::move(f));
    }
    return make(0, {std::move(t)});
  }

  static XNum repunit(unsigned base, const XNum& e) {
    if (base < 2) throw std::invalid_argument("repunit: base must be >= 2");
    long ev;
    if (exp_is_small(e, ev)) {
      if (ev < 0) throw std::domain_error("repunit: negative length");
      double bits = static_cast<double>(ev) * std::log2(static_cast<double>(base));
      if (bits <= static_cast<double>(kExplicitBitCap)) {
        BigInt v = ev == 0 ? BigInt(0) : (pow_int(BigInt(base), BigInt(ev)) - 1) / (base - 1);
        return XNum(BigRat(v));
      }
    }
    Term t;
    t.coeff = 1;
    Factor f;
    f.kind = FK::Rep;
    f.base = base;
    f.exp = e;
    t.fs.push_back(std::move(f));
    return make(0, {std::move(t)});
  }

  // ---- magnitude intervals ----------------------------------------------

  static XNum rat_x(const BigRat& r) { return XNum(r); }

  // log2 |t| enclosure; exponents stay symbolic inside the bound expressions.
  static std::optional<XIv> term_log2_iv(const Term& t, mpfr_prec_t prec) {
    RatIv c = log2_iv_rat(mp::abs(BigRat(t.coeff)), prec);
    XNum lo = rat_x(c.lo), hi = rat_x(c.hi);
    for (const auto& f : t.fs) {
      if (f.kind == FK::Pow) {
        const RatIv& l = log2_iv_uint(f.base, prec);
        int se = sign_cached(f.exp);
        if (se >= 0) {
          lo = lo + f.exp.mul_rat(l.lo);
          hi = hi + f.exp.mul_rat(l.hi);
        } else {
          lo = lo + f.exp.mul_rat(l.hi);
          hi = hi + f.exp.mul_rat(l.lo);
        }
      } else if (f.kind == FK::Rep) {
        // base^(E-1) <= rep(base;E) <= base^E/(base-1), for E >= 1
        const RatIv& l = log2_iv_uint(f.base, prec);
        RatIv lb1 = log2_iv_rat(BigRat(f.base - 1), prec);
        XNum one(1L);
        XNum rl = (f.exp - one).mul_rat(l.lo);
        XNum rh = f.exp.mul_rat(l.hi) - rat_x(lb1.lo);
        lo = lo + rl.mul_rat(BigRat(f.mult));
        hi = hi + rh.mul_rat(BigRat(f.mult));
      } else {
        const AtomDef& d = atoms()[f.atom];
        auto li = xnum_log2_iv(d.lo, prec);
        auto hiI = xnum_log2_iv(d.hi, prec);
        if (!li || !hiI) return std::nullopt;
        lo = lo + li->lo.mul_rat(BigRat(f.mult));
        hi = hi + hiI->hi.mul_rat(BigRat(f.mult));
      }
    }
    return XIv{lo, hi};
  }

  // log2 enclosure of a positive XNum.
  static std::optional<XIv> xnum_log2_iv(const XNum& x, mpfr_prec_t prec) {
    const Rep& r = rep(x);
    if (r.terms.empty()) {
      if (r.konst <= 0) throw std::domain_error("xnum_log2_iv: nonpositive explicit value");
      RatIv iv = log2_iv_rat(r.konst, prec);
      return XIv{rat_x(iv.lo), rat_x(iv.hi)};
    }
    struct Piece {
      int sign;
      XIv iv;
    };
    std::vector<Piece> ps;
    if (r.konst != 0) {
      RatIv iv = log2_iv_rat(mp::abs(r.konst), prec);
      ps.push_back({r.konst > 0 ? 1 : -1, XIv{rat_x(iv.lo), rat_x(iv.hi)}});
    }
    bool all_pos = r.konst >= 0;
    for (const auto& t : r.terms) {
      auto iv = term_log2_iv(t, prec);
      if (!iv) return std::nullopt;
      ps.push_back({t.coeff > 0 ? 1 : -1, *iv});
      if (t.coeff < 0) all_pos = false;
    }
    size_t n = ps.size();
    unsigned lg = static_cast<unsigned>(63 - __builtin_clzll(static_cast<unsigned long long>(n)));
    BigRat log2n(lg + ((n & (n - 1)) ? 1 : 0));
    try {
      size_t d = 0;
      for (size_t i = 1; i < n; ++i)
        if (ps[i].iv.hi.cmp(ps[d].iv.hi) > 0) d = i;
      // tight bounds when one piece dominates the rest by >= 64 bits:
      // the others then shift the logarithm by less than 2^-62
      bool dominant = true;
      XNum margin = rat_x(log2n + 64);
      for (size_t i = 0; i < n && dominant; ++i) {
        if (i == d) continue;
        if ((ps[d].iv.lo - ps[i].iv.hi).cmp(margin) < 0) dominant = false;
      }
      if (dominant) {
        if (ps[d].sign < 0) throw std::domain_error("xnum_log2_iv: negative value");
        BigRat slack(1, BigInt(1) << 62);
        return XIv{ps[d].iv.lo - rat_x(slack), ps[d].iv.hi + rat_x(slack)};
      }
      if (all_pos) {
        std::vector<XIv> ivs;
        ivs.reserve(n);
        for (auto& p : ps) ivs.push_back(p.iv);
        XNum lo = ivs[0].lo;
        for (size_t i = 1; i < n; ++i)
          if (ivs[i].lo.cmp(lo) > 0) lo = ivs[i].lo;
        return XIv{lo, side_sum_log2_ub(ivs, d)};
      }
    } catch (const XNum::Unresolvable&) {
      return std::nullopt;
    }
    return std::nullopt;
  }

  // Upper bound on log2(sum_i 2^(v[i].hi)): with H = v[m].hi the maximum,
  // sum <= 2^H * (1 + s) where s = sum_{i!=m} 2^(v[i].hi - H), each summand
  // bounded by 2^ceil(difference) clamped to [2^-64, 1], and
  // log2(1+s) <= s/ln2 <= 3s/2.
  static XNum side_sum_log2_ub(const std::vector<XIv>& v, size_t m) {
    BigRat s = 0;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i == m) continue;
      XNum d = v[i].hi - v[m].hi;
      if (!d.is_explicit()) {
        s += 1;  // unknown gap: assume the piece matches the maximum
        continue;
      }
      BigInt c = -rat_floor(-d.as_rat());  // ceil(d), d <= 0
      if (c > 0) c = 0;
      if (c < -64) c = -64;
      s += pow_rat(BigRat(2), c.convert_to<long>());
    }
    return v[m].hi + rat_x(s * BigRat(3, 2));
  }

  // ---- sign determination ------------------------------------------------

  static int sign_cached(const XNum& x) {
    const Rep& r = rep(x);
    if (r.terms.empty()) return r.konst == 0 ? 0 : (r.konst > 0 ? 1 : -1);
    static std::unordered_map<std::string, int> cache;
    const std::string& k = key(x);
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    int s = sign_of(x);
    cache.emplace(k, s);
    return s;
  }

  // The positive side wins if its largest piece alone exceeds the sum of the
  // negative side (bounded by count * largest), and symmetrically. Same-sign
  // pieces only ever add, so they never need to be dominated.
  static std::optional<int> try_dominance(const XNum& x, mpfr_prec_t prec) {
    const Rep& r = rep(x);
    if (r.terms.empty()) return r.konst == 0 ? 0 : (r.konst > 0 ? 1 : -1);
    std::vector<XIv> pos, neg;
    auto classify = [&](const BigRat& coeff, XIv iv) {
      (coeff > 0 ? pos : neg).push_back(std::move(iv));
    };
    if (r.konst != 0) {
      RatIv iv = log2_iv_rat(mp::abs(r.konst), prec);
      classify(r.konst, XIv{rat_x(iv.lo), rat_x(iv.hi)});
    }
    for (const auto& t : r.terms) {
      auto iv = term_log2_iv(t, prec);
      if (!iv) return std::nullopt;
      classify(t.coeff, std::move(*iv));
    }
    if (neg.empty()) return 1;
    if (pos.empty()) return -1;
    try {
      auto argmax_hi = [](const std::vector<XIv>& v) {
        size_t d = 0;
        for (size_t i = 1; i < v.size(); ++i)
          if (v[i].hi.cmp(v[d].hi) > 0) d = i;
        return d;
      };
      size_t dp = argmax_hi(pos), dn = argmax_hi(neg);
      XNum eps = rat_x(BigRat(1, 16));
      if ((pos[dp].lo - side_sum_log2_ub(neg, dn)).cmp(eps) >= 0) return 1;
      if ((neg[dn].lo - side_sum_log2_ub(pos, dp)).cmp(eps) >= 0) return -1;
    } catch (const XNum::Unresolvable&) {
      return std::nullopt;
    }
    return std::nullopt;
  }

  static int sign_of(const XNum& x) {
    XNum cur = x;
    int expansions = 0;
    for (mpfr_prec_t prec : kPrecLadder) {
      for (int iter = 0; iter < 24; ++iter) {
        auto s = try_dominance(cur, prec);
        if (s) return *s;
        // exact structural rescues, cheapest first; each strictly rewrites
        XNum next = equal_value_merge(cur);
        if (key(next) != key(cur)) { cur = next; continue; }
        next = pow_to_rep(cur);
        if (key(next) != key(cur)) { cur = next; continue; }
        if (expansions < 12) {
          next = rep_align(cur);
          if (key(next) != key(cur)) { ++expansions; cur = next; continue; }
          next = rep_head_expand(cur);
          if (key(next) != key(cur)) { ++expansions; cur = next; continue; }
        }
        break;
      }
    }
    throw XNum::Unresolvable("sign undecided: " + pretty(x).substr(0, 400));
  }

  // Merge terms whose factor structures are provably equal in value.
  static XNum equal_value_merge(const XNum& x) {
    const Rep& r = rep(x);
    std::vector<Term> ts = r.terms;
    bool changed = false;
    for (size_t i = 0; i < ts.size(); ++i) {
      if (ts[i].coeff == 0) continue;
      for (size_t j = i + 1; j < ts.size(); ++j) {
        if (ts[j].coeff == 0) continue;
        if (factors_value_equal(ts[i], ts[j])) {
          ts[i].coeff += ts[j].coeff;
          ts[j].coeff = 0;
          changed = true;
        }
      }
    }
    if (!changed) return x;
    std::vector<Term> alive;
    for (auto& t : ts)
      if (t.coeff != 0) alive.push_back(std::move(t));
    return make(r.konst, std::move(alive));
  }

  // Rewrite a pure-power term against a matching repunit term using
  // b^y = (b-1)*rep(b;y) + 1, so exact identities cancel structurally.
  static XNum pow_to_rep(const XNum& x) {
    const Rep& r = rep(x);
    for (size_t j = 0; j < r.terms.size(); ++j) {
      const Term& tj = r.terms[j];
      // locate a term with exactly one rep factor of multiplicity 1
      size_t rj = SIZE_MAX;
      for (size_t f = 0; f < tj.fs.size(); ++f)
        if (tj.fs[f].kind == FK::Rep) {
          if (rj != SIZE_MAX || tj.fs[f].mult != 1) { rj = SIZE_MAX; break; }
          rj = f;
        }
      if (rj == SIZE_MAX) continue;
      auto bf = factorize_small(tj.fs[rj].base);
      if (bf.size() != 1) continue;
      unsigned p = bf[0].first, s = bf[0].second;
      const XNum& y = tj.fs[rj].exp;
      for (size_t i = 0; i < r.terms.size(); ++i) {
        if (i == j) continue;
        const Term& ti = r.terms[i];
        // ti must be pow/atom-only and match tj's non-rep factors except an
        // extra p-exponent of exactly s*y
        bool okt = true;
        XNum ei, ej;
        std::vector<std::string> resti, restj;
        for (const auto& f : ti.fs) {
          if (f.kind == FK::Rep) { okt = false; break; }
          if (f.kind == FK::Pow && f.base == p) ei = f.exp;
          else resti.push_back(factor_key(f));
        }
        if (!okt) continue;
        for (size_t f = 0; f < tj.fs.size(); ++f) {
          if (f == rj) continue;
          const Factor& g = tj.fs[f];
          if (g.kind == FK::Pow && g.base == p) ej = g.exp;
          else restj.push_back(factor_key(g));
        }
        std::sort(resti.begin(), resti.end());
        std::sort(restj.begin(), restj.end());
        if (resti != restj) continue;
        XNum want = ej + (s == 1 ? y : y.mul_rat(BigRat(s)));
        bool match;
        try {
          match = cmp(ei, want) == 0;
        } catch (const XNum::Unresolvable&) {
          match = false;
        }
        if (!match) continue;
        // split ti:  c*p^(ei)*R = c*(b-1)*rep(b;y)*p^(ej)*R + c*p^(ej)*R
        std::vector<Term> ts = r.terms;
        Term head = ts[i], tail = ts[i];
        for (auto& f : head.fs)
          if (f.kind == FK::Pow && f.base == p) f.exp = ej;
        Factor rf;
        rf.kind = FK::Rep;
        rf.base = tj.fs[rj].base;
        rf.exp = y;
        head.fs.push_back(std::move(rf));
        head.coeff *= (tj.fs[rj].base - 1);
        for (auto& f : tail.fs)
          if (f.kind == FK::Pow && f.base == p) f.exp = ej;
        ts[i] = std::move(head);
        ts.push_back(std::move(tail));
        return make(r.konst, std::move(ts));
      }
    }
    return x;
  }

  // rep(b;x) = rep(b;y) + b^y * rep(b;x-y) for 1 <= y < x: split one repunit's
  // argument at another repunit's argument so equal-argument parts can merge.
  static XNum rep_align(const XNum& x) {
    const Rep& r = rep(x);
    struct Loc {
      size_t t, f;
    };
    std::vector<Loc> locs;
    for (size_t i = 0; i < r.terms.size(); ++i)
      for (size_t f = 0; f < r.terms[i].fs.size(); ++f)
        if (r.terms[i].fs[f].kind == FK::Rep && r.terms[i].fs[f].mult == 1)
          locs.push_back({i, f});
    for (const auto& la : locs) {
      for (const auto& lb : locs) {
        const Factor& fa = r.terms[la.t].fs[la.f];
        const Factor& fb = r.terms[lb.t].fs[lb.f];
        if (&fa == &fb || fa.base != fb.base) continue;
        auto bf = factorize_small(fa.base);
        if (bf.size() != 1) continue;
        int s, sy;
        try {
          s = cmp(fa.exp, fb.exp);
          sy = s > 0 ? cmp(fb.exp, XNum(1L)) : 0;
        } catch (const XNum::Unresolvable&) {
          continue;
        }
        if (s <= 0 || sy < 0) continue;  // split only a strictly larger argument
        std::vector<Term> ts = r.terms;
        Term head = ts[la.t], tail = ts[la.t];
        head.fs[la.f].exp = fb.exp;
        tail.fs[la.f].exp = fa.exp - fb.exp;
        Factor pf;
        pf.kind = FK::Pow;
        pf.base = bf[0].first;
        pf.exp = bf[0].second == 1 ? fb.exp : fb.exp.mul_rat(BigRat(bf[0].second));
        tail.fs.push_back(std::move(pf));
        ts[la.t] = std::move(head);
        ts.push_back(std::move(tail));
        return make(r.konst, std::move(ts));
      }
    }
    return x;
  }

  // rep(b;E) = b^(E-1) + rep(b;E-1): peel the head of one repunit factor.
  static XNum rep_head_expand(const XNum& x) {
    const Rep& r = rep(x);
    for (size_t i = 0; i < r.terms.size(); ++i) {
      const Term& t = r.terms[i];
      for (size_t f = 0; f < t.fs.size(); ++f) {
        if (t.fs[f].kind != FK::Rep) continue;
        const XNum& E = t.fs[f].exp;
        int c;
        try {
          c = cmp(E, XNum(1L));
        } catch (const XNum::Unresolvable&) {
          continue;
        }
        if (c < 0) continue;
        std::vector<Term> ts = r.terms;
        if (c == 0) {  // rep(b;1) == 1
          Term u = ts[i];
          if (u.fs[f].mult > 1) u.fs[f].mult -= 1;
          else u.fs.erase(u.fs.begin() + f);
          ts[i] = std::move(u);
          return make(r.konst, std::move(ts));
        }
        auto bf = factorize_small(t.fs[f].base);
        if (bf.size() != 1) continue;
        unsigned p = bf[0].first, s = bf[0].second;
        Term head = ts[i], tail = ts[i];
        auto drop_one = [f](Term& u) {
          if (u.fs[f].mult > 1) u.fs[f].mult -= 1;
          else u.fs.erase(u.fs.begin() + f);
        };
        drop_one(head);
        Factor pf;
        pf.kind = FK::Pow;
        pf.base = p;
        pf.exp = s == 1 ? E - XNum(1L) : (E - XNum(1L)).mul_rat(BigRat(s));
        head.fs.push_back(std::move(pf));
        // tail keeps a rep factor with exponent E-1 alongside any remaining copies
        if (tail.fs[f].mult > 1) {
          tail.fs[f].mult -= 1;
          Factor nf;
          nf.kind = FK::Rep;
          nf.base = t.fs[f].base;
          nf.exp = E - XNum(1L);
          tail.fs.push_back(std::move(nf));
        } else {
          tail.fs[f].exp = E - XNum(1L);
        }
        ts[i] = std::move(head);
        ts.push_back(std::move(tail));
        return make(r.konst, std::move(ts));
      }
    }
    return x;
  }

  static bool factors_value_equal(const Term& a, const Term& b) {
    std::map<unsigned, std::pair<const XNum*, const XNum*>> pows;
    std::vector<std::string> ra, rb;
    for (const auto& f : a.fs) {
      if (f.kind == FK::Pow) pows[f.base].first = &f.exp;
      else ra.push_back(factor_key(f));
    }
    for (const auto& f : b.fs) {
      if (f.kind == FK::Pow) pows[f.base].second = &f.exp;
      else rb.push_back(factor_key(f));
    }
    if (ra != rb) return false;
    static const XNum kZero;
    for (auto& [p, ee] : pows) {
      const XNum& e1 = ee.first ? *ee.first : kZero;
      const XNum& e2 = ee.second ? *ee.second : kZero;
      try {
        if (e1.cmp(e2) != 0) return false;
      } catch (const XNum::Unresolvable&) {
        return false;
      }
    }
    return true;
  }

  static int cmp(const XNum& a, const XNum& b) {
    const Rep& ra = rep(a);
    const Rep& rb = rep(b);
    if (ra.terms.empty() && rb.terms.empty()) {
      if (kint(ra) && kint(rb)) return knum(ra).compare(knum(rb));
      return ra.konst == rb.konst ? 0 : (ra.konst < rb.konst ? -1 : 1);
    }
    XNum d = add(a, neg(b));
    const Rep& rd = rep(d);
    if (rd.terms.empty()) return rd.konst == 0 ? 0 : (rd.konst > 0 ? 1 : -1);
    return sign_cached(d);
  }

  // ---- ceil_log -----------------------------------------------------------

  static XNum ceil_log(unsigned base, const XNum& x, const char* why) {
    if (base < 2) throw std::invalid_argument("ceil_log: base must be >= 2");
    if (cmp(x, XNum()) <= 0) throw std::domain_error("ceil_log: argument must be positive");
    const Rep& r = rep(x);
    if (r.terms.empty()) {
      // exact search around a floating estimate
      const BigRat& v = r.konst;
      double est = (static_cast<double>(mp::msb(mp::numerator(v))) -
                    static_cast<double>(mp::msb(mp::denominator(v)))) /
                   std::log2(static_cast<double>(base));
      long e = static_cast<long>(std::floor(est)) - 2;
      BigRat p = pow_rat(BigRat(base), e);
      while (p < v) { p *= base; ++e; }
      while (e > std::numeric_limits<long>::min() + 8 && p / base >= v) { p /= base; --e; }
      return XNum(BigRat(e));  // minimal e with base^e >= v
    }
    for (mpfr_prec_t prec : kPrecLadder) {
      auto iv = xnum_log2_iv(x, prec);
      if (!iv) continue;
      if (!iv->lo.is_explicit() || !iv->hi.is_explicit()) break;  // atom path
      const RatIv& lb = log2_iv_uint(base, prec);
      BigRat qlo = iv->lo.as_rat() / lb.hi;  // lower bound of log_base(x)
      BigRat qhi = iv->hi.as_rat() / lb.lo;  // upper bound
      if (qlo <= 0) continue;
      BigInt flo = rat_floor(qlo), fhi = rat_floor(qhi);
      if (flo == fhi) {
        // no tie (caller-certified), so minimal e with base^e >= x is floor+1
        (void)why;
        return XNum(BigRat(flo + 1));
      }
    }
    // atom: enclosure e in (log_base x, log_base x + 1]
    auto iv = xnum_log2_iv(x, kPrecLadder[1]);
    if (!iv) iv = xnum_log2_iv(x, kPrecLadder[3]);
    if (!iv) throw XNum::Unresolvable("ceil_log: no magnitude enclosure for " +
                                      pretty(x).substr(0, 200));
    const RatIv& lb = log2_iv_uint(base, kPrecLadder[1]);
    XNum lo = iv->lo.mul_rat(1 / lb.hi);
    XNum hi = iv->hi.mul_rat(1 / lb.lo) + XNum(1L);
    std::string akey = "lvl(" + std::to_string(base) + ";" + key(x) + ")";
    auto& reg = atoms();
    static std::unordered_map<std::string, uint32_t> intern;
    auto it = intern.find(akey);
    uint32_t idx;
    if (it != intern.end()) {
      idx = it->second;
    } else {
      idx = static_cast<uint32_t>(reg.size());
      reg.push_back(AtomDef{base, x, lo, hi, akey, why ? why : ""});
      intern.emplace(akey, idx);
    }
    Term t;
    t.coeff = 1;
    Factor f;
    f.kind = FK::Atom;
    f.atom = idx;
    t.fs.push_back(std::move(f));
    return make(0, {std::move(t)});
  }

  // ---- floor_div -----------------------------------------------------------

  struct DivisorPrime {
    unsigned p;
    XNum e;
  };

  static std::pair<XNum, XNum> floor_div(const XNum& a, const XNum& d) {
    const Rep& rd = rep(d);
    std::vector<DivisorPrime> dps;
    if (rd.terms.empty()) {
      if (mp::denominator(rd.konst) != 1 || rd.konst <= 0)
        throw std::invalid_argument("floor_div: divisor must be a positive integer");
      const Rep& ra = rep(a);
      if (ra.terms.empty()) {
        if (!kint(ra))
          throw std::invalid_argument("floor_div: non-integer dividend");
        const BigInt& n = knum(ra);
        const BigInt& dd = knum(rd);
        BigInt q = fld(n, dd);
        return {XNum(BigRat(q)), XNum(BigRat(BigInt(n - q * dd)))};
      }
      BigInt dc = mp::numerator(rd.konst);
      if (dc == 1) return {a, XNum()};
      if (dc > 1000000) throw std::invalid_argument("floor_div: explicit divisor too large to factor");
      for (auto [p, m] : factorize_small(static_cast<unsigned>(dc.convert_to<unsigned long>())))
        dps.push_back({p, XNum(static_cast<long>(m))});
    } else {
      if (rd.konst != 0 || rd.terms.size() != 1)
        throw std::invalid_argument("floor_div: symbolic divisor must be a single term");
      const Term& t = rd.terms[0];
      if (t.coeff <= 0 || mp::denominator(t.coeff) != 1)
        throw std::invalid_argument("floor_div: divisor coefficient must be a positive integer");
      BigInt c = mp::numerator(t.coeff);
      if (c > 1000000) throw std::invalid_argument("floor_div: divisor coefficient too large");
      if (c > 1)
        for (auto [p, m] : factorize_small(static_cast<unsigned>(c.convert_to<unsigned long>())))
          dps.push_back({p, XNum(static_cast<long>(m))});
      for (const auto& f : t.fs) {
        if (f.kind != FK::Pow)
          throw std::invalid_argument("floor_div: divisor must be a product of prime powers");
        bool found = false;
        for (auto& dp : dps)
          if (dp.p == f.base) { dp.e = dp.e + f.exp; found = true; }
        if (!found) dps.push_back({f.base, f.exp});
      }
    }

    const Rep& ra = rep(a);
    std::vector<Term> queue = ra.terms, qterms, rterms;
    BigRat rkonst = ra.konst;
    BigRat qkonst = 0;
    if (rd.terms.empty()) {
      // explicit divisor: pre-divide the explicit part so the correction loop
      // below only ever has to move the remainder by O(1) steps
      if (mp::denominator(rkonst) != 1)
        throw std::invalid_argument("floor_div: non-integer dividend");
      BigInt dval = mp::numerator(rd.konst);
      BigInt q0 = fld(mp::numerator(rkonst), dval);
      rkonst -= BigRat(q0 * dval);
      qkonst = q0;
    }
    while (!queue.empty()) {
      Term t = std::move(queue.back());
      queue.pop_back();
      bool to_rem = false, requeued = false;
      Term qt = t;
      for (const auto& dp : dps) {
        XNum et;  // exponent of dp.p in qt
        size_t pw = SIZE_MAX;
        for (size_t i = 0; i < qt.fs.size(); ++i)
          if (qt.fs[i].kind == FK::Pow && qt.fs[i].base == dp.p) { pw = i; et = qt.fs[i].exp; }
        XNum delta = et - dp.e;
        if (sign_cached(delta) >= 0) {
          if (pw != SIZE_MAX) qt.fs[pw].exp = delta;
          else if (sign_cached(delta) != 0)
            throw std::logic_error("floor_div: internal exponent bookkeeping");
          continue;
        }
        // deficit: try the coefficient's p-adic valuation
        XNum deficit = dp.e - et;
        BigInt num = mp::numerator(qt.coeff);
        long val = 0;
        while (num % dp.p == 0) { num /= dp.p; ++val; }
        if (val > 0) {
          long need;
          if (exp_is_small(deficit, need) && need <= val) {
            qt.coeff /= pow_rat(BigRat(dp.p), need);
            if (pw != SIZE_MAX) qt.fs[pw].exp = XNum();
            continue;
          }
          if (exp_is_small(deficit, need)) {
            qt.coeff /= pow_rat(BigRat(dp.p), val);
            deficit = deficit - XNum(val);
            if (pw != SIZE_MAX) qt.fs[pw].exp = XNum();
          }
        }
        // try splitting a repunit whose base is a power of dp.p
        size_t ri = SIZE_MAX;
        unsigned s = 0;
        for (size_t i = 0; i < t.fs.size(); ++i) {
          if (t.fs[i].kind != FK::Rep || t.fs[i].mult != 1) continue;
          auto fac = factorize_small(t.fs[i].base);
          if (fac.size() == 1 && fac[0].first == dp.p) { ri = i; s = fac[0].second; break; }
        }
        if (ri != SIZE_MAX) {
          // rep(b;E) = rep(b;k) + b^k * rep(b;E-k), k chosen to cover the deficit
          XNum k = floor_div(deficit + XNum(static_cast<long>(s) - 1),
                             XNum(static_cast<long>(s))).first;
          const XNum& E = t.fs[ri].exp;
          if (cmp(E, k) > 0 && sign_cached(k) > 0) {
            Term low = t, high = t;
            low.fs[ri].exp = k;
            high.fs[ri].exp = E - k;
            Factor pf;
            pf.kind = FK::Pow;
            pf.base = dp.p;  // rep base is p^s, so b^k contributes p^(s*k)
            pf.exp = s == 1 ? k : k.mul_rat(BigRat(s));
            high.fs.push_back(std::move(pf));
            queue.push_back(std::move(low));
            queue.push_back(std::move(high));
            requeued = true;
            break;
          }
        }
        to_rem = true;
        break;
      }
      if (requeued) continue;
      if (to_rem) rterms.push_back(std::move(t));
      else qterms.push_back(std::move(qt));
    }
    XNum q = make(qkonst, std::move(qterms));
    XNum r = make(rkonst, std::move(rterms));
    for (int iter = 0; iter < 24; ++iter) {
      if (cmp(r, XNum()) < 0) {
        q = q - XNum(1L);
        r = r + d;
      } else if (cmp(r, d) >= 0) {
        q = q + XNum(1L);
        r = r - d;
      } else {
        return {q, r};
      }
    }
    throw std::logic_error("floor_div: remainder did not settle into [0, divisor)");
  }
};

// ---- public surface ---------------------------------------------------------

XNum::XNum() : rep_(XNumImpl::zero_rep()) {}

XNum::XNum(long v) {
  auto r = std::make_shared<Rep>();
  r->konst = v;
  rep_ = std::move(r);
}

XNum::XNum(const BigInt& v) {
  auto r = std::make_shared<Rep>();
  r->konst = v;
  rep_ = std::move(r);
}

XNum::XNum(const BigRat& v) {
  auto r = std::make_shared<Rep>();
  r->konst = v;
  rep_ = std::move(r);
}

XNum XNum::pow(unsigned base, const XNum& exp) { return XNumImpl::pow(base, exp); }
XNum XNum::repunit(unsigned base, const XNum& exp) { return XNumImpl::repunit(base, exp); }
XNum XNum::ceil_log(unsigned base, const XNum& x, const char* no_tie_reason) {
  return XNumImpl::ceil_log(base, x, no_tie_reason);
}

XNum XNum::operator+(const XNum& o) const { return XNumImpl::add(*this, o); }
XNum XNum::operator-(const XNum& o) const { return XNumImpl::add(*this, XNumImpl::neg(o)); }
XNum XNum::operator*(const XNum& o) const { return XNumImpl::mul(*this, o); }
XNum XNum::operator-() const { return XNumImpl::neg(*this); }
XNum XNum::mul_rat(const BigRat& r) const { return XNumImpl::mul_rat(*this, r); }

int XNum::cmp(const XNum& o) const { return XNumImpl::cmp(*this, o); }

bool XNum::is_zero() const {
  if (is_explicit()) return rep_->konst == 0;
  return cmp(XNum()) == 0;
}

bool XNum::is_explicit() const { return rep_->terms.empty(); }

BigInt XNum::as_int() const {
  if (!is_explicit()) throw std::logic_error("as_int: symbolic value: " + str().substr(0, 200));
  if (mp::denominator(rep_->konst) != 1)
    throw std::logic_error("as_int: non-integer value " + rep_->konst.str());
  return mp::numerator(rep_->konst);
}

BigRat XNum::as_rat() const {
  if (!is_explicit()) throw std::logic_error("as_rat: symbolic value: " + str().substr(0, 200));
  return rep_->konst;
}

std::pair<XNum, XNum> XNum::floor_div(const XNum& a, const XNum& d) {
  return XNumImpl::floor_div(a, d);
}

XNum XNum::clamp(const XNum& x, const XNum& lo, const XNum& hi) {
  if (x.cmp(lo) < 0) return lo;
  if (x.cmp(hi) > 0) return hi;
  return x;
}

const std::string& XNum::str() const { return XNumImpl::pretty(*this); }

}  // namespace starshift
