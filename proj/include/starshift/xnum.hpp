#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace starshift {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

BigInt pow_int(const BigInt& base, const BigInt& exp);
BigRat pow_rat(const BigRat& base, long exp);

/// Exact real number closed under +, -, *, rational scaling, base^exponent
/// and geometric repunits, with exact three-way comparison.
///
/// Values whose magnitude fits under an explicit bit cap are plain rationals.
/// Beyond the cap a value is a sum of terms
///
///     coeff * prod(prime ^ E_i) * prod(rep(b; E_j)) * prod(atom ^ m)
///
/// where the exponents E are XNum again (the construction's quantities are
/// iterated exponentials, so exponents of exponents stay symbolic),
/// rep(b; E) = (b^E - 1)/(b - 1), and an atom is an integer pinned by a
/// minimality property (see ceil_log) carrying a certified enclosure.
///
/// Comparisons cancel structurally equal terms, merge terms with an exact
/// rational ratio, and resolve the rest through directed-rounding logarithm
/// intervals that are refined until the sign separates. Ties between distinct
/// surviving terms would need a multiplicative relation between distinct
/// primes, so refinement terminates; an undecidable case throws instead of
/// guessing.
class XNum {
 public:
  XNum();  // zero
  XNum(long v);
  XNum(const BigInt& v);
  XNum(const BigRat& v);

  /// base^exp, base >= 2 (factored into primes internally).
  static XNum pow(unsigned base, const XNum& exp);
  /// rep(base; exp) = 1 + base + ... + base^(exp-1), exp >= 0 integer-valued.
  static XNum repunit(unsigned base, const XNum& exp);
  /// Minimal integer e with base^e >= x, for x > 0. `no_tie_reason` documents
  /// why base^e = x is impossible (callers prove it; it makes the search
  /// exact). Returns an explicit integer when x's logarithm is computable at
  /// explicit precision, otherwise an atom with a certified enclosure.
  static XNum ceil_log(unsigned base, const XNum& x, const char* no_tie_reason = "");

  XNum operator+(const XNum& o) const;
  XNum operator-(const XNum& o) const;
  XNum operator*(const XNum& o) const;
  XNum operator-() const;
  XNum& operator+=(const XNum& o) { *this = *this + o; return *this; }
  XNum& operator-=(const XNum& o) { *this = *this - o; return *this; }
  XNum& operator*=(const XNum& o) { *this = *this * o; return *this; }

  XNum mul_rat(const BigRat& r) const;

  /// Exact three-way comparison; throws Unresolvable when the sign cannot be
  /// certified (never for the quantities this project builds).
  int cmp(const XNum& o) const;
  bool operator==(const XNum& o) const { return cmp(o) == 0; }
  bool operator!=(const XNum& o) const { return cmp(o) != 0; }
  bool operator<(const XNum& o) const { return cmp(o) < 0; }
  bool operator<=(const XNum& o) const { return cmp(o) <= 0; }
  bool operator>(const XNum& o) const { return cmp(o) > 0; }
  bool operator>=(const XNum& o) const { return cmp(o) >= 0; }

  bool is_zero() const;
  bool is_explicit() const;
  /// Explicit integer value; throws if symbolic or non-integer.
  BigInt as_int() const;
  /// Explicit rational value; throws if symbolic.
  BigRat as_rat() const;

  /// Euclidean division a = q*d + r with 0 <= r < d, for d > 0.
  /// The divisor must be explicit or a single pure-power term.
  static std::pair<XNum, XNum> floor_div(const XNum& a, const XNum& d);

  static XNum min(const XNum& a, const XNum& b) { return a.cmp(b) <= 0 ? a : b; }
  static XNum max(const XNum& a, const XNum& b) { return a.cmp(b) >= 0 ? a : b; }
  /// min(max(x, lo), hi)
  static XNum clamp(const XNum& x, const XNum& lo, const XNum& hi);

  /// Canonical form: decimal / "p/q" when explicit, expression string
  /// otherwise. Deterministic across runs; used for serialization.
  const std::string& str() const;

  struct Unresolvable;

 private:
  struct Rep;
  explicit XNum(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}
  std::shared_ptr<const Rep> rep_;
  friend struct XNumImpl;
};

struct XNum::Unresolvable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Number of bits below which values collapse to explicit integers.
inline constexpr unsigned kExplicitBitCap = 1u << 21;

}  // namespace starshift
