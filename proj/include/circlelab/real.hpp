#pragma once

// Arbitrary-precision real scalars backed by GNU MPFR, with an explicit
// per-value significand precision in bits and round-to-nearest-even
// throughout.  Values created under one PrecisionContext all carry the
// same precision; arithmetic between values of different precision is a
// hard error rather than a silent promotion.

#include <mpfr.h>

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace circlelab {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

class PrecisionMismatch : public std::logic_error {
 public:
  PrecisionMismatch(long a, long b)
      : std::logic_error("mixed-precision arithmetic: " + std::to_string(a) +
                         " vs " + std::to_string(b) + " bits") {}
};

class Real {
 public:
  static constexpr long min_bits = 64;

  explicit Real(long bits) {
    check_bits(bits);
    mpfr_init2(v_, bits);
    mpfr_set_zero(v_, 1);
  }

  Real(const Real& o) {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }

  Real(Real&& o) noexcept {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_swap(v_, o.v_);
  }

  Real& operator=(const Real& o) {
    if (this != &o) {
      mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }

  Real& operator=(Real&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
  }

  ~Real() { mpfr_clear(v_); }

  long bits() const { return mpfr_get_prec(v_); }

  static Real of(double x, long bits) {
    Real r(bits);
    mpfr_set_d(r.v_, x, MPFR_RNDN);
    return r;
  }

  static Real of_int(long x, long bits) {
    Real r(bits);
    mpfr_set_si(r.v_, x, MPFR_RNDN);
    return r;
  }

  static Real of_integer(const BigInt& z, long bits) {
    Real r(bits);
    const std::string s = z.str();
    if (mpfr_set_str(r.v_, s.c_str(), 10, MPFR_RNDN) != 0)
      throw std::invalid_argument("Real::of_integer: bad integer string");
    return r;
  }

  // Accepts plain decimal ("0.25", "-3e-2") or the tagged form "0.25@256".
  static Real parse(std::string_view s, long default_bits = 0) {
    long bits = default_bits;
    const auto at = s.rfind('@');
    if (at != std::string_view::npos) {
      bits = std::stol(std::string(s.substr(at + 1)));
      s = s.substr(0, at);
    }
    if (bits == 0)
      throw std::invalid_argument("Real::parse: no precision tag and no default");
    Real r(bits);
    const std::string body(s);
    if (mpfr_set_str(r.v_, body.c_str(), 10, MPFR_RNDN) != 0)
      throw std::invalid_argument("Real::parse: bad numeral '" + body + "'");
    return r;
  }

  static Real pi(long bits) {
    Real r(bits);
    mpfr_const_pi(r.v_, MPFR_RNDN);
    return r;
  }

  // 2^e, exact.
  static Real pow2(long e, long bits) {
    Real r(bits);
    mpfr_set_ui_2exp(r.v_, 1, e, MPFR_RNDN);
    return r;
  }

  bool is_finite() const { return mpfr_number_p(v_) != 0; }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  int sign() const { return mpfr_sgn(v_); }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }

  long to_long() const { return mpfr_get_si(v_, MPFR_RNDN); }

  BigInt floor_to_integer() const {
    Real f(bits());
    mpfr_floor(f.v_, v_);
    mpfr_exp_t e;
    char* s = mpfr_get_str(nullptr, &e, 10, 0, f.v_, MPFR_RNDN);
    std::string digits(s);
    mpfr_free_str(s);
    // digits = "ddd..." with implied decimal point before position e.
    bool neg = false;
    if (!digits.empty() && digits[0] == '-') {
      neg = true;
      digits.erase(0, 1);
    }
    std::string intpart;
    if (e <= 0) {
      intpart = "0";
    } else if (static_cast<std::size_t>(e) >= digits.size()) {
      intpart = digits + std::string(e - digits.size(), '0');
    } else {
      intpart = digits.substr(0, e);
    }
    BigInt z(intpart.empty() ? "0" : intpart);
    return neg ? -z : z;
  }

  // Canonical decimal serialization with precision tag, e.g. "0.5@256".
  // Round-trips exactly through parse() at the same precision.
  std::string str() const {
    const long digits = static_cast<long>(bits() * 0.30103) + 3;
    char fmt[32];
    std::snprintf(fmt, sizeof(fmt), "%%.%ldRg", digits);
    char* buf = nullptr;
    mpfr_asprintf(&buf, fmt, v_);
    std::string out(buf);
    mpfr_free_str(buf);
    out += '@';
    out += std::to_string(bits());
    return out;
  }

  // Decimal without the tag, shortened; for report files and charts.
  std::string str_plain(int significant = 24) const {
    char fmt[32];
    std::snprintf(fmt, sizeof(fmt), "%%.%dRg", significant);
    char* buf = nullptr;
    mpfr_asprintf(&buf, fmt, v_);
    std::string out(buf);
    mpfr_free_str(buf);
    return out;
  }

  friend Real operator+(const Real& a, const Real& b) {
    Real r(same(a, b));
    mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real operator-(const Real& a, const Real& b) {
    Real r(same(a, b));
    mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real operator*(const Real& a, const Real& b) {
    Real r(same(a, b));
    mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real operator/(const Real& a, const Real& b) {
    Real r(same(a, b));
    mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real operator-(const Real& a) {
    Real r(a.bits());
    mpfr_neg(r.v_, a.v_, MPFR_RNDN);
    return r;
  }

  Real& operator+=(const Real& b) {
    same(*this, b);
    mpfr_add(v_, v_, b.v_, MPFR_RNDN);
    return *this;
  }
  Real& operator-=(const Real& b) {
    same(*this, b);
    mpfr_sub(v_, v_, b.v_, MPFR_RNDN);
    return *this;
  }
  Real& operator*=(const Real& b) {
    same(*this, b);
    mpfr_mul(v_, v_, b.v_, MPFR_RNDN);
    return *this;
  }
  Real& operator/=(const Real& b) {
    same(*this, b);
    mpfr_div(v_, v_, b.v_, MPFR_RNDN);
    return *this;
  }

  friend Real operator*(const Real& a, long k) {
    Real r(a.bits());
    mpfr_mul_si(r.v_, a.v_, k, MPFR_RNDN);
    return r;
  }
  friend Real operator/(const Real& a, long k) {
    Real r(a.bits());
    mpfr_div_si(r.v_, a.v_, k, MPFR_RNDN);
    return r;
  }
  friend Real operator+(const Real& a, long k) {
    Real r(a.bits());
    mpfr_add_si(r.v_, a.v_, k, MPFR_RNDN);
    return r;
  }
  friend Real operator-(const Real& a, long k) {
    Real r(a.bits());
    mpfr_sub_si(r.v_, a.v_, k, MPFR_RNDN);
    return r;
  }

  friend bool operator<(const Real& a, const Real& b) { return mpfr_less_p(a.v_, b.v_) != 0; }
  friend bool operator>(const Real& a, const Real& b) { return mpfr_greater_p(a.v_, b.v_) != 0; }
  friend bool operator<=(const Real& a, const Real& b) { return mpfr_lessequal_p(a.v_, b.v_) != 0; }
  friend bool operator>=(const Real& a, const Real& b) { return mpfr_greaterequal_p(a.v_, b.v_) != 0; }
  friend bool operator==(const Real& a, const Real& b) { return mpfr_equal_p(a.v_, b.v_) != 0; }
  friend bool operator!=(const Real& a, const Real& b) { return !(a == b); }

  friend int cmp(const Real& a, long k) { return mpfr_cmp_si(a.v_, k); }

  friend Real abs(const Real& a) {
    Real r(a.bits());
    mpfr_abs(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real floor(const Real& a) {
    Real r(a.bits());
    mpfr_floor(r.v_, a.v_);
    return r;
  }
  friend Real sqrt(const Real& a) {
    Real r(a.bits());
    mpfr_sqrt(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real sin(const Real& a) {
    Real r(a.bits());
    mpfr_sin(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real cos(const Real& a) {
    Real r(a.bits());
    mpfr_cos(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend void sin_cos(Real& s, Real& c, const Real& x) {
    mpfr_sin_cos(s.v_, c.v_, x.v_, MPFR_RNDN);
  }
  friend Real log(const Real& a) {
    Real r(a.bits());
    mpfr_log(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real exp(const Real& a) {
    Real r(a.bits());
    mpfr_exp(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real pow_int(const Real& a, long e) {
    Real r(a.bits());
    mpfr_pow_si(r.v_, a.v_, e, MPFR_RNDN);
    return r;
  }
  friend const Real& min(const Real& a, const Real& b) { return b < a ? b : a; }
  friend const Real& max(const Real& a, const Real& b) { return a < b ? b : a; }

  // x - floor(x), clamped into [0, 1).
  friend Real fractional(const Real& a) {
    Real r(a.bits());
    mpfr_floor(r.v_, a.v_);
    mpfr_sub(r.v_, a.v_, r.v_, MPFR_RNDN);
    if (mpfr_cmp_ui(r.v_, 1) >= 0) mpfr_sub_ui(r.v_, r.v_, 1, MPFR_RNDN);
    if (mpfr_sgn(r.v_) < 0) mpfr_add_ui(r.v_, r.v_, 1, MPFR_RNDN);
    return r;
  }

  // Same value re-represented at a different precision (rounded if narrower).
  Real at_bits(long bits) const {
    check_bits(bits);
    Real r(bits);
    mpfr_set(r.v_, v_, MPFR_RNDN);
    return r;
  }

  mpfr_ptr raw() { return v_; }
  mpfr_srcptr raw() const { return v_; }

 private:
  static void check_bits(long bits) {
    if (bits < min_bits)
      throw std::invalid_argument("precision must be at least 64 bits");
  }
  static long same(const Real& a, const Real& b) {
    const long pa = a.bits(), pb = b.bits();
    if (pa != pb) throw PrecisionMismatch(pa, pb);
    return pa;
  }

  mpfr_t v_;
};

// Factory for scalars of one fixed precision.  Rounding is always
// nearest-even (MPFR_RNDN); only the significand width varies.
struct PrecisionContext {
  long bits;

  explicit PrecisionContext(long bits_) : bits(bits_) {
    if (bits < Real::min_bits)
      throw std::invalid_argument("PrecisionContext: bits must be >= 64");
  }

  Real real(double x) const { return Real::of(x, bits); }
  Real real(long x) const { return Real::of_int(x, bits); }
  Real real(int x) const { return Real::of_int(x, bits); }
  Real real(const char* s) const { return Real::parse(s, bits); }
  Real real(const BigInt& z) const { return Real::of_integer(z, bits); }
  Real real(const BigRational& q) const {
    return Real::of_integer(numerator(q), bits) / Real::of_integer(denominator(q), bits);
  }
  Real zero() const { return Real::of_int(0, bits); }
  Real one() const { return Real::of_int(1, bits); }
  Real pi() const { return Real::pi(bits); }
  Real two_pi() const { return Real::pi(bits) * 2; }
  // 2^{-(bits-guard)}: the standard tolerance scale used by the checks.
  Real eps(long guard) const { return Real::pow2(-(bits - guard), bits); }
};

}  // namespace circlelab
