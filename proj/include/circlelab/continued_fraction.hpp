#pragma once

// Continued fractions of rotation numbers in (0,1), their convergents
// p_n/q_n (the return times), closest-return signs, and the purely
// arithmetic level-n partition of the rigid rotation.
//
// Convention: rho = [a_0, a_1, ...] = 1/(a_0 + 1/(a_1 + ...)), with
// seeds p_0 = 0, p_1 = 1, q_0 = 1, q_1 = a_0 and the usual recurrences
// p_{n+1} = a_n p_n + p_{n-1}, q_{n+1} = a_n q_n + q_{n-1}.

#include "circlelab/circle.hpp"
#include "circlelab/real.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace circlelab {

struct ContinuedFraction {
  enum class Source { explicit_list, periodic, from_real };

  std::vector<BigInt> quotients;  // every entry >= 1
  Source source = Source::explicit_list;
  // Set when a Gauss-map expansion stopped early because the remainder
  // underflowed (rho rational within working precision).
  bool terminated_rational = false;

  std::size_t depth() const { return quotients.size(); }

  static ContinuedFraction from_quotients(std::vector<BigInt> a) {
    for (const auto& q : a)
      if (q < 1) throw std::invalid_argument("partial quotients must be >= 1");
    return ContinuedFraction{std::move(a), Source::explicit_list, false};
  }

  static ContinuedFraction periodic(const std::vector<BigInt>& head,
                                    const std::vector<BigInt>& cycle, std::size_t depth) {
    if (cycle.empty()) throw std::invalid_argument("periodic: empty cycle");
    std::vector<BigInt> a;
    a.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i)
      a.push_back(i < head.size() ? head[i] : cycle[(i - head.size()) % cycle.size()]);
    auto cf = from_quotients(std::move(a));
    cf.source = Source::periodic;
    return cf;
  }

  static ContinuedFraction golden(std::size_t depth) {
    return periodic({}, {BigInt(1)}, depth);
  }
  static ContinuedFraction silver(std::size_t depth) {
    return periodic({}, {BigInt(2)}, depth);
  }

  // Value of the truncated fraction as an exact rational.
  BigRational value() const {
    BigRational v(0);
    for (auto it = quotients.rbegin(); it != quotients.rend(); ++it)
      v = BigRational(1) / (BigRational(*it) + v);
    return v;
  }

  // High-precision value of the (conceptually infinite) rotation number:
  // the deepest convergent, which approximates any extension of this
  // expansion to within 1/q_m^2.
  Real value_real(long bits) const;
};

// Gauss-map expansion of rho in (0,1).  Stops early with
// terminated_rational set when a remainder underflows 2^{-bits/2}
// (rho indistinguishable from a rational at working precision).
// Throws when a quotient can no longer be trusted (precision exhausted).
inline ContinuedFraction expand(const Real& rho, std::size_t depth) {
  if (rho.sign() <= 0 || cmp(rho, 1) >= 0)
    throw std::invalid_argument("expand: rho must lie in (0,1)");
  if (depth < 1) throw std::invalid_argument("expand: depth must be >= 1");
  const long bits = rho.bits();
  const Real underflow = Real::pow2(-bits / 2, bits);

  ContinuedFraction cf;
  cf.source = ContinuedFraction::Source::from_real;
  Real r = rho;
  // Track denominator growth: once q_n^2 approaches 2^bits the Gauss
  // remainders carry no significant digits.
  BigInt q_prev(0), q_cur(1);
  for (std::size_t n = 0; n < depth; ++n) {
    Real inv = Real::of_int(1, bits) / r;
    BigInt a = inv.floor_to_integer();
    if (a < 1) throw std::runtime_error("expand: precision exhausted (quotient < 1)");
    Real rem = inv - Real::of_integer(a, bits);
    BigInt q_next = a * q_cur + q_prev;
    if (msb(q_next) * 2 + 32 > static_cast<unsigned>(bits))
      throw std::runtime_error("expand: precision exhausted (denominators too large)");
    cf.quotients.push_back(a);
    q_prev = q_cur;
    q_cur = q_next;
    if (abs(rem) < underflow) {
      cf.terminated_rational = true;
      break;
    }
    r = rem;
  }
  return cf;
}

struct ConvergentRow {
  BigInt p, q;
};

struct ConvergentTable {
  std::vector<BigInt> quotients;   // a_0 .. a_{m-1}
  std::vector<ConvergentRow> rows;  // n = 0 .. m

  std::size_t max_level() const { return rows.size() - 1; }
  const BigInt& p(std::size_t n) const { return rows.at(n).p; }
  const BigInt& q(std::size_t n) const { return rows.at(n).q; }

  // q_n as a plain machine integer; throws if it does not fit.
  long q_long(std::size_t n) const {
    const BigInt& v = q(n);
    if (v > BigInt(std::numeric_limits<long>::max()))
      throw std::overflow_error("return time exceeds machine range");
    return static_cast<long>(v);
  }
};

inline ConvergentTable convergents(const ContinuedFraction& cf) {
  if (cf.quotients.empty()) throw std::invalid_argument("convergents: empty expansion");
  ConvergentTable t;
  t.quotients = cf.quotients;
  const std::size_t m = cf.quotients.size();
  t.rows.resize(m + 1);
  t.rows[0] = {BigInt(0), BigInt(1)};
  t.rows[1] = {BigInt(1), cf.quotients[0]};
  for (std::size_t n = 1; n < m; ++n) {
    t.rows[n + 1].p = cf.quotients[n] * t.rows[n].p + t.rows[n - 1].p;
    t.rows[n + 1].q = cf.quotients[n] * t.rows[n].q + t.rows[n - 1].q;
  }
  return t;
}

inline Real ContinuedFraction::value_real(long bits) const {
  const ConvergentTable t = convergents(*this);
  const std::size_t m = t.max_level();
  return Real::of_integer(t.p(m), bits) / Real::of_integer(t.q(m), bits);
}

// sign(q_n rho - p_n) for n = 0..depth; equals (-1)^n when rho has the
// expansion that produced the table.
inline std::vector<int> closest_return_signs(const Real& rho, std::size_t depth) {
  const ContinuedFraction cf = expand(rho, depth);
  if (cf.depth() < depth)
    throw std::runtime_error("closest_return_signs: expansion terminated before depth");
  const ConvergentTable t = convergents(cf);
  std::vector<int> signs;
  signs.reserve(depth + 1);
  for (std::size_t n = 0; n <= depth; ++n) {
    Real d = Real::of_integer(t.q(n), rho.bits()) * rho - Real::of_integer(t.p(n), rho.bits());
    if (d.is_zero()) throw std::runtime_error("closest_return_signs: precision exhausted");
    signs.push_back(d.sign());
  }
  return signs;
}

// An atom of the rotation partition, tagged with its combinatorial origin:
// the atom is R_rho^{orbit_index}(I_generation).
struct TaggedInterval {
  CircleInterval interval;
  int generation;    // n or n+1
  long orbit_index;  // i in f^i(I_gen)
};

// The level-n dynamical partition of the rigid rotation R_rho based at 0,
// computed purely arithmetically: q_{n+1} translates of I_n (length
// |q_n rho - p_n|) and q_n translates of I_{n+1}.  Returned sorted by
// left endpoint; atoms tile [0,1).
inline std::vector<TaggedInterval> rotation_partition_oracle(const Real& rho, int n) {
  if (n < 0) throw std::invalid_argument("rotation_partition_oracle: n >= 0 required");
  const long bits = rho.bits();
  const ContinuedFraction cf = expand(rho, static_cast<std::size_t>(n) + 2);
  if (cf.depth() < static_cast<std::size_t>(n) + 2)
    throw std::runtime_error("rotation_partition_oracle: rho rational within precision");
  const ConvergentTable t = convergents(cf);

  const auto delta = [&](int k) {
    return abs(Real::of_integer(t.q(k), bits) * rho - Real::of_integer(t.p(k), bits));
  };
  const Real eps_n = delta(n), eps_n1 = delta(n + 1);
  if (eps_n.is_zero() || eps_n1.is_zero())
    throw std::runtime_error("rotation_partition_oracle: endpoint collision");

  std::vector<TaggedInterval> atoms;
  const long qn = t.q_long(n), qn1 = t.q_long(n + 1);
  atoms.reserve(static_cast<std::size_t>(qn + qn1));
  // I_n sits to the right of the base point when n is even, to the left
  // when n is odd (closest returns alternate sides).
  for (long i = 0; i < qn1; ++i) {
    Real base = Real::of_int(i, bits) * rho;
    if (n % 2 != 0) base -= eps_n;
    atoms.push_back({CircleInterval(reduce_mod1(base), eps_n), n, i});
  }
  for (long j = 0; j < qn; ++j) {
    Real base = Real::of_int(j, bits) * rho;
    if (n % 2 == 0) base -= eps_n1;
    atoms.push_back({CircleInterval(reduce_mod1(base), eps_n1), n + 1, j});
  }
  std::sort(atoms.begin(), atoms.end(), [](const TaggedInterval& a, const TaggedInterval& b) {
    return a.interval.left.value < b.interval.left.value;
  });
  return atoms;
}

// CSV export: columns n, a_n, p_n, q_n and, when rho is supplied, the
// closest-return sign of q_n rho - p_n.
inline void export_csv(const ConvergentTable& t, std::ostream& os,
                       const std::optional<Real>& rho = std::nullopt) {
  os << "n,a_n,p_n,q_n,sign\n";
  for (std::size_t n = 0; n < t.rows.size(); ++n) {
    os << n << ',';
    if (n < t.quotients.size()) os << t.quotients[n];
    os << ',' << t.p(n) << ',' << t.q(n) << ',';
    if (rho) {
      Real d = Real::of_integer(t.q(n), rho->bits()) * *rho -
               Real::of_integer(t.p(n), rho->bits());
      os << (d.sign() > 0 ? "+" : d.sign() < 0 ? "-" : "0");
    }
    os << '\n';
  }
}

}  // namespace circlelab
