#pragma once

// Deciding the combinatorics of a map against a target continued
// fraction, and tuning the rotation parameter a until the closest-return
// signs at the base point match the target to a requested depth.
//
// The sign tests evaluate s_n = sign(F^{q_n}(x) - x - p_n) on the lift
// at the lifted base point, in order of n; for the target's rotation
// number these signs alternate (+ at even n, - at odd n).  Within a
// monotone family F_a = a + G(x) the verdict is monotone in a, which is
// what the bisection relies on.

#include "circlelab/continued_fraction.hpp"
#include "circlelab/trig_map.hpp"

#include <optional>
#include <string>

namespace circlelab {

class PrecisionExhausted : public std::runtime_error {
 public:
  explicit PrecisionExhausted(const std::string& what) : std::runtime_error(what) {}
};

struct CompareVerdict {
  enum class Kind { TooSmall, TooLarge, Consistent } kind;
  int level;  // first violating n, or the certified depth

  bool consistent() const { return kind == Kind::Consistent; }
};

struct CombinatorialComparator {
  ConvergentTable target;
  CirclePoint base;
  int depth;

  CombinatorialComparator(ConvergentTable t, CirclePoint b, int d)
      : target(std::move(t)), base(std::move(b)), depth(d) {
    if (depth < 1 || static_cast<std::size_t>(depth) > target.max_level())
      throw std::invalid_argument("comparator depth out of range of target table");
  }
};

inline CirclePoint default_base(const MapSpec& spec) {
  if (spec.critical_points.empty())
    return reduce_mod1(Real::of_int(0, spec.bits()));
  return spec.critical_points[0].c;
}

// How to treat return displacements smaller than the noise floor: the
// comparator's contract is to report them (they are indistinguishable
// from an exact periodic passage), while the tuner folds them into the
// conservative zero rule so its bracket keeps shrinking.
enum class SubNoisePolicy { report, treat_as_zero };

// Walks the lift orbit of the base point once, reading off the sign at
// each return time.  Equality s_n = 0 is classified conservatively
// (TooSmall at even n, TooLarge at odd n) so a bisection bracket keeps
// shrinking across rational plateaus.
inline CompareVerdict compare(const TrigProductMap& map, const CombinatorialComparator& cmp,
                              SubNoisePolicy policy = SubNoisePolicy::report) {
  const long b = map.bits();
  const Real noise = Real::pow2(-(b - 96), b);
  const Real x0 = cmp.base.value;
  Real x = x0;
  long k = 0;
  for (int n = 0; n <= cmp.depth; ++n) {
    const long qn = cmp.target.q_long(n);
    while (k < qn) {
      x = map.eval_lift(x);
      ++k;
    }
    Real delta = x - x0 - Real::of_integer(cmp.target.p(n), b);
    int s = delta.sign();
    if (s != 0 && abs(delta) < noise) {
      if (policy == SubNoisePolicy::report)
        throw PrecisionExhausted("compare: return displacement below noise floor at n=" +
                                 std::to_string(n));
      s = 0;
    }
    if (n % 2 == 0 && s <= 0) return {CompareVerdict::Kind::TooSmall, n};
    if (n % 2 == 1 && s >= 0) return {CompareVerdict::Kind::TooLarge, n};
  }
  return {CompareVerdict::Kind::Consistent, cmp.depth};
}

inline CompareVerdict compare(const TrigProductMap& map, const ConvergentTable& target,
                              int depth) {
  return compare(map, CombinatorialComparator(target, default_base(map.spec()), depth));
}

struct TuneResult {
  Real a_star;
  int verified_depth;
  Real bracket_lo, bracket_hi;
  long compare_calls = 0;
  bool converged = false;
  std::string note;

  Real bracket_width() const { return bracket_hi - bracket_lo; }
};

// Bisects a in [0,1] until a parameter with target-consistent
// combinatorics to `depth` is found and a bracket of width at most
// 2^{-resolution_bits} around it is certified.  When the consistency
// window is wider than the resolution, the bracket endpoints are
// certified consistent themselves (so any point of the bracket has the
// target combinatorics); otherwise the bracket is a TooSmall/TooLarge
// enclosure of the whole window.
inline TuneResult tune(const TrigProductMap& family, const ConvergentTable& target, int depth,
                       long resolution_bits) {
  const long b = family.bits();
  if (resolution_bits < 8 || resolution_bits > b - 32)
    throw std::invalid_argument("tune: resolution_bits out of range");
  const CirclePoint base = default_base(family.spec());
  const CombinatorialComparator comparator(target, base, depth);
  const Real res = Real::pow2(-resolution_bits, b);
  const long cap = 4 * resolution_bits;

  TuneResult out{Real::of_int(0, b), 0, Real::of_int(0, b), Real::of_int(1, b)};
  const auto verdict = [&](const Real& a) {
    ++out.compare_calls;
    return compare(family.with_offset(a), comparator, SubNoisePolicy::treat_as_zero);
  };

  Real lo = Real::of_int(0, b), hi = Real::of_int(1, b);
  std::optional<Real> witness;
  for (long it = 0; it < cap; ++it) {
    Real mid = (lo + hi) / 2;
    CompareVerdict v = verdict(mid);
    if (v.kind == CompareVerdict::Kind::TooSmall) {
      lo = mid;
    } else if (v.kind == CompareVerdict::Kind::TooLarge) {
      hi = mid;
    } else {
      witness = mid;
      break;
    }
    if (hi - lo <= res) {
      // The whole consistency window (if any) is inside [lo, hi].
      out.a_star = (lo + hi) / 2;
      out.bracket_lo = lo;
      out.bracket_hi = hi;
      CompareVerdict vm = verdict(out.a_star);
      out.verified_depth = vm.consistent() ? depth : vm.level;
      out.converged = vm.consistent();
      if (!out.converged)
        out.note = "bracket reached resolution without a certified consistent midpoint";
      return out;
    }
  }
  if (!witness) {
    out.note = "iteration cap reached before finding consistent combinatorics";
    out.bracket_lo = lo;
    out.bracket_hi = hi;
    return out;
  }

  // Certify a bracket around the witness; halve until both endpoints
  // carry the target combinatorics.
  Real delta = res / 2;
  for (long attempt = 0; attempt < cap; ++attempt) {
    Real cl = *witness - delta;
    Real cr = *witness + delta;
    if (cl.sign() > 0 && cmp(cr, 1) < 0 && verdict(cl).consistent() &&
        verdict(cr).consistent()) {
      out.a_star = *witness;
      out.verified_depth = depth;
      out.bracket_lo = cl;
      out.bracket_hi = cr;
      out.converged = true;
      return out;
    }
    delta = delta / 2;
    if (delta.is_zero()) break;
  }
  out.a_star = *witness;
  out.verified_depth = depth;
  out.bracket_lo = *witness;
  out.bracket_hi = *witness;
  out.converged = false;
  out.note = "consistent point found but no surrounding bracket certified";
  return out;
}

// Birkhoff-average estimate (F^n(x) - x)/n; error O(1/n).  A weak
// cross-check on tune, not a certification.
inline Real rotation_number_estimate(const TrigProductMap& map, long iterations) {
  if (iterations < 1) throw std::invalid_argument("rotation_number_estimate: iterations >= 1");
  const CirclePoint base = default_base(map.spec());
  Real x = map.iterate_lift(base.value, iterations);
  return (x - base.value) / iterations;
}

}  // namespace circlelab
