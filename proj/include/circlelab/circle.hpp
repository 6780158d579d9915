#pragma once

// Points and positively-oriented arcs on the circle R/Z, normalized to
// total length 1.

#include "circlelab/real.hpp"

#include <stdexcept>

namespace circlelab {

struct CirclePoint {
  Real value;  // in [0, 1)

  explicit CirclePoint(Real v) : value(std::move(v)) {
    if (value.sign() < 0 || cmp(value, 1) >= 0)
      throw std::invalid_argument("CirclePoint: value outside [0,1)");
  }

  long bits() const { return value.bits(); }
};

inline CirclePoint reduce_mod1(const Real& x) {
  if (!x.is_finite()) throw std::domain_error("reduce_mod1: non-finite input");
  return CirclePoint(fractional(x));
}

// Length of the positively-oriented arc a -> b.
inline Real forward_gap(const CirclePoint& a, const CirclePoint& b) {
  return fractional(b.value - a.value);
}

inline Real circle_distance(const CirclePoint& a, const CirclePoint& b) {
  Real d = abs(a.value - b.value);
  Real w = Real::of_int(1, d.bits()) - d;
  return min(d, w);
}

// The positively-oriented arc from `left` of the given length.
struct CircleInterval {
  CirclePoint left;
  Real length;

  CircleInterval(CirclePoint l, Real len) : left(std::move(l)), length(std::move(len)) {
    if (length.sign() <= 0 || cmp(length, 1) >= 0)
      throw std::invalid_argument("CircleInterval: length outside (0,1)");
  }

  CirclePoint right() const { return reduce_mod1(left.value + length); }

  // Is p inside the closed arc?
  bool contains(const CirclePoint& p) const { return forward_gap(left, p) <= length; }

  // Is `other` contained in the closed arc?
  bool contains(const CircleInterval& other) const {
    Real off = forward_gap(left, other.left);
    return off + other.length <= length;
  }
};

}  // namespace circlelab
