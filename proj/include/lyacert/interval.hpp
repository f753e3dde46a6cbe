#pragma once

// Self-validated interval arithmetic with outward rounding.
//
// IEEE-754 basic operations (+, -, *, /, sqrt) are correctly rounded, so the
// true result is within half an ulp of the computed one; widening each bound
// by one ulp after the operation yields a rigorous enclosure without touching
// the FPU rounding mode (which would not survive compiler reordering).
// Library functions without a correct-rounding guarantee (tanh) are widened
// by two ulps.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace lyacert {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  explicit Interval(double v) : lo(v), hi(v) {}
  Interval(double l, double h) : lo(l), hi(h) { assert(!(l > h)); }

  static Interval hull(double a, double b) {
    return a <= b ? Interval(a, b) : Interval(b, a);
  }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return lo <= v && v <= hi; }
};

namespace detail {

inline double down(double v) {
  return std::nextafter(v, -std::numeric_limits<double>::infinity());
}
inline double up(double v) {
  return std::nextafter(v, std::numeric_limits<double>::infinity());
}

}  // namespace detail

inline Interval widen(Interval a) {
  return Interval(detail::down(a.lo), detail::up(a.hi));
}

inline Interval operator+(Interval a, Interval b) {
  return widen(Interval(a.lo + b.lo, a.hi + b.hi));
}

inline Interval operator-(Interval a, Interval b) {
  return widen(Interval(a.lo - b.hi, a.hi - b.lo));
}

inline Interval operator-(Interval a) { return Interval(-a.hi, -a.lo); }

inline Interval operator*(Interval a, Interval b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi;
  const double p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return widen(Interval(std::min(std::min(p1, p2), std::min(p3, p4)),
                        std::max(std::max(p1, p2), std::max(p3, p4))));
}

inline Interval operator*(double s, Interval a) { return Interval(s) * a; }

inline Interval operator+(Interval a, double s) { return a + Interval(s); }
inline Interval operator-(Interval a, double s) { return a - Interval(s); }

/// Tight enclosure of {v^2 : v in a}; never dips below zero.
inline Interval square(Interval a) {
  const double l2 = a.lo * a.lo, h2 = a.hi * a.hi;
  double lo, hi;
  if (a.lo >= 0.0) {
    lo = l2;
    hi = h2;
  } else if (a.hi <= 0.0) {
    lo = h2;
    hi = l2;
  } else {
    lo = 0.0;
    hi = std::max(l2, h2);
  }
  Interval r = widen(Interval(lo, hi));
  r.lo = std::max(r.lo, 0.0);
  return r;
}

/// Enclosure of sqrt over a nonnegative interval (tiny negative lo from
/// previous widening is clamped to zero).
inline Interval interval_sqrt(Interval a) {
  const double lo = std::sqrt(std::max(a.lo, 0.0));
  const double hi = std::sqrt(std::max(a.hi, 0.0));
  Interval r = widen(Interval(lo, hi));
  r.lo = std::max(r.lo, 0.0);
  return r;
}

inline Interval interval_abs(Interval a) {
  if (a.lo >= 0.0) return a;
  if (a.hi <= 0.0) return Interval(-a.hi, -a.lo);
  return Interval(0.0, std::max(-a.lo, a.hi));
}

/// tanh is monotone; widen by two ulps since libm is not correctly rounded.
inline Interval interval_tanh(Interval a) {
  Interval r = widen(widen(Interval(std::tanh(a.lo), std::tanh(a.hi))));
  r.lo = std::max(r.lo, -1.0);
  r.hi = std::min(r.hi, 1.0);
  return r;
}

/// sech^2(t) = 1 - tanh^2(t), via the tanh enclosure.
inline Interval interval_sech2(Interval a) {
  Interval r = Interval(1.0) - square(interval_tanh(a));
  r.lo = std::max(r.lo, 0.0);
  r.hi = std::min(r.hi, 1.0);
  return r;
}

}  // namespace lyacert
