#pragma once

// Circle homeomorphism lifts with prescribed critical structure.
//
// A map is built from its derivative: DF(x) = Z * prod_i sin^{d_i - 1}(pi (x - c_i)),
// a nonnegative trigonometric polynomial vanishing exactly at the chosen
// points c_i with even local order d_i - 1, normalized so the mean of DF
// is 1 (degree-one lift).  Each factor expands exactly through the
// binomial identity sin^2(pi u) = (1 - cos 2 pi u)/2, so the Fourier
// coefficients of DF are finite and closed-form, as are all derivatives
// of the lift F(x) = a + x + sum_{k != 0} gamma_k (e^{2 pi i k x} - 1)/(2 pi i k).
//
// With one cubic critical point at 0 this is the classical critical
// Arnold lift F(x) = a + x - sin(2 pi x)/(2 pi).

#include "circlelab/circle.hpp"
#include "circlelab/real.hpp"

#include <algorithm>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace circlelab {

struct CriticalPointSpec {
  CirclePoint c;
  int d;  // odd criticality >= 3
};

struct MapSpec {
  std::vector<CriticalPointSpec> critical_points;
  Real offset;  // the rotation parameter a

  long bits() const { return offset.bits(); }

  static MapSpec rotation(Real a) { return MapSpec{{}, std::move(a)}; }

  void validate() const {
    for (const auto& cp : critical_points) {
      if (cp.d < 3 || cp.d % 2 == 0)
        throw std::invalid_argument("criticality must be an odd integer >= 3");
      if (cp.c.bits() != offset.bits()) throw PrecisionMismatch(cp.c.bits(), offset.bits());
    }
    for (std::size_t i = 0; i < critical_points.size(); ++i)
      for (std::size_t j = i + 1; j < critical_points.size(); ++j)
        if (critical_points[i].c.value == critical_points[j].c.value)
          throw std::invalid_argument("coincident critical points");
  }
};

// Value of the lift and its first three derivatives at a point.
struct JetValue {
  Real f, df, d2f, d3f;
};

class TrigProductMap {
 public:
  explicit TrigProductMap(MapSpec spec) : spec_(std::move(spec)), two_pi_(Real::pi(spec_.bits()) * 2) {
    spec_.validate();
    build_coefficients();
    compute_critical_radii();
  }

  const MapSpec& spec() const { return spec_; }
  long bits() const { return spec_.bits(); }
  std::size_t num_critical() const { return spec_.critical_points.size(); }
  int harmonics() const { return static_cast<int>(re_.size()) - 1; }  // M
  const Real& offset() const { return spec_.offset; }
  const Real& normalization() const { return z_; }
  const Real& fourier_re(int k) const { return re_.at(k); }
  const Real& fourier_im(int k) const { return im_.at(k); }
  const Real& critical_radius(std::size_t i) const { return critical_radii_.at(i); }
  const CirclePoint& critical_point(std::size_t i) const { return spec_.critical_points.at(i).c; }
  int criticality(std::size_t i) const { return spec_.critical_points.at(i).d; }
  int max_criticality() const {
    int d = 0;
    for (const auto& cp : spec_.critical_points) d = std::max(d, cp.d);
    return d;
  }

  // Same Fourier data with a different rotation parameter.
  TrigProductMap with_offset(const Real& a) const {
    TrigProductMap m(*this);
    m.spec_.offset = a;
    return m;
  }

  // Lift value and first three derivatives; works for any real lift
  // coordinate (the periodic part ignores the integer part of x).
  JetValue eval_jet(const Real& x) const {
    const long b = bits();
    JetValue j{spec_.offset + x, Real::of_int(1, b), Real::of_int(0, b), Real::of_int(0, b)};
    const int M = harmonics();
    if (M == 0) return j;
    Real theta = two_pi_ * x;
    Real s(b), c(b);
    for (int k = 1; k <= M; ++k) {
      sin_cos(s, c, theta * k);
      // A = Re(gamma_k e^{2 pi i k x}), B = Im(gamma_k e^{2 pi i k x})
      Real A = re_[k] * c - im_[k] * s;
      Real B = re_[k] * s + im_[k] * c;
      Real w = two_pi_ * k;
      j.f += (B - im_[k]) / pi_k_[k];
      j.df += A * 2;
      j.d2f -= w * B * 2;
      j.d3f -= w * w * A * 2;
    }
    return j;
  }

  Real eval_lift(const Real& x) const { return eval_jet(x).f; }

  CirclePoint eval_circle(const CirclePoint& x) const { return reduce_mod1(eval_lift(x.value)); }

  // j-fold composition on the circle (reduced mod 1 each step).
  CirclePoint iterate(const CirclePoint& x, long j) const {
    CirclePoint y = x;
    for (long k = 0; k < j; ++k) y = eval_circle(y);
    return y;
  }

  // j-fold composition on the lift (no reduction).
  Real iterate_lift(const Real& x, long j) const {
    Real y = x;
    for (long k = 0; k < j; ++k) y = eval_lift(y);
    return y;
  }

  // Df at the orbit points f^k(x), k = 0..j-1, and the running products
  // Df^k(x), k = 0..j (with Df^0 = 1).
  struct OrbitDerivatives {
    std::vector<Real> factors;   // Df(f^k x), k = 0..j-1
    std::vector<Real> products;  // Df^k(x),  k = 0..j
  };

  OrbitDerivatives derivative_along_orbit(const CirclePoint& x, long j) const {
    if (j < 1) throw std::invalid_argument("derivative_along_orbit: j >= 1 required");
    OrbitDerivatives out;
    out.factors.reserve(j);
    out.products.reserve(j + 1);
    out.products.push_back(Real::of_int(1, bits()));
    Real y = x.value;
    for (long k = 0; k < j; ++k) {
      JetValue jet = eval_jet(y);
      out.factors.push_back(jet.df);
      out.products.push_back(out.products.back() * jet.df);
      y = fractional(jet.f);
    }
    return out;
  }

  // Schwarzian derivative from the jet: f'''/f' - (3/2)(f''/f')^2.
  Real schwarzian(const Real& x) const {
    JetValue j = eval_jet(x);
    if (j.df.sign() <= 0) throw std::domain_error("schwarzian: critical point input");
    Real n = j.d2f / j.df;
    return j.d3f / j.df - n * n * 3 / 2;
  }

  Real schwarzian(const CirclePoint& x) const { return schwarzian(x.value); }

  // Same quantity through the nonlinearity of log DF:
  // N = (log DF)' = sum (d_i - 1) pi cot(pi (x - c_i)), Sf = N' - N^2/2.
  Real schwarzian_cotangent(const Real& x) const {
    const long b = bits();
    Real pi = Real::pi(b);
    Real n = Real::of_int(0, b), dn = Real::of_int(0, b);
    Real s(b), c(b);
    for (const auto& cp : spec_.critical_points) {
      Real u = pi * (x - cp.c.value);
      sin_cos(s, c, u);
      if (s.is_zero()) throw std::domain_error("schwarzian_cotangent: critical point input");
      long w = cp.d - 1;
      n += (pi * c / s) * w;
      dn -= (pi * pi / (s * s)) * w;
    }
    return dn - n * n / 2;
  }

  // Distance from a circle point to the nearest critical point; N = 0
  // maps report 1/2 (nothing is near a critical point).
  Real distance_to_critical(const CirclePoint& x) const {
    Real best = Real::of(0.5, bits());
    for (const auto& cp : spec_.critical_points) best = min(best, circle_distance(x, cp.c));
    return best;
  }

  // Index of a critical point lying in the closed arc, or -1.
  int critical_in(const CircleInterval& arc) const {
    for (std::size_t i = 0; i < spec_.critical_points.size(); ++i)
      if (arc.contains(spec_.critical_points[i].c)) return static_cast<int>(i);
    return -1;
  }

  void export_fourier_csv(std::ostream& os) const {
    os << "k,re,im\n";
    for (int k = 0; k <= harmonics(); ++k)
      os << k << ',' << re_[k].str_plain(40) << ',' << im_[k].str_plain(40) << '\n';
  }

 private:
  // Complex trigonometric coefficient array over k = -M..M, stored as
  // index k + M.  The rational parts are exact; phases enter as
  // high-precision cos/sin.
  struct Coeffs {
    int M;
    std::vector<Real> re, im;
  };

  static BigInt binomial(int n, int k) {
    BigInt r(1);
    for (int i = 0; i < k; ++i) {
      r *= n - i;
      r /= i + 1;
    }
    return r;
  }

  Coeffs factor_coeffs(const CriticalPointSpec& cp) const {
    const long b = bits();
    const int m = (cp.d - 1) / 2;
    Coeffs f{m, {}, {}};
    f.re.reserve(2 * m + 1);
    f.im.reserve(2 * m + 1);
    // sin^{2m}(pi u) = sum_{k=-m}^{m} (-1)^k C(2m, m-k) / 4^m e^{2 pi i k u}
    BigInt four_m = BigInt(1) << (2 * m);
    Real s(b), c(b);
    for (int k = -m; k <= m; ++k) {
      BigRational r(binomial(2 * m, m - k), four_m);
      if (k % 2 != 0) r = -r;
      Real mag = Real::of_integer(numerator(r), b) / Real::of_integer(denominator(r), b);
      // phase e^{-2 pi i k c}
      sin_cos(s, c, two_pi_ * cp.c.value * k);
      f.re.push_back(mag * c);
      f.im.push_back(mag * (-s));
    }
    return f;
  }

  static Coeffs convolve(const Coeffs& a, const Coeffs& b, long bits) {
    Coeffs out{a.M + b.M, {}, {}};
    const int n = 2 * out.M + 1;
    out.re.assign(n, Real::of_int(0, bits));
    out.im.assign(n, Real::of_int(0, bits));
    for (int i = 0; i < 2 * a.M + 1; ++i)
      for (int j = 0; j < 2 * b.M + 1; ++j) {
        out.re[i + j] += a.re[i] * b.re[j] - a.im[i] * b.im[j];
        out.im[i + j] += a.re[i] * b.im[j] + a.im[i] * b.re[j];
      }
    return out;
  }

  void build_coefficients() {
    const long b = bits();
    Coeffs prod{0, {Real::of_int(1, b)}, {Real::of_int(0, b)}};
    for (const auto& cp : spec_.critical_points) prod = convolve(prod, factor_coeffs(cp), b);
    const int M = prod.M;
    // Enforce Hermitian symmetry exactly, fold to k >= 0, normalize the
    // mean to 1.
    Real dc = prod.re[M];
    if (dc.sign() <= 0) throw std::logic_error("degenerate derivative: nonpositive mean");
    z_ = Real::of_int(1, b) / dc;
    re_.clear();
    im_.clear();
    pi_k_.clear();
    re_.reserve(M + 1);
    im_.reserve(M + 1);
    pi_k_.reserve(M + 1);
    Real pi = Real::pi(b);
    for (int k = 0; k <= M; ++k) {
      Real re = (prod.re[M + k] + prod.re[M - k]) / 2;
      Real im = (prod.im[M + k] - prod.im[M - k]) / 2;
      re_.push_back(re / dc);
      im_.push_back(im / dc);
      pi_k_.push_back(pi * k);
    }
    re_[0] = Real::of_int(1, b);
    im_[0] = Real::of_int(0, b);
  }

  // Largest dyadic radius around each critical point on which, verified
  // on a dyadic grid, DF(c + t)/|t|^{d-1} stays within a ratio 1.40
  // (power-law bracketing with comfortable margin below 3/2) and the
  // Schwarzian is negative.
  void compute_critical_radii() {
    critical_radii_.clear();
    const long b = bits();
    const std::size_t N = num_critical();
    for (std::size_t i = 0; i < N; ++i) {
      Real cap = Real::of(0.125, b);
      for (std::size_t j = 0; j < N; ++j)
        if (j != i)
          cap = min(cap, circle_distance(spec_.critical_points[i].c, spec_.critical_points[j].c) / 2);
      Real r = cap;
      bool ok = false;
      for (int halvings = 0; halvings < 60; ++halvings) {
        if (radius_verifies(i, r)) {
          ok = true;
          break;
        }
        r = r / 2;
      }
      if (!ok) throw std::runtime_error("no admissible critical neighborhood radius found");
      critical_radii_.push_back(r);
    }
  }

  bool radius_verifies(std::size_t i, const Real& r) const {
    const long b = bits();
    const auto& cp = spec_.critical_points[i];
    const Real ratio_cap = Real::of(1.40, b);
    Real lo(b), hi(b);
    bool first = true;
    for (int j = 0; j < 24; ++j) {
      for (int side = -1; side <= 1; side += 2) {
        for (int num = 3; num <= 4; ++num) {
          Real t = r * num / 4 * side;
          for (int jj = 0; jj < j; ++jj) t = t / 2;
          Real x = cp.c.value + t;
          Real h = eval_jet(x).df / pow_int(abs(t), cp.d - 1);
          if (h.sign() <= 0) return false;
          if (schwarzian(x).sign() >= 0) return false;
          if (first) {
            lo = h;
            hi = h;
            first = false;
          } else {
            lo = min(lo, h);
            hi = max(hi, h);
          }
        }
      }
    }
    return hi < lo * ratio_cap;
  }

  MapSpec spec_;
  Real two_pi_;
  Real z_ = Real::of_int(0, 64);
  std::vector<Real> re_, im_, pi_k_;
  std::vector<Real> critical_radii_;
};

}  // namespace circlelab
