#pragma once

// Cross-ratio machinery: cross-ratio distortion of iterates (directly
// and through the step-by-step chain rule), the cross-ratio inequality
// product, Schwarzian derivatives of iterates with the near-critical /
// far split, Koebe distortion checks, C1 bounds of return maps, the
// diffeo/critical-step/negative-Schwarzian decomposition of long
// returns, and the scan for the maximal return-map cross-ratio
// distortion over a partition.

#include "circlelab/partition.hpp"
#include "circlelab/trig_map.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace circlelab {

// Nested arcs M compactly inside T, stored as T plus the offsets of M.
struct IntervalPair {
  CircleInterval T;
  Real m_offset, m_length;

  IntervalPair(const CircleInterval& M, const CircleInterval& T_)
      : T(T_), m_offset(forward_gap(T_.left, M.left)), m_length(M.length) {
    if (m_offset.sign() <= 0 || m_offset + m_length >= T.length)
      throw std::invalid_argument("IntervalPair: M not compactly contained in T");
  }

  Real left_wing() const { return m_offset; }
  Real right_wing() const { return T.length - m_offset - m_length; }
};

inline Real cross_ratio_lengths(const Real& L, const Real& M, const Real& R) {
  return (L * R) / ((L + M) * (M + R));
}

// [M,T] = |L||R| / (|L u M||M u R|) in (0,1).
inline Real cross_ratio(const IntervalPair& pair) {
  return cross_ratio_lengths(pair.left_wing(), pair.m_length, pair.right_wing());
}

struct CrdResult {
  Real direct;         // [f^j(M), f^j(T)] / [M, T]
  Real chain_product;  // product of the j single-step distortions
};

// Cross-ratio distortion of f^j on the pair, computed both directly
// from the image lengths and as the iterated chain-rule product; the
// two must agree up to rounding.
inline CrdResult crd(const TrigProductMap& map, long j, const IntervalPair& pair) {
  const long b = map.bits();
  Real a = pair.T.left.value;
  Real p = a + pair.m_offset;
  Real q = p + pair.m_length;
  Real d = a + pair.T.length;
  Real cr0 = cross_ratio_lengths(p - a, q - p, d - q);
  Real cr_first = cr0;
  Real product = Real::of_int(1, b);
  Real cr_prev = cr0;
  for (long step = 0; step < j; ++step) {
    a = map.eval_lift(a);
    p = map.eval_lift(p);
    q = map.eval_lift(q);
    d = map.eval_lift(d);
    if (!(a < p && p < q && q < d))
      throw std::runtime_error("crd: image endpoints out of order");
    Real cr = cross_ratio_lengths(p - a, q - p, d - q);
    product *= cr / cr_prev;
    cr_prev = cr;
  }
  return {cr_prev / cr_first, product};
}

struct CriResult {
  Real product;
  int multiplicity;
};

// Product of single-step cross-ratio distortions over a family of
// pairs, together with the sweep-computed intersection multiplicity of
// the family {T_i}.
inline CriResult cri_product(const TrigProductMap& map, const std::vector<IntervalPair>& pairs) {
  Real product = Real::of_int(1, map.bits());
  std::vector<CircleInterval> ts;
  ts.reserve(pairs.size());
  for (const auto& pair : pairs) {
    product *= crd(map, 1, pair).direct;
    ts.push_back(pair.T);
  }
  return {product, multiplicity(ts)};
}

// Chebyshev-spaced points in the interior of an arc (clustered toward
// both endpoints, where the singular behavior lives).
inline std::vector<CirclePoint> chebyshev_grid(const CircleInterval& arc, int m) {
  std::vector<CirclePoint> pts;
  pts.reserve(m);
  const long b = arc.left.bits();
  Real pi = Real::pi(b);
  for (int i = 0; i < m; ++i) {
    Real t = (Real::of_int(1, b) - cos(pi * (2 * i + 1) / (2 * m))) / 2;
    pts.push_back(reduce_mod1(arc.left.value + arc.length * t));
  }
  return pts;
}

struct SchwarzianSplit {
  Real total;          // Sf^j(x)
  Real near_critical;  // terms whose orbit point lies in a critical neighborhood
  Real remainder;
  long near_terms = 0;
};

// Sf^j(x) = sum_{k<j} Sf(f^k x) [Df^k(x)]^2, accumulated left to right,
// split by whether f^k(x) lies within the stored critical radius of
// some critical point.
inline SchwarzianSplit schwarzian_iterate(const TrigProductMap& map, long j,
                                          const CirclePoint& x) {
  if (j < 1) throw std::invalid_argument("schwarzian_iterate: j >= 1 required");
  const long b = map.bits();
  SchwarzianSplit out{Real::of_int(0, b), Real::of_int(0, b), Real::of_int(0, b)};
  Real prod = Real::of_int(1, b);
  CirclePoint y = x;
  for (long k = 0; k < j; ++k) {
    JetValue jet = map.eval_jet(y.value);
    if (jet.df.sign() <= 0)
      throw std::domain_error("schwarzian_iterate: orbit hits a critical point");
    Real nl = jet.d2f / jet.df;
    Real s = jet.d3f / jet.df - nl * nl * 3 / 2;
    Real term = s * prod * prod;
    bool near = false;
    for (std::size_t i = 0; i < map.num_critical(); ++i)
      if (circle_distance(y, map.critical_point(i)) <= map.critical_radius(i)) {
        near = true;
        break;
      }
    if (near) {
      out.near_critical += term;
      ++out.near_terms;
    } else {
      out.remainder += term;
    }
    out.total += term;
    prod *= jet.df;
    y = reduce_mod1(jet.f);
  }
  return out;
}

struct NegativeSchwarzianReport {
  int level = 0;
  bool zero_family = false;  // Sf identically zero (rigid rotation)
  bool all_negative_In = false;   // Sf^j < 0 on I_n for j in 1..q_{n+1}
  bool all_negative_In1 = false;  // Sf^j < 0 on I_{n+1} for j in 1..q_n
  Real worst = Real::of_int(0, 64);  // max sampled Sf^j
  long samples = 0;
  long skipped_singular = 0;
  std::vector<Real> worst_In_per_point;  // per grid point of I_n
};

// Samples Sf^j over Chebyshev grids in I_n (all j <= q_{n+1}) and in
// I_{n+1} (all j <= q_n).  Every intermediate Sf^j is read off the
// running chain-rule sum, so checking all j costs one orbit walk per
// grid point.
inline NegativeSchwarzianReport verify_negative_schwarzian(PartitionSet& ps, int n,
                                                           int grid_size) {
  const TrigProductMap& map = ps.map();
  const long b = map.bits();
  NegativeSchwarzianReport rep;
  rep.level = n;
  rep.worst = -Real::pow2(b, b);
  if (map.num_critical() == 0) {
    rep.zero_family = true;
    return rep;
  }
  const long qn = ps.table().q_long(n), qn1 = ps.table().q_long(n + 1);
  auto& orbit = ps.orbit(static_cast<std::size_t>(qn + qn1 + 1));

  const auto arc_of = [&](int level) {
    const long q = ps.table().q_long(level);
    const CirclePoint& a = level % 2 == 0 ? orbit.point(0) : orbit.point(q);
    const CirclePoint& c = level % 2 == 0 ? orbit.point(q) : orbit.point(0);
    return CircleInterval(a, forward_gap(a, c));
  };

  const auto scan = [&](const CircleInterval& arc, long jmax, bool& flag,
                        std::vector<Real>* per_point) {
    flag = true;
    for (const auto& x : chebyshev_grid(arc, grid_size)) {
      Real sum = Real::of_int(0, b);
      Real prod = Real::of_int(1, b);
      Real point_worst = -Real::pow2(b, b);
      CirclePoint y = x;
      bool singular = false;
      for (long j = 1; j <= jmax; ++j) {
        JetValue jet = map.eval_jet(y.value);
        if (jet.df.sign() <= 0) {
          singular = true;
          break;
        }
        Real nl = jet.d2f / jet.df;
        sum += (jet.d3f / jet.df - nl * nl * 3 / 2) * prod * prod;
        ++rep.samples;
        if (sum.sign() >= 0) flag = false;
        point_worst = max(point_worst, sum);
        prod *= jet.df;
        y = reduce_mod1(jet.f);
      }
      rep.worst = max(rep.worst, point_worst);
      if (per_point) per_point->push_back(point_worst);
      if (singular) ++rep.skipped_singular;
    }
  };

  scan(arc_of(n), qn1, rep.all_negative_In, &rep.worst_In_per_point);
  scan(arc_of(n + 1), qn, rep.all_negative_In1, nullptr);
  return rep;
}

struct C1Report {
  int level = 0;
  Real K_n = Real::of_int(0, 64);      // max Df^j(x) |I_n| / |f^j(I_n)|
  Real c1_norm = Real::of_int(0, 64);  // max Df^{q_{n+1}} on I_n
};

inline C1Report c1_bound_constant(PartitionSet& ps, int n, int grid_size) {
  const TrigProductMap& map = ps.map();
  const long b = map.bits();
  const long qn = ps.table().q_long(n), qn1 = ps.table().q_long(n + 1);
  ps.orbit(static_cast<std::size_t>(qn + qn1 + 2));

  std::vector<Real> image_len;
  image_len.reserve(qn1 + 1);
  for (long j = 0; j <= qn1; ++j) image_len.push_back(ps.length_In_image(n, j));

  C1Report rep;
  rep.level = n;
  rep.K_n = Real::of_int(1, b);
  rep.c1_norm = Real::of_int(0, b);
  const Real& len0 = image_len[0];
  CircleInterval In = n % 2 == 0
                          ? CircleInterval(ps.orbit(1).point(0), len0)
                          : CircleInterval(ps.orbit(static_cast<std::size_t>(qn + 1)).point(qn), len0);
  for (const auto& x : chebyshev_grid(In, grid_size)) {
    Real prod = Real::of_int(1, b);
    CirclePoint y = x;
    for (long j = 0; j <= qn1; ++j) {
      rep.K_n = max(rep.K_n, prod * len0 / image_len[j]);
      if (j == qn1) {
        rep.c1_norm = max(rep.c1_norm, prod);
        break;
      }
      JetValue jet = map.eval_jet(y.value);
      prod *= jet.df;
      y = reduce_mod1(jet.f);
    }
  }
  return rep;
}

// Critical times of level n: j in {1..q_{n+1}} with f^j(T_n) meeting a
// critical point.
inline std::vector<long> critical_times(PartitionSet& ps, int n) {
  std::vector<long> times;
  const long qn1 = ps.table().q_long(n + 1);
  for (long j = 1; j <= qn1; ++j)
    if (ps.map().critical_in(ps.tn_image(n, j)) >= 0) times.push_back(j);
  return times;
}

struct KoebeResult {
  bool preconditions_ok = false;
  std::string note;
  Real measured = Real::of_int(0, 64);
  Real bound = Real::of_int(0, 64);
  bool within_bound = false;
  Real total_image_length = Real::of_int(0, 64);
  Real space = Real::of_int(0, 64);
};

// Measured distortion of f^k on M against (1 + 1/tau)^2 exp(C0 ell).
// All hypotheses (diffeomorphic branch, total image length <= ell,
// tau-scaled space around the image of M) are verified; on violation
// the check is skipped and reported.
inline KoebeResult koebe_check(const TrigProductMap& map, long k, const CircleInterval& T,
                               const CircleInterval& M, const Real& tau, const Real& ell,
                               const Real& C0, int grid_size = 32) {
  const long b = map.bits();
  KoebeResult out;
  Real off = forward_gap(T.left, M.left);
  if (off.sign() <= 0 || off + M.length >= T.length) {
    out.note = "M is not compactly contained in T";
    return out;
  }
  Real a = T.left.value;
  Real p = a + off;
  Real q = p + M.length;
  Real d = a + T.length;
  Real total = Real::of_int(0, b);
  for (long j = 0; j < k; ++j) {
    if (cmp(d - a, 1) >= 0) {
      out.note = "branch not diffeomorphic: image of T covers the circle";
      return out;
    }
    CircleInterval arc(reduce_mod1(a), d - a);
    if (map.critical_in(arc) >= 0) {
      out.note = "branch not diffeomorphic: critical point in f^" + std::to_string(j) + "(T)";
      return out;
    }
    total += d - a;
    a = map.eval_lift(a);
    p = map.eval_lift(p);
    q = map.eval_lift(q);
    d = map.eval_lift(d);
  }
  out.total_image_length = total;
  if (total > ell) {
    out.note = "total image length exceeds ell";
    return out;
  }
  Real mlen = q - p;
  out.space = min(p - a, d - q) / mlen;
  if (out.space < tau) {
    out.note = "image space below tau";
    return out;
  }
  out.preconditions_ok = true;

  Real lo(b), hi(b);
  bool first = true;
  for (const auto& x : chebyshev_grid(M, grid_size)) {
    Real prod = Real::of_int(1, b);
    CirclePoint y = x;
    for (long j = 0; j < k; ++j) {
      JetValue jet = map.eval_jet(y.value);
      prod *= jet.df;
      y = reduce_mod1(jet.f);
    }
    if (first) {
      lo = prod;
      hi = prod;
      first = false;
    } else {
      lo = min(lo, prod);
      hi = max(hi, prod);
    }
  }
  out.measured = hi / lo;
  Real one = Real::of_int(1, b);
  Real base = one + one / tau;
  out.bound = base * base * exp(C0 * ell);
  out.within_bound = out.measured <= out.bound;
  return out;
}

// Fits the smallest C0 that makes every sampled diffeomorphic branch
// between consecutive critical times satisfy the Koebe bound, over the
// given levels.  Returns 0 when the scaled-space factor alone covers
// every sample.
struct KoebeFit {
  Real c0 = Real::of_int(0, 64);
  long branches = 0;
};

inline KoebeFit fit_koebe_c0(PartitionSet& ps, int n_lo, int n_hi, int grid_size = 24) {
  const TrigProductMap& map = ps.map();
  const long b = map.bits();
  KoebeFit fit;
  fit.c0 = Real::of_int(0, b);
  for (int n = n_lo; n <= n_hi; ++n) {
    std::vector<long> times = critical_times(ps, n);
    for (std::size_t t = 0; t + 1 < times.size(); ++t) {
      const long j1 = times[t], j2 = times[t + 1];
      const long len = j2 - j1 - 1;
      if (len < 1) continue;
      const long qn = ps.table().q_long(n);
      CircleInterval T = ps.tn_image(n, j1 + 1);
      auto& orb = ps.orbit(static_cast<std::size_t>(j1 + 1 + qn + 1));
      const CirclePoint& il = orb.point(j1 + 1 + (n % 2 == 0 ? 0 : qn));
      const CirclePoint& ir = orb.point(j1 + 1 + (n % 2 == 0 ? qn : 0));
      CircleInterval In(il, forward_gap(il, ir));
      // Hypotheses measured on the branch itself.
      Real off = forward_gap(T.left, In.left);
      if (off.sign() <= 0 || off + In.length >= T.length) continue;
      Real a = T.left.value, p = a + off, q = p + In.length, d = a + T.length;
      Real total = Real::of_int(0, b);
      bool diffeo = true;
      for (long j = 0; j < len; ++j) {
        if (cmp(d - a, 1) >= 0) {
          diffeo = false;
          break;
        }
        CircleInterval arc(reduce_mod1(a), d - a);
        if (map.critical_in(arc) >= 0) {
          diffeo = false;
          break;
        }
        total += d - a;
        a = map.eval_lift(a);
        p = map.eval_lift(p);
        q = map.eval_lift(q);
        d = map.eval_lift(d);
      }
      if (!diffeo) continue;
      Real space = min(p - a, d - q) / (q - p);
      if (space.sign() <= 0) continue;

      Real lo(b), hi(b);
      bool first = true;
      CircleInterval M(reduce_mod1(T.left.value + off), In.length);
      for (const auto& x : chebyshev_grid(M, grid_size)) {
        Real prod = Real::of_int(1, b);
        CirclePoint y = x;
        for (long j = 0; j < len; ++j) {
          JetValue jet = map.eval_jet(y.value);
          prod *= jet.df;
          y = reduce_mod1(jet.f);
        }
        if (first) {
          lo = prod;
          hi = prod;
          first = false;
        } else {
          lo = min(lo, prod);
          hi = max(hi, prod);
        }
      }
      ++fit.branches;
      Real one = Real::of_int(1, b);
      Real koebe_factor = (one + one / space) * (one + one / space);
      Real excess = hi / lo / koebe_factor;
      if (excess > one && total.sign() > 0) fit.c0 = max(fit.c0, log(excess) / total);
    }
  }
  return fit;
}

struct DecompositionBlock {
  enum class Kind { Diffeo, CriticalStep, NegSchwarz } kind;
  long start, length;
  std::optional<Real> distortion;        // diffeo blocks: sup/inf of Df^len on the image of D*
  std::optional<int> critical_index;     // critical steps
  std::optional<Real> worst_schwarzian;  // neg-Schwarzian blocks: max sampled Sf^len
};

struct DecompositionTrace {
  std::vector<DecompositionBlock> blocks;
  long diffeo_count = 0, critical_count = 0, neg_schwarz_count = 0;
  bool counts_within_bounds = false;     // diffeo <= 3N+1 and critical <= 3N
  bool distortion_within_epsilon = true; // every diffeo block below 1 + eps
  std::string note;
};

namespace detail {

// Does the arc x_a -> x_b (orbit indices, positive orientation) fit in
// a single closed atom of p?
inline bool image_in_single_atom(const DynamicalPartition& p, ReturnStructure& orbit, long a,
                                 long b) {
  const CirclePoint& pa = orbit.point(a);
  const CirclePoint& pb = orbit.point(b);
  long r = p.locate(pa);
  const PartitionAtom& host = p.at_position(r);
  Real off = forward_gap(host.left, pa);
  return off + forward_gap(pa, pb) <= host.length;
}

}  // namespace detail

// Decomposition of f^k on D* (the atom at `atom_position` of P_n
// together with its two neighbours) into diffeomorphic blocks with
// measured distortion, single critical steps, and negative-Schwarzian
// blocks, following the orbit of the ambient atom J in P_{n1}
// containing D.  Requires f^j(D) to stay inside single atoms of P_n for
// j <= k.
inline DecompositionTrace decompose(PartitionSet& ps, int n, long atom_position, long k,
                                    const Real& epsilon, int n1, int grid_size = 16) {
  if (n1 >= n) throw std::invalid_argument("decompose: n1 must be below n");
  const TrigProductMap& map = ps.map();
  const long b = map.bits();
  const std::size_t N = map.num_critical();
  auto pn = ps.level(n);
  auto pj = ps.level(n1);
  const PartitionAtom& atom = pn->at_position(atom_position);
  const PartitionAtom& prev = pn->at_position(atom_position - 1);
  const PartitionAtom& next = pn->at_position(atom_position + 1);

  const long star_l = prev.left_index, star_r = next.right_index;
  const long amb = pj->locate(atom.left);
  const PartitionAtom& J = pj->at_position(amb);
  const long j_l = J.left_index, j_r = J.right_index;

  const long maxidx = std::max({atom.left_index, atom.right_index, star_l, star_r, j_l, j_r});
  auto& orbit = ps.orbit(static_cast<std::size_t>(maxidx + k + 2));

  for (long j = 1; j <= k; ++j)
    if (!detail::image_in_single_atom(*pn, orbit, atom.left_index + j, atom.right_index + j))
      throw std::invalid_argument(
          "decompose: f^j(D) leaves the level-n atoms at j=" + std::to_string(j));

  const auto arc_at = [&](long l, long r, long shift) {
    const CirclePoint& pl = orbit.point(l + shift);
    return CircleInterval(pl, forward_gap(pl, orbit.point(r + shift)));
  };

  DecompositionTrace trace;
  long i = 0;
  while (i < k) {
    const bool j_critical = map.critical_in(arc_at(j_l, j_r, i)) >= 0;
    if (!j_critical) {
      long s = 1;
      while (i + s < k && map.critical_in(arc_at(j_l, j_r, i + s)) < 0) ++s;
      // distortion of f^s on the image of D*
      CircleInterval dom = arc_at(star_l, star_r, i);
      Real lo(b), hi(b);
      bool first = true;
      for (const auto& x : chebyshev_grid(dom, grid_size)) {
        Real prod = Real::of_int(1, b);
        CirclePoint y = x;
        for (long t = 0; t < s; ++t) {
          JetValue jet = map.eval_jet(y.value);
          prod *= jet.df;
          y = reduce_mod1(jet.f);
        }
        if (prod.sign() <= 0) continue;
        if (first) {
          lo = prod;
          hi = prod;
          first = false;
        } else {
          lo = min(lo, prod);
          hi = max(hi, prod);
        }
      }
      DecompositionBlock blk{DecompositionBlock::Kind::Diffeo, i, s, std::nullopt, std::nullopt,
                             std::nullopt};
      if (!first) {
        blk.distortion = hi / lo;
        if (*blk.distortion > Real::of_int(1, b) + epsilon) trace.distortion_within_epsilon = false;
      }
      trace.blocks.push_back(std::move(blk));
      ++trace.diffeo_count;
      i += s;
      continue;
    }
    const int c_in_star = map.critical_in(arc_at(star_l, star_r, i));
    if (c_in_star >= 0) {
      trace.blocks.push_back({DecompositionBlock::Kind::CriticalStep, i, 1, std::nullopt,
                              c_in_star, std::nullopt});
      ++trace.critical_count;
      i += 1;
      continue;
    }
    long s = 1;
    while (i + s < k && map.critical_in(arc_at(star_l, star_r, i + s)) < 0) ++s;
    // sampled Schwarzian of f^s on the image of D* (expected negative)
    CircleInterval dom = arc_at(star_l, star_r, i);
    Real worst = -Real::pow2(b, b);
    for (const auto& x : chebyshev_grid(dom, grid_size)) {
      try {
        worst = max(worst, schwarzian_iterate(map, s, x).total);
      } catch (const std::domain_error&) {
      }
    }
    trace.blocks.push_back(
        {DecompositionBlock::Kind::NegSchwarz, i, s, std::nullopt, std::nullopt, worst});
    ++trace.neg_schwarz_count;
    i += s;
  }
  trace.counts_within_bounds = trace.diffeo_count <= static_cast<long>(3 * N + 1) &&
                               trace.critical_count <= static_cast<long>(3 * N);
  return trace;
}

struct AtomCrdRow {
  long position;
  int generation;
  long orbit_index;
  long k_max;
  double max_crd;
};

struct CrdScanResult {
  Real max_crd = Real::of_int(0, 64);
  long atoms = 0;
  long admissible_pairs = 0;  // (atom, k) pairs with k admissible
  long evaluated_pairs = 0;   // cross-ratio evaluations performed
  long max_k = 0;
  bool strided = false;
  bool k_capped = false;
};

// Over every atom D of P_n, walks k = 1, 2, ... as long as f^k(D) stays
// inside a single atom of P_n (tested directly on orbit-point ranks),
// and evaluates CrD(f^k; D, D*) with D* the union of D with its two
// neighbours.  When the admissible (atom, k) count exceeds the budget,
// the cross-ratio is evaluated on a sampled subset: passages near
// critical points, a window at both ends, and a uniform stride;
// admissibility itself is always tested for every k.
inline CrdScanResult crd_return_map_max(PartitionSet& ps, int n, long budget = 4000000,
                                        std::vector<AtomCrdRow>* rows = nullptr) {
  const TrigProductMap& map = ps.map();
  const long b = map.bits();
  auto pn = ps.level(n);
  const long atom_count = static_cast<long>(pn->count());
  const long qn2 = ps.table().q_long(n + 2);
  const long k_cap = qn2 + 2;
  const std::size_t L = static_cast<std::size_t>(pn->q_n + pn->q_n1 + k_cap + 2);
  auto& orbit = ps.orbit(L);

  // Rank every orbit point once; all later containment tests are
  // integer arithmetic on ranks.
  std::vector<std::uint32_t> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
    return orbit.point(x).value < orbit.point(y).value;
  });
  std::vector<std::uint32_t> rank(L);
  for (std::size_t r = 0; r < L; ++r) rank[order[r]] = static_cast<std::uint32_t>(r);

  // Atom position of each rank (half-open convention; partition
  // endpoints are exactly the orbit indices below q_n + q_{n+1}).
  const std::uint32_t boundary_limit = static_cast<std::uint32_t>(atom_count);
  std::vector<std::uint32_t> atom_at_rank(L);
  {
    long current = -1;
    for (std::size_t r = 0; r < L; ++r) {
      const std::uint32_t m = order[r];
      if (m < boundary_limit) current = pn->position_of_left_index[m];
      // Ranks before the first boundary belong to the wrapping atom.
      atom_at_rank[r] = static_cast<std::uint32_t>(current < 0 ? atom_count - 1 : current);
    }
  }
  std::vector<std::uint32_t> right_rank(atom_count);  // rank of each atom's right endpoint
  for (long r = 0; r < atom_count; ++r)
    right_rank[r] = rank[pn->atoms[r].right_index];

  // Atoms within two positions of a critical point always get their
  // cross-ratio evaluated.
  std::vector<char> near_critical(atom_count, 0);
  for (std::size_t i = 0; i < map.num_critical(); ++i) {
    long p = pn->locate(map.critical_point(i));
    for (long w = -2; w <= 2; ++w) near_critical[((p + w) % atom_count + atom_count) % atom_count] = 1;
  }

  const auto cyc = [&](std::uint32_t from, std::uint32_t to) -> std::uint32_t {
    return to >= from ? to - from : static_cast<std::uint32_t>(L) - from + to;
  };

  CrdScanResult out;
  out.max_crd = Real::of_int(0, b);
  out.atoms = atom_count;

  // Estimate the admissible pair count to decide on striding.
  const double est = 0.5 * static_cast<double>(pn->q_n1) * static_cast<double>(pn->q_n1) +
                     static_cast<double>(pn->q_n) * static_cast<double>(qn2);
  out.strided = est > static_cast<double>(budget);
  const long end_window = out.strided ? 32 : k_cap;

  for (long pos = 0; pos < atom_count; ++pos) {
    const PartitionAtom& atom = pn->atoms[pos];
    const PartitionAtom& prev = pn->at_position(pos - 1);
    const PartitionAtom& next = pn->at_position(pos + 1);
    const long e0 = prev.left_index, e1 = atom.left_index, e2 = atom.right_index,
               e3 = next.right_index;
    const Real cr0 = cross_ratio_lengths(prev.length, atom.length, next.length);

    // First pass: admissibility walk (integer only).
    long kmax = 0;
    for (long k = 1; k <= k_cap; ++k) {
      const std::uint32_t ra = rank[e1 + k], rb = rank[e2 + k];
      const std::uint32_t host = atom_at_rank[ra];
      if (cyc(ra, rb) > cyc(ra, right_rank[host])) break;
      kmax = k;
    }
    if (kmax == k_cap) out.k_capped = true;
    out.admissible_pairs += kmax;
    out.max_k = std::max(out.max_k, kmax);

    const long stride = out.strided ? std::max(2L, kmax / 48) : 1;
    const auto sampled = [&](long k) {
      if (!out.strided) return true;
      if (k <= end_window || k > kmax - end_window) return true;
      if (k % stride == 0) return true;
      return near_critical[atom_at_rank[rank[e1 + k]]] != 0;
    };

    Real atom_max = Real::of_int(0, b);
    for (long k = 1; k <= kmax; ++k) {
      if (!sampled(k)) continue;
      const CirclePoint& p0 = orbit.point(e0 + k);
      Real l = forward_gap(p0, orbit.point(e1 + k));
      Real m = forward_gap(orbit.point(e1 + k), orbit.point(e2 + k));
      Real r = forward_gap(orbit.point(e2 + k), orbit.point(e3 + k));
      Real crd_k = cross_ratio_lengths(l, m, r) / cr0;
      atom_max = max(atom_max, crd_k);
      ++out.evaluated_pairs;
    }
    out.max_crd = max(out.max_crd, atom_max);
    if (rows)
      rows->push_back({pos, atom.generation, atom.orbit_index, kmax, atom_max.to_double()});
  }
  return out;
}

}  // namespace circlelab
