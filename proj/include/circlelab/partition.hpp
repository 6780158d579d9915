#pragma once

// Dynamical partitions of a circle map whose combinatorics has been
// certified against a convergent table: the level-n partition based at x
// consists of the q_{n+1} forward images of I_n(x) and the q_n forward
// images of I_{n+1}(x), where I_k(x) is the closed arc between x and
// f^{q_k}(x) on the side of the next return.
//
// Atom endpoints are orbit points and are stored as orbit indices plus
// cached coordinates: adjacency and tiling are checked combinatorially
// on the indices, floating comparisons only order the endpoints and
// measure lengths.

#include "circlelab/continued_fraction.hpp"
#include "circlelab/trig_map.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace circlelab {

class TilingViolation : public std::runtime_error {
 public:
  explicit TilingViolation(const std::string& what) : std::runtime_error(what) {}
};

// Forward orbit of a base point, kept both on the lift and reduced.
class ReturnStructure {
 public:
  ReturnStructure(const TrigProductMap& map, CirclePoint base)
      : map_(&map), base_(std::move(base)) {
    lift_.push_back(base_.value);
    pts_.push_back(base_);
  }

  const CirclePoint& base() const { return base_; }
  std::size_t size() const { return pts_.size(); }
  const CirclePoint& point(std::size_t k) const { return pts_.at(k); }
  const Real& lift(std::size_t k) const { return lift_.at(k); }

  void extend(std::size_t count) {
    while (pts_.size() < count) {
      // Iterate the reduced point (not the lift) so rounding does not
      // accumulate in the integer part; track the lift separately.
      JetValue j = map_->eval_jet(pts_.back().value);
      Real step = j.f - pts_.back().value;
      lift_.push_back(lift_.back() + step);
      pts_.push_back(reduce_mod1(j.f));
    }
  }

  // Iterates k <= limit at which the orbit comes strictly closer to the
  // base than ever before; for certified combinatorics these are
  // exactly the return times q_1, q_2, ... (with q_0 = 1 first).
  std::vector<long> measured_closest_returns(std::size_t limit) {
    extend(limit + 1);
    std::vector<long> records;
    std::optional<Real> best;
    for (std::size_t k = 1; k <= limit; ++k) {
      Real d = circle_distance(base_, pts_[k]);
      if (!best || d < *best) {
        best = d;
        records.push_back(static_cast<long>(k));
      }
    }
    return records;
  }

 private:
  const TrigProductMap* map_;
  CirclePoint base_;
  std::vector<Real> lift_;
  std::vector<CirclePoint> pts_;
};

struct PartitionAtom {
  int generation;    // n or n+1
  long orbit_index;  // i in f^i(I_generation)
  long left_index, right_index;
  CirclePoint left;
  Real length;

  CircleInterval interval() const { return CircleInterval(left, length); }
};

struct DynamicalPartition {
  int level;
  long q_n, q_n1;  // q_level, q_{level+1}
  std::vector<PartitionAtom> atoms;  // sorted by left endpoint
  std::vector<long> position_of_left_index;  // orbit index -> sorted position

  std::size_t count() const { return atoms.size(); }

  const PartitionAtom& at_position(long r) const {
    const long m = static_cast<long>(atoms.size());
    return atoms[((r % m) + m) % m];
  }

  // Position of the atom whose half-open arc [left, next left) contains p.
  long locate(const CirclePoint& p) const {
    const auto& a = atoms;
    long lo = 0, hi = static_cast<long>(a.size());
    if (p.value < a[0].left.value) return static_cast<long>(a.size()) - 1;
    while (hi - lo > 1) {
      long mid = (lo + hi) / 2;
      if (a[mid].left.value <= p.value)
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  }
};

struct PartitionReport {
  bool count_ok = false;
  bool structure_ok = false;   // combinatorial adjacency of endpoint indices
  bool disjoint_ok = false;    // no measured overlap beyond tolerance
  bool measure_ok = false;     // lengths sum to 1 within tolerance
  Real max_gap = Real::of_int(0, 64);
  Real max_overlap = Real::of_int(0, 64);
  Real sum_defect = Real::of_int(0, 64);
  bool refinement_checked = false;
  bool refinement_ok = false;
  Real worst_refinement_overhang = Real::of_int(0, 64);

  bool ok() const {
    return count_ok && structure_ok && disjoint_ok && measure_ok &&
           (!refinement_checked || refinement_ok);
  }
};

inline PartitionReport validate_partition(const DynamicalPartition& p,
                                          const DynamicalPartition* coarser = nullptr) {
  PartitionReport rep;
  if (p.atoms.empty()) return rep;
  const long b = p.atoms[0].length.bits();
  const Real tol = Real::pow2(-(b - 32), b);
  rep.count_ok = static_cast<long>(p.atoms.size()) == p.q_n + p.q_n1;

  auto sorted = p.atoms;
  std::sort(sorted.begin(), sorted.end(), [](const PartitionAtom& x, const PartitionAtom& y) {
    return x.left.value < y.left.value;
  });

  rep.structure_ok = true;
  rep.max_gap = Real::of_int(0, b);
  rep.max_overlap = Real::of_int(0, b);
  Real total = Real::of_int(0, b);
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    const auto& cur = sorted[r];
    const auto& nxt = sorted[(r + 1) % sorted.size()];
    if (cur.right_index != nxt.left_index) rep.structure_ok = false;
    Real gap = forward_gap(reduce_mod1(cur.left.value + cur.length), nxt.left);
    // A defect is a gap or an overlap; distinguish by which wrap is shorter.
    Real wrap = Real::of_int(1, b) - gap;
    if (gap <= wrap)
      rep.max_gap = max(rep.max_gap, gap);
    else
      rep.max_overlap = max(rep.max_overlap, wrap);
    total += cur.length;
  }
  rep.sum_defect = abs(total - 1);
  rep.disjoint_ok = rep.max_overlap <= tol && rep.max_gap <= tol;
  rep.measure_ok = rep.sum_defect <= tol;

  if (coarser != nullptr) {
    rep.refinement_checked = true;
    rep.refinement_ok = true;
    rep.worst_refinement_overhang = Real::of_int(0, b);
    for (const auto& atom : p.atoms) {
      long r = coarser->locate(atom.left);
      const auto& host = coarser->at_position(r);
      Real off = forward_gap(host.left, atom.left);
      Real overhang = off + atom.length - host.length;
      if (overhang.sign() > 0) {
        rep.worst_refinement_overhang = max(rep.worst_refinement_overhang, overhang);
        if (overhang > tol) rep.refinement_ok = false;
      }
    }
  }
  return rep;
}

// Builds partitions of one map from one base point, sharing a single
// orbit across levels.  The table must certify the map's combinatorics
// at least to level n+2 for every level n requested.
class PartitionSet {
 public:
  PartitionSet(std::shared_ptr<const TrigProductMap> map, CirclePoint base, ConvergentTable table)
      : map_(std::move(map)), table_(std::move(table)), orbit_(*map_, std::move(base)) {}

  // Non-owning convenience: the map must outlive the set.
  PartitionSet(const TrigProductMap& map, CirclePoint base, ConvergentTable table)
      : PartitionSet(std::shared_ptr<const TrigProductMap>(&map, [](const TrigProductMap*) {}),
                     std::move(base), std::move(table)) {}

  const TrigProductMap& map() const { return *map_; }
  const ConvergentTable& table() const { return table_; }
  const CirclePoint& base() const { return orbit_.base(); }

  ReturnStructure& orbit(std::size_t min_len) {
    orbit_.extend(min_len);
    return orbit_;
  }

  // |I_k(base)| on the lift: |F^{q_k}(x) - x - p_k|.
  Real delta(int k) {
    const long qk = table_.q_long(k);
    orbit_.extend(qk + 1);
    return abs(orbit_.lift(qk) - orbit_.lift(0) - Real::of_integer(table_.p(k), map_->bits()));
  }

  std::shared_ptr<const DynamicalPartition> level(int n) {
    auto it = cache_.find(n);
    if (it != cache_.end()) return it->second;
    auto p = std::make_shared<DynamicalPartition>(build(n));
    cache_.emplace(n, p);
    return p;
  }

  // Arc of f^j(atom), read off the shared orbit.
  CircleInterval atom_image(const PartitionAtom& atom, long j) {
    orbit_.extend(static_cast<std::size_t>(std::max(atom.left_index, atom.right_index) + j + 1));
    const CirclePoint& l = orbit_.point(atom.left_index + j);
    const CirclePoint& r = orbit_.point(atom.right_index + j);
    return CircleInterval(l, forward_gap(l, r));
  }

  // |f^j(I_n)|.
  Real length_In_image(int n, long j) {
    const long qn = table_.q_long(n);
    orbit_.extend(j + qn + 1);
    if (n % 2 == 0) return forward_gap(orbit_.point(j), orbit_.point(j + qn));
    return forward_gap(orbit_.point(j + qn), orbit_.point(j));
  }

  // f^j(T_n) where T_n = I_{n+1} u I_n u f^{q_n}(I_n).
  CircleInterval tn_image(int n, long j) {
    const long qn = table_.q_long(n), qn1 = table_.q_long(n + 1);
    const long li = j + (n % 2 == 0 ? qn1 : 2 * qn);
    const long ri = j + (n % 2 == 0 ? 2 * qn : qn1);
    orbit_.extend(std::max(li, ri) + 1);
    const CirclePoint& l = orbit_.point(li);
    const CirclePoint& r = orbit_.point(ri);
    return CircleInterval(l, forward_gap(l, r));
  }

 private:
  DynamicalPartition build(int n) {
    if (static_cast<std::size_t>(n) + 1 > table_.max_level())
      throw std::invalid_argument("partition level beyond certified depth");
    DynamicalPartition p;
    p.level = n;
    p.q_n = table_.q_long(n);
    p.q_n1 = table_.q_long(n + 1);
    const long L = p.q_n + p.q_n1;
    orbit_.extend(L);

    p.atoms.reserve(L);
    for (long i = 0; i < p.q_n1; ++i) {
      long li = n % 2 == 0 ? i : i + p.q_n;
      long ri = n % 2 == 0 ? i + p.q_n : i;
      push_atom(p, n, i, li, ri);
    }
    for (long j = 0; j < p.q_n; ++j) {
      long li = n % 2 == 1 ? j : j + p.q_n1;
      long ri = n % 2 == 1 ? j + p.q_n1 : j;
      push_atom(p, n + 1, j, li, ri);
    }

    std::sort(p.atoms.begin(), p.atoms.end(),
              [](const PartitionAtom& a, const PartitionAtom& b) {
                return a.left.value < b.left.value;
              });
    p.position_of_left_index.assign(L, -1);
    for (std::size_t r = 0; r < p.atoms.size(); ++r)
      p.position_of_left_index[p.atoms[r].left_index] = static_cast<long>(r);

    for (std::size_t r = 0; r < p.atoms.size(); ++r) {
      const auto& cur = p.atoms[r];
      const auto& nxt = p.atoms[(r + 1) % p.atoms.size()];
      if (cur.right_index != nxt.left_index)
        throw TilingViolation(
            "partition endpoints do not interleave at level " + std::to_string(n) +
            " (tuning depth too small or precision loss)");
    }
    return p;
  }

  void push_atom(DynamicalPartition& p, int gen, long idx, long li, long ri) {
    const CirclePoint& l = orbit_.point(li);
    const CirclePoint& r = orbit_.point(ri);
    Real len = forward_gap(l, r);
    if (len.is_zero())
      throw TilingViolation("degenerate atom at level " + std::to_string(p.level));
    p.atoms.push_back({gen, idx, li, ri, l, std::move(len)});
  }

  std::shared_ptr<const TrigProductMap> map_;
  ConvergentTable table_;
  ReturnStructure orbit_;
  std::map<int, std::shared_ptr<const DynamicalPartition>> cache_;
};

struct BoundsRow {
  int level;
  Real B_n;                  // max ratio of adjacent atom lengths
  std::optional<Real> mu_n;  // max |D|/|D'|, D in P_{n+2} inside D' in P_n
  std::vector<Real> s_n;     // scaling ratio per critical point
};

// B_n over adjacent pairs of P_n; mu_n against P_{n+2} when requested.
inline BoundsRow bounds_row(PartitionSet& ps, int n, bool with_mu) {
  BoundsRow row{n, Real::of_int(1, ps.map().bits()), std::nullopt, {}};
  auto pn = ps.level(n);
  for (std::size_t r = 0; r < pn->atoms.size(); ++r) {
    const Real& a = pn->atoms[r].length;
    const Real& b = pn->atoms[(r + 1) % pn->atoms.size()].length;
    row.B_n = max(row.B_n, max(a / b, b / a));
  }
  if (with_mu) {
    auto fine = ps.level(n + 2);
    Real mu = Real::of_int(0, ps.map().bits());
    for (const auto& atom : fine->atoms) {
      const auto& host = pn->at_position(pn->locate(atom.left));
      mu = max(mu, atom.length / host.length);
    }
    row.mu_n = mu;
  }
  return row;
}

// Scaling ratios s_k = |I_{k+1}(base)|/|I_k(base)| for k = 0..n_max,
// computed from the lift returns of the given base.
inline std::vector<Real> scaling_ratios(PartitionSet& ps, int n_max) {
  std::vector<Real> s;
  s.reserve(n_max + 1);
  Real prev = ps.delta(0);
  for (int k = 1; k <= n_max + 1; ++k) {
    Real cur = ps.delta(k);
    s.push_back(cur / prev);
    prev = cur;
  }
  return s;
}

// Maximum number of intervals whose interiors cover a common circle
// point, computed by an endpoint sweep (adjacent atoms sharing an
// endpoint do not count as overlapping).
inline int multiplicity(const std::vector<CircleInterval>& intervals) {
  if (intervals.empty()) return 0;
  const long b = intervals[0].left.bits();
  struct Event {
    Real pos;
    int delta;
  };
  std::vector<Event> ev;
  ev.reserve(intervals.size() * 3);
  const auto add = [&](const Real& a, const Real& bp) {
    ev.push_back({a, +1});
    ev.push_back({bp, -1});
  };
  for (const auto& iv : intervals) {
    Real end = iv.left.value + iv.length;
    if (cmp(end, 1) >= 0) {  // wraps: split at 0
      add(iv.left.value, Real::of_int(1, b));
      add(Real::of_int(0, b), end - 1);
    } else {
      add(iv.left.value, end);
    }
  }
  std::sort(ev.begin(), ev.end(),
            [](const Event& x, const Event& y) { return x.pos < y.pos; });
  // Coverage is constant on the open segment after each event position;
  // record it once all events at that position are applied.  Segments
  // narrower than the rounding tolerance are slivers from endpoints
  // computed along different arithmetic routes, not real overlaps.
  const Real tol = Real::pow2(-(b - 32), b);
  int count = 0, best = 0;
  for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
    count += ev[i].delta;
    if (ev[i + 1].pos - ev[i].pos > tol) best = std::max(best, count);
  }
  return best;
}

// (|L_n^j|/|I_n^j|, |R_n^j|/|I_n^j|) with L_n = I_{n+1}, R_n = f^{q_n}(I_n).
inline std::pair<Real, Real> wing_spaces(PartitionSet& ps, int n, long j) {
  const long qn = ps.table().q_long(n), qn1 = ps.table().q_long(n + 1);
  if (j < 0 || j > qn1) throw std::invalid_argument("wing_spaces: j out of range [0, q_{n+1}]");
  auto& orbit = ps.orbit(static_cast<std::size_t>(j + std::max(2 * qn, qn1) + 1));
  const auto gap_between = [&](long a, long bi) {
    return forward_gap(orbit.point(a), orbit.point(bi));
  };
  Real In = n % 2 == 0 ? gap_between(j, j + qn) : gap_between(j + qn, j);
  Real Ln = n % 2 == 1 ? gap_between(j, j + qn1) : gap_between(j + qn1, j);
  Real Rn = n % 2 == 0 ? gap_between(j + qn, j + 2 * qn) : gap_between(j + 2 * qn, j + qn);
  return {Ln / In, Rn / In};
}

}  // namespace circlelab
