#pragma once

// Batch experiment runner: tunes a suite of map families to a target
// rotation number, builds their partitions, and measures real bounds,
// return-map cross-ratio distortion against the explicit ceiling,
// scaling ratios, C1 constants, Schwarzian negativity, decomposition
// counts, and quasi-symmetric distortion of conjugacies between pairs.
// Reports are written as CSV tables, a JSON summary with per-assertion
// pass/fail, and SVG charts; identical configuration and precision
// produce byte-identical files.

#include "circlelab/distortion.hpp"
#include "circlelab/map_io.hpp"
#include "circlelab/partition.hpp"
#include "circlelab/svg.hpp"
#include "circlelab/toml_lite.hpp"
#include "circlelab/tuning.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace circlelab {

inline long auto_bits(int deepest_level) {
  return std::max(256L, 64L + 24L * deepest_level);
}

struct MapEntry {
  std::string id;
  std::vector<std::pair<std::string, int>> critical_points;  // (c as numeral, d)

  MapSpec spec(long bits) const {
    std::vector<CriticalPointSpec> cps;
    cps.reserve(critical_points.size());
    for (const auto& [c, d] : critical_points)
      cps.push_back({reduce_mod1(Real::parse(c, bits)), d});
    return MapSpec{std::move(cps), Real::of_int(0, bits)};
  }
};

struct ExperimentConfig {
  std::vector<MapEntry> maps;
  std::string target = "golden";  // golden | silver | cf:[a0,a1,...]
  int level_lo = 4, level_hi = 12;
  long bits = 0;  // 0: auto_bits(level_hi)
  int grid_schwarz = 64;
  int grid_dist = 32;
  int jobs = 0;  // 0: hardware concurrency
  long crd_budget = 4000000;
  // Extra certification depth beyond level_hi + 2.  Deep-level geometry
  // varies across the consistency window of the certified depth, so
  // experiments comparing different maps level by level (spread, qs)
  // need a margin for the deepest levels to stabilize; the drift decays
  // geometrically in it.  Per-map measurements do not need one.
  int tune_margin = 0;
  std::string outdir = "out";

  long effective_bits() const { return bits > 0 ? bits : auto_bits(level_hi); }
  int tuning_depth() const { return level_hi + 2 + tune_margin; }
};

inline ContinuedFraction target_cf(const std::string& name, std::size_t depth) {
  if (name == "golden") return ContinuedFraction::golden(depth);
  if (name == "silver") return ContinuedFraction::silver(depth);
  if (name.rfind("cf:", 0) == 0) {
    std::vector<BigInt> cycle;
    std::string body = name.substr(3);
    std::string num;
    for (char ch : body) {
      if (std::isdigit(static_cast<unsigned char>(ch))) {
        num += ch;
      } else if (!num.empty()) {
        cycle.emplace_back(num);
        num.clear();
      }
    }
    if (!num.empty()) cycle.emplace_back(num);
    if (cycle.empty()) throw std::invalid_argument("empty cf target: " + name);
    return ContinuedFraction::periodic({}, cycle, depth);
  }
  throw std::invalid_argument("unknown target: " + name);
}

// The suite the stock experiments run on: three cubic maps at distinct
// critical positions, one bicritical map, one quintic map.
inline std::vector<MapEntry> default_map_suite() {
  return {
      {"cubic_c0", {{"0", 3}}},
      {"cubic_c03", {{"0.3", 3}}},
      {"cubic_c07", {{"0.7", 3}}},
      {"bicritical", {{"0", 3}, {"0.5", 3}}},
      {"quintic", {{"0", 5}}},
  };
}

struct TunedMap {
  std::string id;
  std::shared_ptr<const TrigProductMap> map;
  std::optional<TuneResult> tuned;
  ConvergentTable table;
  std::unique_ptr<PartitionSet> main;                        // based at c_0 (or 0)
  std::vector<std::unique_ptr<PartitionSet>> per_critical;   // based at each c_i
  bool ok = false;
  std::string note;
};

inline void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Tunes every map of the config to the target combinatorics; failures
// are recorded per map, not fatal.
inline std::vector<TunedMap> tune_suite(const ExperimentConfig& cfg) {
  const long bits = cfg.effective_bits();
  const int depth = cfg.tuning_depth();
  const ConvergentTable table = convergents(target_cf(cfg.target, depth + 4));
  const long resolution = bits - 96;

  std::vector<TunedMap> suite(cfg.maps.size());
  parallel_for(cfg.jobs, cfg.maps.size(), [&](std::size_t i) {
    TunedMap& tm = suite[i];
    tm.id = cfg.maps[i].id;
    tm.table = table;
    try {
      TrigProductMap family(cfg.maps[i].spec(bits));
      TuneResult r = tune(family, table, depth, resolution);
      tm.tuned = r;
      if (!r.converged) {
        tm.note = "tuning failed: " + r.note;
        return;
      }
      tm.map = std::make_shared<TrigProductMap>(family.with_offset(r.a_star));
      tm.main = std::make_unique<PartitionSet>(tm.map, default_base(tm.map->spec()), table);
      for (std::size_t c = 0; c < tm.map->num_critical(); ++c)
        tm.per_critical.push_back(
            std::make_unique<PartitionSet>(tm.map, tm.map->critical_point(c), table));
      tm.ok = true;
    } catch (const std::exception& e) {
      tm.note = std::string("tuning failed: ") + e.what();
    }
  });
  return suite;
}

// (1.5)^{2(3N+1)} (9 d^2)^{3N}: the explicit return-map CrD ceiling.
inline Real crd_ceiling(const TrigProductMap& map) {
  const long b = map.bits();
  const long N = static_cast<long>(map.num_critical());
  const long d = std::max(map.max_criticality(), 1);
  Real c = pow_int(Real::of(1.5, b), 2 * (3 * N + 1));
  return c * pow_int(Real::of_int(9 * d * d, b), 3 * N);
}

struct Assertion {
  std::string name;
  bool pass;
  std::string detail;
};

struct MapLevelRow {
  std::string map_id;
  int level = 0;
  std::optional<Real> B_n, mu_n;
  std::vector<Real> s_n;
  std::optional<Real> crd_max, crd_ceiling_value;
  std::optional<Real> K_n, c1_norm;
  std::optional<bool> schwarz_negative;
  std::optional<long> diffeo_blocks, critical_steps;
  std::optional<int> multiplicity_T;
};

struct QsRow {
  std::string pair_id;
  int level;
  Real sigma_max;
};

struct BoundsReport {
  std::vector<MapLevelRow> rows;
  std::vector<QsRow> qs_rows;
  std::vector<std::pair<int, double>> spread;  // per level, from B_n across maps
  std::vector<Assertion> assertions;
  std::vector<std::string> notes;
  bool hard_failure = false;

  MapLevelRow& row(const std::string& id, int level) {
    for (auto& r : rows)
      if (r.map_id == id && r.level == level) return r;
    rows.push_back({});
    rows.back().map_id = id;
    rows.back().level = level;
    return rows.back();
  }
};

namespace detail {

inline void fill_bounds_rows(BoundsReport& rep, TunedMap& tm, int lo, int hi) {
  std::vector<std::vector<Real>> s_per_cp;
  for (auto& pcs : tm.per_critical) s_per_cp.push_back(scaling_ratios(*pcs, hi));
  if (tm.per_critical.empty()) s_per_cp.push_back(scaling_ratios(*tm.main, hi));
  for (int n = lo; n <= hi; ++n) {
    const bool with_mu = n + 2 <= hi;
    BoundsRow br = bounds_row(*tm.main, n, with_mu);
    MapLevelRow& row = rep.row(tm.id, n);
    row.B_n = br.B_n;
    row.mu_n = br.mu_n;
    for (const auto& s : s_per_cp) row.s_n.push_back(s[n]);
  }
}

inline void compute_spread(BoundsReport& rep, const std::vector<TunedMap>& suite, int lo, int hi) {
  rep.spread.clear();
  for (int n = lo; n <= hi; ++n) {
    double bmax = 0, bmin = 0;
    bool first = true;
    for (const auto& tm : suite) {
      if (!tm.ok) continue;
      for (const auto& r : rep.rows)
        if (r.map_id == tm.id && r.level == n && r.B_n) {
          double v = r.B_n->to_double();
          if (first) {
            bmax = bmin = v;
            first = false;
          } else {
            bmax = std::max(bmax, v);
            bmin = std::min(bmin, v);
          }
        }
    }
    if (!first && bmin > 0) rep.spread.emplace_back(n, bmax / bmin);
  }
}

}  // namespace detail

// Real/beau bounds experiment: B_n, mu_n, s_n per map and level, and the
// cross-map spread of B_n; asserts the spread trend is non-increasing
// over the deepest five levels (5% slack).
inline BoundsReport run_beau(const ExperimentConfig& cfg, std::vector<TunedMap>& suite) {
  if (cfg.maps.size() < 2) throw std::invalid_argument("run_beau: at least two maps required");
  // Theorem-A style comparison needs the same N and multiset of criticalities.
  auto signature = [](const MapEntry& e) {
    std::vector<int> ds;
    for (const auto& [c, d] : e.critical_points) ds.push_back(d);
    std::sort(ds.begin(), ds.end());
    return ds;
  };
  for (std::size_t i = 1; i < cfg.maps.size(); ++i)
    if (signature(cfg.maps[i]) != signature(cfg.maps[0]))
      throw std::invalid_argument("run_beau: maps must share N and criticalities");

  BoundsReport rep;
  parallel_for(cfg.jobs, suite.size(), [&](std::size_t i) {
    if (!suite[i].ok) return;
    BoundsReport local;
    detail::fill_bounds_rows(local, suite[i], cfg.level_lo, cfg.level_hi);
    static std::mutex mu;
    std::lock_guard<std::mutex> lk(mu);
    for (auto& r : local.rows) rep.rows.push_back(std::move(r));
  });
  std::sort(rep.rows.begin(), rep.rows.end(), [&](const MapLevelRow& a, const MapLevelRow& b) {
    if (a.map_id != b.map_id) return a.map_id < b.map_id;
    return a.level < b.level;
  });
  for (const auto& tm : suite)
    if (!tm.ok) rep.notes.push_back("map " + tm.id + " skipped: " + tm.note);
  detail::compute_spread(rep, suite, cfg.level_lo, cfg.level_hi);

  bool trend_ok = true;
  std::string detail_str;
  const int window_lo = std::max(cfg.level_lo, cfg.level_hi - 4);
  for (std::size_t i = 0; i + 1 < rep.spread.size(); ++i) {
    auto [n, s] = rep.spread[i];
    auto [n2, s2] = rep.spread[i + 1];
    if (n >= window_lo && n2 <= cfg.level_hi && s2 > s * 1.05) trend_ok = false;
  }
  for (const auto& [n, s] : rep.spread)
    if (n >= window_lo) detail_str += "n=" + std::to_string(n) + ":" + std::to_string(s) + " ";
  rep.assertions.push_back({"beau_spread_non_increasing_last5", trend_ok, detail_str});
  return rep;
}

// Return-map CrD against the explicit ceiling; a ceiling violation is a
// hard failure of the experiment.
inline BoundsReport run_crd_universal(const ExperimentConfig& cfg, std::vector<TunedMap>& suite) {
  BoundsReport rep;
  std::mutex mu;
  parallel_for(cfg.jobs, suite.size(), [&](std::size_t i) {
    TunedMap& tm = suite[i];
    if (!tm.ok) return;
    Real ceiling = crd_ceiling(*tm.map);
    std::vector<std::pair<int, CrdScanResult>> results;
    for (int n = cfg.level_lo; n <= cfg.level_hi; ++n)
      results.emplace_back(n, crd_return_map_max(*tm.main, n, cfg.crd_budget));
    std::lock_guard<std::mutex> lk(mu);
    for (auto& [n, scan] : results) {
      MapLevelRow& row = rep.row(tm.id, n);
      row.crd_max = scan.max_crd;
      row.crd_ceiling_value = ceiling;
      if (scan.max_crd > ceiling) {
        rep.hard_failure = true;
        rep.assertions.push_back({"crd_ceiling_" + tm.id + "_n" + std::to_string(n), false,
                                  "measured " + scan.max_crd.str_plain(12) + " above ceiling"});
      }
      if (scan.strided)
        rep.notes.push_back("crd scan strided for " + tm.id + " at n=" + std::to_string(n) +
                            " (" + std::to_string(scan.evaluated_pairs) + " of " +
                            std::to_string(scan.admissible_pairs) + " pairs evaluated)");
    }
  });
  std::sort(rep.rows.begin(), rep.rows.end(), [&](const MapLevelRow& a, const MapLevelRow& b) {
    if (a.map_id != b.map_id) return a.map_id < b.map_id;
    return a.level < b.level;
  });
  for (const auto& tm : suite) {
    if (!tm.ok) {
      rep.notes.push_back("map " + tm.id + " skipped: " + tm.note);
      continue;
    }
    bool all_below = true;
    for (const auto& r : rep.rows)
      if (r.map_id == tm.id && r.crd_max && r.crd_ceiling_value && *r.crd_max > *r.crd_ceiling_value)
        all_below = false;
    rep.assertions.push_back({"crd_ceiling_" + tm.id, all_below,
                              "ceiling " + crd_ceiling(*tm.map).str_plain(12)});
  }
  return rep;
}

// Scaling ratios around every critical point; asserts finiteness over
// the window and reports the successive-difference trend.
inline BoundsReport run_scaling(const ExperimentConfig& cfg, std::vector<TunedMap>& suite) {
  BoundsReport rep;
  for (auto& tm : suite) {
    if (!tm.ok) {
      rep.notes.push_back("map " + tm.id + " skipped: " + tm.note);
      continue;
    }
    std::vector<std::vector<Real>> s_per_cp;
    for (auto& pcs : tm.per_critical) s_per_cp.push_back(scaling_ratios(*pcs, cfg.level_hi));
    if (tm.per_critical.empty()) s_per_cp.push_back(scaling_ratios(*tm.main, cfg.level_hi));
    bool finite = true;
    double worst_step = 0;
    for (int n = cfg.level_lo; n <= cfg.level_hi; ++n) {
      MapLevelRow& row = rep.row(tm.id, n);
      for (const auto& s : s_per_cp) {
        row.s_n.push_back(s[n]);
        if (!s[n].is_finite() || s[n].sign() <= 0) finite = false;
        if (n > cfg.level_lo)
          worst_step = std::max(worst_step, std::abs((s[n] - s[n - 1]).to_double()));
      }
    }
    rep.assertions.push_back({"scaling_bounded_" + tm.id, finite,
                              "max |s_{n+1}-s_n| = " + std::to_string(worst_step)});
  }
  return rep;
}

struct ConjugacyEstimate {
  std::string pair_id;
  int level;
  Real sigma_max;
  long points = 0;
};

// Conjugacy h between two maps with identical certified combinatorics,
// realized exactly on the orbits of the base critical points and
// extended by monotone piecewise-affine interpolation.  Everything is
// computed in coordinates anchored at the two base points (the orbits
// agree as circular orders, not as linear ones).  Sigma is probed at
// every orbit point at the local atom scale and three halvings; the
// two-sided ratio is normalized by the offsets actually realized in
// rounded arithmetic, so the identity conjugacy scores exactly 1.
inline ConjugacyEstimate run_qs(TunedMap& f, TunedMap& g, int level) {
  if (!f.ok || !g.ok) throw std::invalid_argument("run_qs: both maps must be tuned");
  const long b = f.map->bits();
  const long K = f.table.q_long(level) + f.table.q_long(level + 1);
  if (g.table.q_long(level) + g.table.q_long(level + 1) != K)
    throw std::invalid_argument("run_qs: combinatorics mismatch between f and g");
  auto& of = f.main->orbit(static_cast<std::size_t>(K));
  auto& og = g.main->orbit(static_cast<std::size_t>(K));
  const CirclePoint base_f = of.base();
  const CirclePoint base_g = og.base();

  // anchored coordinates: position of each orbit point measured from
  // the base, so index 0 maps to 0 on both sides
  std::vector<Real> uf, vg;
  uf.reserve(K);
  vg.reserve(K);
  for (long m = 0; m < K; ++m) {
    uf.push_back(forward_gap(base_f, of.point(m)));
    vg.push_back(forward_gap(base_g, og.point(m)));
  }
  std::vector<std::uint32_t> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t x, std::uint32_t y) { return uf[x] < uf[y]; });
  for (std::size_t r = 0; r + 1 < order.size(); ++r)
    if (!(vg[order[r]] < vg[order[r + 1]]))
      throw std::runtime_error("run_qs: orbit orders of f and g disagree");

  std::vector<Real> xf, xg;
  xf.reserve(K);
  xg.reserve(K);
  for (auto m : order) {
    xf.push_back(uf[m]);
    xg.push_back(vg[m]);
  }
  bool identity_grid = true;
  for (long m = 0; m < K && identity_grid; ++m)
    if (xf[m] != xg[m]) identity_grid = false;

  const auto gap = [&](const std::vector<Real>& v, std::size_t r) {
    const std::size_t s = (r + 1) % v.size();
    return fractional(v[s] - v[r]);
  };

  // h in anchored coordinates: affine on each cell of the u-grid.
  const auto h = [&](const Real& u) {
    Real ur = fractional(u);
    if (identity_grid) return ur;
    std::size_t lo = 0, hi = xf.size();
    if (ur < xf[0]) {
      lo = xf.size() - 1;
    } else {
      while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (xf[mid] <= ur)
          lo = mid;
        else
          hi = mid;
      }
    }
    Real off = fractional(ur - xf[lo]);
    return fractional(xg[lo] + off * gap(xg, lo) / gap(xf, lo));
  };

  const auto fgap = [&](const Real& a, const Real& c) { return fractional(c - a); };

  ConjugacyEstimate est{f.id + ":" + g.id, level, Real::of_int(1, b), K};
  for (std::size_t r = 0; r < xf.size(); ++r) {
    const std::size_t prev = (r + xf.size() - 1) % xf.size();
    Real scale = min(gap(xf, prev), gap(xf, r));
    const Real& u = xf[r];
    Real hu = h(u);
    for (int m = 0; m <= 3; ++m) {
      Real t = scale;
      for (int halvings = 0; halvings < m; ++halvings) t = t / 2;
      Real up = fractional(u + t), um = fractional(u - t);
      Real t_plus = fgap(u, up), t_minus = fgap(um, u);
      Real d_plus = fgap(hu, h(up)), d_minus = fgap(h(um), hu);
      if (t_plus.is_zero() || t_minus.is_zero() || d_plus.is_zero() || d_minus.is_zero())
        continue;
      Real ratio = (d_plus / t_plus) / (d_minus / t_minus);
      est.sigma_max = max(est.sigma_max, max(ratio, Real::of_int(1, b) / ratio));
    }
  }
  return est;
}

inline void write_csv_real(std::ostream& os, const std::optional<Real>& v) {
  if (v) os << v->str_plain(24);
}

inline void emit_report(const BoundsReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::size_t max_cp = 1;
  for (const auto& r : rep.rows) max_cp = std::max(max_cp, r.s_n.size());

  {
    std::ofstream os(dir + "/bounds.csv");
    os << "map_id,n,B_n,mu_n";
    for (std::size_t c = 0; c < max_cp; ++c) os << ",s_n_c" << c;
    os << "\n";
    for (const auto& r : rep.rows) {
      os << r.map_id << ',' << r.level << ',';
      write_csv_real(os, r.B_n);
      os << ',';
      write_csv_real(os, r.mu_n);
      for (std::size_t c = 0; c < max_cp; ++c) {
        os << ',';
        if (c < r.s_n.size()) os << r.s_n[c].str_plain(24);
      }
      os << '\n';
    }
  }
  {
    std::ofstream os(dir + "/crd.csv");
    os << "map_id,n,crd_max,ceiling\n";
    for (const auto& r : rep.rows) {
      if (!r.crd_max) continue;
      os << r.map_id << ',' << r.level << ',';
      write_csv_real(os, r.crd_max);
      os << ',';
      write_csv_real(os, r.crd_ceiling_value);
      os << '\n';
    }
  }
  {
    std::ofstream os(dir + "/qs.csv");
    os << "pair_id,level,sigma_max\n";
    for (const auto& r : rep.qs_rows)
      os << r.pair_id << ',' << r.level << ',' << r.sigma_max.str_plain(24) << '\n';
  }
  {
    nlohmann::ordered_json j;
    j["rows"] = rep.rows.size();
    j["qs_rows"] = rep.qs_rows.size();
    j["hard_failure"] = rep.hard_failure;
    auto& asserts = j["assertions"] = nlohmann::ordered_json::array();
    for (const auto& a : rep.assertions)
      asserts.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    auto& spread = j["spread"] = nlohmann::ordered_json::array();
    for (const auto& [n, s] : rep.spread) spread.push_back({{"n", n}, {"spread", s}});
    j["notes"] = rep.notes;
    std::ofstream os(dir + "/summary.json");
    os << j.dump(2) << '\n';
  }

  // charts
  {
    svg::LineChart chart("real bounds", "level n", "B_n");
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const auto& r : rep.rows)
      if (r.B_n) series[r.map_id].emplace_back(r.level, r.B_n->to_double());
    for (auto& [id, pts] : series) chart.add_series(id, pts);
    if (!rep.spread.empty()) {
      std::vector<std::pair<double, double>> sp;
      for (const auto& [n, s] : rep.spread) sp.emplace_back(n, s);
      chart.add_series("spread", sp);
    }
    std::ofstream os(dir + "/bounds.svg");
    chart.write(os);
  }
  {
    svg::LineChart chart("return-map cross-ratio distortion", "level n", "max CrD");
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const auto& r : rep.rows)
      if (r.crd_max) series[r.map_id].emplace_back(r.level, r.crd_max->to_double());
    for (auto& [id, pts] : series) chart.add_series(id, pts);
    std::ofstream os(dir + "/crd.svg");
    chart.write(os);
  }
  {
    svg::LineChart chart("quasi-symmetric distortion", "level", "sigma_max");
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const auto& r : rep.qs_rows)
      series[r.pair_id].emplace_back(r.level, r.sigma_max.to_double());
    for (auto& [id, pts] : series) chart.add_series(id, pts);
    std::ofstream os(dir + "/qs.svg");
    chart.write(os);
  }
}

inline void merge_reports(BoundsReport& into, BoundsReport&& from) {
  for (auto& r : from.rows) {
    MapLevelRow& dst = into.row(r.map_id, r.level);
    if (r.B_n) dst.B_n = r.B_n;
    if (r.mu_n) dst.mu_n = r.mu_n;
    if (!r.s_n.empty()) dst.s_n = r.s_n;
    if (r.crd_max) dst.crd_max = r.crd_max;
    if (r.crd_ceiling_value) dst.crd_ceiling_value = r.crd_ceiling_value;
    if (r.K_n) dst.K_n = r.K_n;
    if (r.c1_norm) dst.c1_norm = r.c1_norm;
    if (r.schwarz_negative) dst.schwarz_negative = r.schwarz_negative;
    if (r.diffeo_blocks) dst.diffeo_blocks = r.diffeo_blocks;
    if (r.critical_steps) dst.critical_steps = r.critical_steps;
    if (r.multiplicity_T) dst.multiplicity_T = r.multiplicity_T;
  }
  for (auto& q : from.qs_rows) into.qs_rows.push_back(std::move(q));
  for (auto& a : from.assertions) into.assertions.push_back(std::move(a));
  for (auto& n : from.notes) into.notes.push_back(std::move(n));
  if (!from.spread.empty()) into.spread = std::move(from.spread);
  into.hard_failure = into.hard_failure || from.hard_failure;
}

inline ExperimentConfig config_from_toml(const toml::Value& t) {
  ExperimentConfig cfg;
  if (t.has("target")) cfg.target = t.at("target").as_string();
  if (t.has("levels")) {
    const auto& arr = t.at("levels").as_array();
    if (arr.size() != 2) throw std::invalid_argument("levels must be [lo, hi]");
    cfg.level_lo = static_cast<int>(arr[0].as_int());
    cfg.level_hi = static_cast<int>(arr[1].as_int());
  }
  if (t.has("bits")) cfg.bits = t.at("bits").as_int();
  if (t.has("grid_schwarz")) cfg.grid_schwarz = static_cast<int>(t.at("grid_schwarz").as_int());
  if (t.has("grid_dist")) cfg.grid_dist = static_cast<int>(t.at("grid_dist").as_int());
  if (t.has("jobs")) cfg.jobs = static_cast<int>(t.at("jobs").as_int());
  if (t.has("crd_budget")) cfg.crd_budget = t.at("crd_budget").as_int();
  if (t.has("tune_margin")) cfg.tune_margin = static_cast<int>(t.at("tune_margin").as_int());
  if (t.has("outdir")) cfg.outdir = t.at("outdir").as_string();
  if (t.has("maps")) {
    for (const auto& m : t.at("maps").as_array()) {
      MapEntry e;
      e.id = m.at("id").as_string();
      if (m.has("critical_points"))
        for (const auto& cp : m.at("critical_points").as_array()) {
          const auto& cv = cp.at("c");
          std::string cs = cv.kind == toml::Value::Kind::String
                               ? cv.as_string()
                               : std::to_string(cv.as_float());
          e.critical_points.emplace_back(cs, static_cast<int>(cp.at("d").as_int()));
        }
      cfg.maps.push_back(std::move(e));
    }
  }
  if (cfg.maps.empty()) cfg.maps = default_map_suite();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_toml(toml::parse(ss.str()));
}

// Runs every experiment over one tuned suite: bounds and spread (when
// the maps are beau-comparable), return-map CrD, scaling ratios, C1
// constants, Schwarzian negativity, decomposition counts, intersection
// multiplicity of the T_n family, and quasi-symmetric distortion of
// same-N pairs.
inline BoundsReport run_full_report(const ExperimentConfig& cfg, std::vector<TunedMap>& suite) {
  BoundsReport rep;
  try {
    merge_reports(rep, run_beau(cfg, suite));
  } catch (const std::invalid_argument& e) {
    // maps not beau-comparable: still fill per-map bounds rows
    for (auto& tm : suite)
      if (tm.ok) detail::fill_bounds_rows(rep, tm, cfg.level_lo, cfg.level_hi);
    rep.notes.push_back(std::string("beau spread skipped: ") + e.what());
  }
  merge_reports(rep, run_crd_universal(cfg, suite));
  merge_reports(rep, run_scaling(cfg, suite));

  for (auto& tm : suite) {
    if (!tm.ok) continue;
    // C1 bounds and negative Schwarzian over the deepest levels; grids
    // shrink for very long returns (recorded).
    const int extras_lo = std::max(cfg.level_lo, cfg.level_hi - 4);
    for (int n = extras_lo; n <= cfg.level_hi; ++n) {
      int grid = cfg.grid_schwarz;
      if (tm.table.q_long(n + 1) > 20000) {
        grid = 8;
        rep.notes.push_back("schwarzian grid reduced to 8 for " + tm.id + " at n=" +
                            std::to_string(n));
      }
      MapLevelRow& row = rep.row(tm.id, n);
      C1Report c1 = c1_bound_constant(*tm.main, n, cfg.grid_dist);
      row.K_n = c1.K_n;
      row.c1_norm = c1.c1_norm;
      NegativeSchwarzianReport neg = verify_negative_schwarzian(*tm.main, n, grid);
      row.schwarz_negative = neg.zero_family ? false : (neg.all_negative_In && neg.all_negative_In1);
      if (neg.zero_family)
        rep.notes.push_back("zero-Schwarzian family: negativity vacuous for " + tm.id);
      // decomposition of the return f^{q_{n+1}-1} on I_n*
      if (tm.map->num_critical() > 0 && n >= 4) {
        auto pn = tm.main->level(n);
        long pos = pn->position_of_left_index[n % 2 == 0 ? 0 : tm.table.q_long(n)];
        long k = tm.table.q_long(n + 1) - 1;
        if (k >= 1) {
          DecompositionTrace trace =
              decompose(*tm.main, n, pos, k, Real::of(0.5, tm.map->bits()), std::max(1, n - 6), 8);
          row.diffeo_blocks = trace.diffeo_count;
          row.critical_steps = trace.critical_count;
        }
      }
    }
    // multiplicity of {f^j(T_n)}, j < q_{n+1}, at the deepest level <= 10
    const int mn = std::min(cfg.level_hi, 10);
    if (mn >= cfg.level_lo) {
      std::vector<CircleInterval> fam;
      const long qn1 = tm.table.q_long(mn + 1);
      fam.reserve(qn1);
      for (long j = 0; j < qn1; ++j) fam.push_back(tm.main->tn_image(mn, j));
      rep.row(tm.id, mn).multiplicity_T = multiplicity(fam);
      rep.assertions.push_back({"multiplicity_le_3_" + tm.id, multiplicity(fam) <= 3,
                                "T_" + std::to_string(mn) + " family"});
    }
  }

  // quasi-symmetric distortion for same-N pairs (first few)
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < suite.size() && pairs.size() < 4; ++i)
    for (std::size_t j = i + 1; j < suite.size() && pairs.size() < 4; ++j)
      if (suite[i].ok && suite[j].ok &&
          suite[i].map->num_critical() == suite[j].map->num_critical())
        pairs.emplace_back(i, j);
  for (auto [i, j] : pairs)
    for (int level = std::max(cfg.level_lo, cfg.level_hi - 3); level + 1 <= cfg.level_hi; ++level) {
      ConjugacyEstimate est = run_qs(suite[i], suite[j], level);
      rep.qs_rows.push_back({est.pair_id, est.level, est.sigma_max});
    }
  return rep;
}

}  // namespace circlelab
