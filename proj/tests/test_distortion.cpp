#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace circlelab;
using testsupport::Rng;
using testsupport::golden_mean;
using testsupport::random_pair;

namespace {

// Shared fixture: the Arnold map tuned to the golden mean at 256 bits.
struct GoldenArnold {
  std::shared_ptr<TrigProductMap> map;
  ConvergentTable table;
  std::unique_ptr<PartitionSet> ps;

  GoldenArnold() : table(convergents(ContinuedFraction::golden(18))) {
    const long bits = 256;
    TrigProductMap family(MapSpec{{{reduce_mod1(Real::of(0.0, bits)), 3}}, Real::of(0.0, bits)});
    TuneResult r = tune(family, table, 14, 128);
    if (!r.converged) throw std::runtime_error("fixture: tuning failed");
    map = std::make_shared<TrigProductMap>(family.with_offset(r.a_star));
    ps = std::make_unique<PartitionSet>(map, default_base(map->spec()), table);
  }
};

GoldenArnold& golden_arnold() {
  static GoldenArnold fixture;
  return fixture;
}

// Synthetic hook: a Mobius transformation applied to the four interval
// endpoints preserves the cross-ratio exactly.
Real mobius_image_cross_ratio(const Real& alpha, const Real& beta, const Real& gamma,
                              const Real& delta, const Real& a, const Real& b, const Real& c,
                              const Real& d) {
  const auto phi = [&](const Real& x) { return (alpha * x + beta) / (gamma * x + delta); };
  Real A = phi(a), B = phi(b), C = phi(c), D = phi(d);
  return cross_ratio_lengths(B - A, C - B, D - C);
}

}  // namespace

TEST_CASE("cross ratio formula") {
  const long bits = 256;
  // |L| = |R| = 0.25, |M| = 0.5: (0.25*0.25)/(0.75*0.75) = 1/9
  Real cr = cross_ratio_lengths(Real::of(0.25, bits), Real::of(0.5, bits), Real::of(0.25, bits));
  CHECK(testsupport::close_rel(cr, Real::of_int(1, bits) / 9, 16));

  // wings shrinking to zero drive the value to zero
  Real tiny = Real::pow2(-60, bits);
  CHECK(cross_ratio_lengths(tiny, Real::of(0.5, bits), tiny).to_double() < 1e-30);

  // scale invariance
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    Real L = Real::of(rng.uniform(0.01, 1.0), bits);
    Real M = Real::of(rng.uniform(0.01, 1.0), bits);
    Real R = Real::of(rng.uniform(0.01, 1.0), bits);
    Real lam = Real::of(rng.uniform(0.1, 5.0), bits);
    CHECK(testsupport::close_rel(cross_ratio_lengths(L, M, R),
                                 cross_ratio_lengths(L * lam, M * lam, R * lam), 24));
  }

  // in (0,1) always
  CHECK(cross_ratio(random_pair(rng, bits)).to_double() > 0.0);
  CHECK(cross_ratio(random_pair(rng, bits)).to_double() < 1.0);
}

TEST_CASE("IntervalPair validates compact containment") {
  const long bits = 128;
  CircleInterval T(reduce_mod1(Real::of(0.1, bits)), Real::of(0.4, bits));
  CircleInterval M_bad(reduce_mod1(Real::of(0.1, bits)), Real::of(0.2, bits));  // touches left
  CHECK_THROWS_AS(IntervalPair(M_bad, T), std::invalid_argument);
  CircleInterval M_ok(reduce_mod1(Real::of(0.2, bits)), Real::of(0.2, bits));
  CHECK_NOTHROW(IntervalPair(M_ok, T));
}

TEST_CASE("Mobius maps have cross-ratio distortion one") {
  const long bits = 256;
  const Real tol = Real::pow2(-(bits - 40), bits);
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    Real a = Real::of(rng.uniform(0.0, 0.2), bits);
    Real b = a + Real::of(rng.uniform(0.01, 0.2), bits);
    Real c = b + Real::of(rng.uniform(0.01, 0.2), bits);
    Real d = c + Real::of(rng.uniform(0.01, 0.2), bits);
    Real alpha = Real::of(rng.uniform(0.5, 2.0), bits);
    Real beta = Real::of(rng.uniform(-1.0, 1.0), bits);
    Real gamma = Real::of(rng.uniform(-0.3, 0.3), bits);
    Real delta = Real::of(rng.uniform(1.5, 3.0), bits);
    Real cr0 = cross_ratio_lengths(b - a, c - b, d - c);
    Real cr1 = mobius_image_cross_ratio(alpha, beta, gamma, delta, a, b, c, d);
    CHECK(abs(cr1 / cr0 - 1) <= tol);
  }
}

TEST_CASE("rotations have cross-ratio distortion one at every iterate") {
  const long bits = 256;
  const Real tol = Real::pow2(-(bits - 40), bits);
  TrigProductMap rot(MapSpec::rotation(golden_mean(bits)));
  Rng rng(43);
  for (int i = 0; i < 100; ++i) {
    IntervalPair pair = random_pair(rng, bits);
    long j = rng.uniform_int(1, 200);
    CrdResult r = crd(rot, j, pair);
    CHECK(abs(r.direct - 1) <= tol);
    CHECK(abs(r.chain_product - 1) <= tol);
  }
}

TEST_CASE("chain-rule identity: direct CrD equals the step product") {
  const long bits = 256;
  const Real tol = Real::pow2(-(bits - 40), bits);
  auto& fx = golden_arnold();
  Rng rng(44);
  for (int i = 0; i < 60; ++i) {
    IntervalPair pair = random_pair(rng, bits);
    long j = rng.uniform_int(1, 200);
    CrdResult r = crd(*fx.map, j, pair);
    CHECK(abs(r.direct - r.chain_product) <= tol * max(Real::of_int(1, bits), abs(r.direct)));
  }
}

TEST_CASE("single application near a critical point stays below the explicit constants") {
  const long bits = 256;
  auto& fx = golden_arnold();
  const int d = 3;
  Real r_crit = fx.map->critical_radius(0);
  Rng rng(45);
  int tested = 0;
  for (int i = 0; i < 600 && tested < 200; ++i) {
    // random interval J inside the critical neighborhood (-r, r)
    double rr = r_crit.to_double();
    double lo = rng.uniform(-rr, rr * 0.8);
    double len = rng.uniform(rr * 0.01, (rr - lo) * 0.9);
    if (len <= 0) continue;
    ++tested;
    Real a = Real::of(lo, bits), length = Real::of(len, bits);
    // Df(x) |J| / |f(J)| <= 3d on a grid
    Real fa = fx.map->eval_lift(a), fb = fx.map->eval_lift(a + length);
    Real flen = fb - fa;
    CircleInterval J(reduce_mod1(a), length);
    for (const auto& x : chebyshev_grid(J, 16)) {
      Real df = fx.map->eval_jet(x.value).df;
      CHECK(df * length / flen <= Real::of_int(3 * d, bits));
    }
    // CrD(f; M, T) <= 9 d^2 for nested pairs inside the neighborhood
    if (len > rr * 0.05) {
      Real q1 = Real::of(0.3, bits), q2 = Real::of(0.4, bits);
      CircleInterval M(reduce_mod1(a + length * q1), length * q2);
      CrdResult res = crd(*fx.map, 1, IntervalPair(M, J));
      CHECK(res.direct <= Real::of_int(9 * d * d, bits));
    }
  }
  REQUIRE(tested >= 100);
}

TEST_CASE("cross-ratio inequality product in a smooth region") {
  const long bits = 256;
  auto& fx = golden_arnold();
  // pairs well away from the critical point at 0
  Rng rng(46);
  std::vector<IntervalPair> pairs;
  Real var_total = Real::of_int(0, bits);
  for (int i = 0; i < 12; ++i) {
    double left = rng.uniform(0.25, 0.68);
    CircleInterval T(reduce_mod1(Real::of(left, bits)), Real::of(0.05, bits));
    CircleInterval M(reduce_mod1(Real::of(left + 0.015, bits)), Real::of(0.02, bits));
    pairs.emplace_back(M, T);
    // grid estimate of Var(log Df) over T
    Real prev(bits);
    Real var = Real::of_int(0, bits);
    bool first = true;
    for (int k = 0; k <= 64; ++k) {
      Real x = T.left.value + T.length * k / 64;
      Real ld = log(fx.map->eval_jet(x).df);
      if (!first) var += abs(ld - prev);
      prev = ld;
      first = false;
    }
    var_total += var;
  }
  CriResult res = cri_product(*fx.map, pairs);
  CHECK(res.product <= exp(var_total * 2) * Real::of(1.000001, bits));
  CHECK(res.multiplicity >= 1);

  // single pair reduces to crd; rotation gives exactly one
  CriResult single = cri_product(*fx.map, {pairs[0]});
  CHECK(single.multiplicity == 1);
  CHECK(testsupport::close_rel(single.product, crd(*fx.map, 1, pairs[0]).direct, 24));

  TrigProductMap rot(MapSpec::rotation(golden_mean(bits)));
  CriResult rres = cri_product(rot, pairs);
  CHECK(abs(rres.product - 1) <= Real::pow2(-(bits - 40), bits));
}

TEST_CASE("schwarzian_iterate: single step, rotations, composition rule") {
  const long bits = 256;
  auto& fx = golden_arnold();
  const Real tol = Real::pow2(-(bits - 48), bits);

  CirclePoint x = reduce_mod1(Real::of(0.21, bits));
  SchwarzianSplit s1 = schwarzian_iterate(*fx.map, 1, x);
  CHECK(testsupport::close_rel(s1.total, fx.map->schwarzian(x.value), 40));

  TrigProductMap rot(MapSpec::rotation(golden_mean(bits)));
  for (long j : {1L, 7L, 40L}) CHECK(schwarzian_iterate(rot, j, x).total.is_zero());

  // composition: S f^{j+j'}(x) = S f^{j'}(f^j x) (Df^j x)^2 + S f^j(x)
  Rng rng(47);
  for (int i = 0; i < 20; ++i) {
    CirclePoint y = reduce_mod1(Real::of(rng.uniform(0.05, 0.95), bits));
    long j = rng.uniform_int(1, 30), j2 = rng.uniform_int(1, 30);
    Real lhs = schwarzian_iterate(*fx.map, j + j2, y).total;
    Real dfj = fx.map->derivative_along_orbit(y, j).products[j];
    CirclePoint fy = fx.map->iterate(y, j);
    Real rhs = schwarzian_iterate(*fx.map, j2, fy).total * dfj * dfj +
               schwarzian_iterate(*fx.map, j, y).total;
    CHECK(abs(lhs - rhs) <= tol * max(Real::of_int(1, bits), abs(lhs)));
  }

  // the near-critical / far split accounts for everything
  SchwarzianSplit sp = schwarzian_iterate(*fx.map, 55, x);
  CHECK(testsupport::close_rel(sp.total, sp.near_critical + sp.remainder, 40));
  CHECK(sp.near_terms > 0);
}

TEST_CASE("negative Schwarzian of return maps: tuned Arnold map") {
  auto& fx = golden_arnold();
  for (int n : {8, 9}) {
    NegativeSchwarzianReport rep = verify_negative_schwarzian(*fx.ps, n, 24);
    CHECK(!rep.zero_family);
    CHECK(rep.all_negative_In);
    CHECK(rep.all_negative_In1);
    CHECK(rep.worst.sign() < 0);
  }
}

TEST_CASE("negative Schwarzian report flags the zero-Schwarzian family") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet ps(rot, reduce_mod1(Real::of(0.0, bits)), convergents(expand(g, 14)));
  NegativeSchwarzianReport rep = verify_negative_schwarzian(ps, 6, 8);
  CHECK(rep.zero_family);
  CHECK(!rep.all_negative_In);
}

TEST_CASE("contraction: CrD < 1 on verified negative-Schwarzian diffeo blocks") {
  const long bits = 256;
  auto& fx = golden_arnold();
  Rng rng(48);
  int tested = 0;
  std::vector<std::pair<int, std::pair<long, long>>> blocks;
  for (int n = 7; n <= 11; ++n) {
    std::vector<long> times = critical_times(*fx.ps, n);
    for (std::size_t t = 0; t + 1 < times.size(); ++t)
      blocks.push_back({n, {times[t], times[t + 1]}});
  }
  REQUIRE(!blocks.empty());
  for (const auto& [n, jj] : blocks) {
    if (tested >= 120) break;
    const long j1 = jj.first, j2 = jj.second;
    const long len = j2 - j1 - 1;
    if (len < 1) continue;
    CircleInterval dom = fx.ps->tn_image(n, j1 + 1);
    // verify the composite Schwarzian is negative on a grid of dom
    bool negative = true;
    for (const auto& x : chebyshev_grid(dom, 16)) {
      try {
        if (schwarzian_iterate(*fx.map, len, x).total.sign() >= 0) negative = false;
      } catch (const std::domain_error&) {
        negative = false;
      }
    }
    if (!negative) continue;
    for (int i = 0; i < 40; ++i) {
      double o1 = rng.uniform(0.02, 0.1), o3 = rng.uniform(0.75, 0.95);
      double m1 = rng.uniform(0.3, 0.5), mlen = rng.uniform(0.05, 0.15);
      CircleInterval T(reduce_mod1(dom.left.value + dom.length * Real::of(o1, bits)),
                       dom.length * Real::of(o3 - o1, bits));
      CircleInterval M(reduce_mod1(dom.left.value + dom.length * Real::of(m1, bits)),
                       dom.length * Real::of(mlen, bits));
      try {
        IntervalPair pair(M, T);
        CrdResult r = crd(*fx.map, len, pair);
        CHECK(r.direct < Real::of_int(1, bits));
        ++tested;
      } catch (const std::invalid_argument&) {
      }
    }
  }
  REQUIRE(tested >= 60);
}

TEST_CASE("C1 bounds: rotation gives exactly one, Arnold stays bounded") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet rps(rot, reduce_mod1(Real::of(0.0, bits)), convergents(expand(g, 14)));
  C1Report rrep = c1_bound_constant(rps, 6, 12);
  CHECK(testsupport::close_rel(rrep.K_n, Real::of_int(1, bits), 40));
  CHECK(testsupport::close_rel(rrep.c1_norm, Real::of_int(1, bits), 40));

  auto& fx = golden_arnold();
  for (int n : {6, 7, 8, 9}) {
    C1Report rep = c1_bound_constant(*fx.ps, n, 16);
    CHECK(rep.K_n.to_double() >= 1.0);
    CHECK(rep.K_n.to_double() < 100.0);
  }
}

TEST_CASE("Koebe check: explicit bound shape and rotation sanity") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  CircleInterval T(reduce_mod1(Real::of(0.1, bits)), Real::of(0.3, bits));
  CircleInterval M(reduce_mod1(Real::of(0.2, bits)), Real::of(0.1, bits));
  KoebeResult kr = koebe_check(rot, 3, T, M, Real::of_int(1, bits) / 2, Real::of_int(1, bits),
                               Real::of_int(0, bits), 8);
  REQUIRE(kr.preconditions_ok);
  CHECK(testsupport::close_rel(kr.measured, Real::of_int(1, bits), 40));
  CHECK(kr.within_bound);

  // tau = 1, ell -> 0 drives the bound to (1 + 1/1)^2 = 4
  KoebeResult kr2 = koebe_check(rot, 1, T, M, Real::of_int(1, bits), Real::of(0.5, bits),
                                Real::of_int(0, bits), 8);
  if (kr2.preconditions_ok) CHECK(kr2.bound >= Real::of_int(4, bits));
}

TEST_CASE("Koebe check on a diffeomorphic branch of the tuned Arnold map") {
  const long bits = 256;
  auto& fx = golden_arnold();
  KoebeFit fit = fit_koebe_c0(*fx.ps, 6, 8, 12);
  CHECK(fit.branches > 0);
  // check one branch between consecutive critical times at level 9
  std::vector<long> times = critical_times(*fx.ps, 9);
  REQUIRE(times.size() >= 2);
  bool checked = false;
  for (std::size_t t = 0; t + 1 < times.size() && !checked; ++t) {
    const long j1 = times[t], j2 = times[t + 1];
    const long len = j2 - j1 - 1;
    if (len < 1) continue;
    CircleInterval T = fx.ps->tn_image(9, j1 + 1);
    const long qn = fx.ps->table().q_long(9);
    auto& orb = fx.ps->orbit(static_cast<std::size_t>(j1 + 1 + qn + 1));
    const CirclePoint& il = orb.point(j1 + 1 + qn);  // level 9 odd: left is the q_n image
    const CirclePoint& ir = orb.point(j1 + 1);
    CircleInterval In(il, forward_gap(il, ir));
    Real off = forward_gap(T.left, In.left);
    if (off.sign() <= 0 || off + In.length >= T.length) continue;
    KoebeResult kr = koebe_check(*fx.map, len, T, In, Real::of(0.05, bits),
                                 Real::of_int(3, bits), fit.c0, 12);
    if (!kr.preconditions_ok) continue;
    CHECK(kr.within_bound);
    checked = true;
  }
  CHECK(checked);
}

TEST_CASE("Koebe check reports violated hypotheses instead of failing") {
  const long bits = 256;
  auto& fx = golden_arnold();
  // T containing the critical point: branch not diffeomorphic
  CircleInterval T(reduce_mod1(Real::of(0.9, bits)), Real::of(0.2, bits));
  CircleInterval M(reduce_mod1(Real::of(0.95, bits)), Real::of(0.05, bits));
  KoebeResult kr = koebe_check(*fx.map, 2, T, M, Real::of(0.1, bits), Real::of_int(1, bits),
                               Real::of_int(0, bits), 8);
  CHECK(!kr.preconditions_ok);
  CHECK(!kr.note.empty());
}

TEST_CASE("decomposition of return maps") {
  const long bits = 256;
  SECTION("rotation: one diffeomorphic block with distortion 1") {
    Real g = golden_mean(bits);
    TrigProductMap rot(MapSpec::rotation(g));
    PartitionSet ps(rot, reduce_mod1(Real::of(0.0, bits)), convergents(expand(g, 14)));
    auto pn = ps.level(8);
    long pos = pn->position_of_left_index[0];  // level 8 even: I_8 starts at the base
    long k = ps.table().q_long(9) - 1;
    DecompositionTrace trace = decompose(ps, 8, pos, k, Real::of(0.5, bits), 2, 8);
    CHECK(trace.diffeo_count == 1);
    CHECK(trace.critical_count == 0);
    CHECK(trace.counts_within_bounds);
    REQUIRE(trace.blocks.size() == 1);
    REQUIRE(trace.blocks[0].distortion.has_value());
    CHECK(testsupport::close_rel(*trace.blocks[0].distortion, Real::of_int(1, bits), 40));
  }
  SECTION("tuned Arnold at deep levels: counts within 3N+1 and 3N") {
    auto& fx = golden_arnold();
    for (int n : {9, 10}) {
      auto pn = fx.ps->level(n);
      long pos = pn->position_of_left_index[n % 2 == 0 ? 0 : fx.ps->table().q_long(n)];
      long k = fx.ps->table().q_long(n + 1) - 1;
      DecompositionTrace trace = decompose(*fx.ps, n, pos, k, Real::of(0.5, bits), n - 6, 8);
      CHECK(trace.diffeo_count <= 4);    // 3N + 1 with N = 1
      CHECK(trace.critical_count <= 3);  // 3N
      CHECK(trace.counts_within_bounds);
      CHECK(trace.blocks.size() >= 2);
    }
  }
  SECTION("a single step through the critical point is one CriticalStep") {
    auto& fx = golden_arnold();
    const int n = 8;
    auto pn = fx.ps->level(n);
    long pos = pn->position_of_left_index[0];
    DecompositionTrace trace = decompose(*fx.ps, n, pos, 1, Real::of(0.5, bits), 2, 8);
    REQUIRE(trace.blocks.size() == 1);
    CHECK(trace.blocks[0].kind == DecompositionBlock::Kind::CriticalStep);
    CHECK(trace.critical_count == 1);
  }
}

TEST_CASE("return-map cross-ratio distortion scan") {
  const long bits = 256;
  SECTION("rotations have unit distortion") {
    Real g = golden_mean(bits);
    TrigProductMap rot(MapSpec::rotation(g));
    PartitionSet ps(rot, reduce_mod1(Real::of(0.0, bits)), convergents(expand(g, 14)));
    for (int n : {4, 6, 8}) {
      CrdScanResult scan = crd_return_map_max(ps, n);
      CHECK(!scan.strided);
      CHECK(std::abs(scan.max_crd.to_double() - 1.0) < 1e-30);
      CHECK(scan.admissible_pairs > 0);
    }
  }
  SECTION("tuned Arnold stays far below the explicit ceiling") {
    auto& fx = golden_arnold();
    // (1.5)^8 (9 d^2)^3 = 3^20 / 256 for N = 1, d = 3
    Real ceiling = crd_ceiling(*fx.map);
    CHECK(std::abs(ceiling.to_double() - 13620251.56640625) < 1e-6);
    for (int n : {6, 8, 10}) {
      CrdScanResult scan = crd_return_map_max(*fx.ps, n);
      CHECK(scan.max_crd < ceiling);
      CHECK(scan.max_crd.to_double() < 100.0);
      CHECK(scan.max_crd.to_double() >= 1.0);
    }
  }
  SECTION("striding is reported and consistent with full enumeration") {
    auto& fx = golden_arnold();
    CrdScanResult full = crd_return_map_max(*fx.ps, 8, 1L << 40);
    CrdScanResult strided = crd_return_map_max(*fx.ps, 8, 10);
    CHECK(!full.strided);
    CHECK(strided.strided);
    CHECK(strided.evaluated_pairs < full.evaluated_pairs);
    // the strided maximum is attained on the sampled subset
    CHECK(strided.max_crd <= full.max_crd);
    CHECK(strided.max_crd.to_double() > 0.5 * full.max_crd.to_double());
  }
}
