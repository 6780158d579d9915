#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace circlelab;
using testsupport::Rng;
using testsupport::golden_mean;
using testsupport::silver_mean;

namespace {

PartitionSet rotation_set(const TrigProductMap& map, const Real& rho, int depth) {
  return PartitionSet(map, reduce_mod1(Real::of(0.0, rho.bits())),
                      convergents(expand(rho, depth)));
}

}  // namespace

TEST_CASE("dynamical partition equals the arithmetic oracle for rotations") {
  const long bits = 256;
  const Real tol = Real::pow2(-(bits - 32), bits);
  std::vector<Real> rhos{golden_mean(bits), silver_mean(bits),
                         ContinuedFraction::periodic({}, {BigInt(1), BigInt(2)}, 20).value_real(bits)};
  for (const Real& rho : rhos) {
    TrigProductMap rot(MapSpec::rotation(rho));
    PartitionSet ps = rotation_set(rot, rho, 14);
    for (int n = 0; n <= 8; ++n) {
      auto dyn = ps.level(n);
      auto oracle = rotation_partition_oracle(rho, n);
      REQUIRE(dyn->count() == oracle.size());
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(dyn->atoms[i].generation == oracle[i].generation);
        CHECK(circle_distance(dyn->atoms[i].left, oracle[i].interval.left) <= tol);
        CHECK(abs(dyn->atoms[i].length - oracle[i].interval.length) <= tol);
      }
    }
  }
}

TEST_CASE("atom count is q_{n+1} + q_n") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet ps = rotation_set(rot, g, 16);
  ConvergentTable t = convergents(expand(g, 16));
  for (int n = 0; n <= 12; ++n)
    CHECK(static_cast<long>(ps.level(n)->count()) == t.q_long(n + 1) + t.q_long(n));
}

TEST_CASE("partition validation passes for rotations and measures fault injection") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet ps = rotation_set(rot, g, 16);
  auto p = ps.level(6);
  PartitionReport rep = validate_partition(*p);
  CHECK(rep.ok());
  CHECK(rep.count_ok);
  CHECK(rep.structure_ok);
  CHECK(rep.sum_defect <= Real::pow2(-(bits - 32), bits));

  // shift one atom by 1e-3: an overlap defect of about 1e-3 must be
  // reported (and the measure balance breaks)
  DynamicalPartition broken = *p;
  broken.atoms[3].left = reduce_mod1(broken.atoms[3].left.value + Real::of(1e-3, bits));
  PartitionReport rep2 = validate_partition(&broken == p.get() ? *p : broken);
  CHECK(!rep2.ok());
  CHECK(std::abs(max(rep2.max_overlap, rep2.max_gap).to_double() - 1e-3) < 1e-4);
}

TEST_CASE("measured closest returns equal the return times") {
  const long bits = 256;
  SECTION("rigid rotation") {
    Real g = golden_mean(bits);
    TrigProductMap rot(MapSpec::rotation(g));
    ReturnStructure orbit(rot, reduce_mod1(Real::of(0.0, bits)));
    auto records = orbit.measured_closest_returns(200);
    ConvergentTable t = convergents(expand(g, 14));
    // records = strictly improving returns: the q_n without duplicates
    std::vector<long> expect;
    for (std::size_t n = 0; t.q_long(n) <= 200; ++n)
      if (expect.empty() || t.q_long(n) > expect.back()) expect.push_back(t.q_long(n));
    CHECK(records == expect);
  }
  SECTION("tuned Arnold map") {
    TrigProductMap family(MapSpec{{{reduce_mod1(Real::of(0.0, bits)), 3}}, Real::of(0.0, bits)});
    ConvergentTable t = convergents(ContinuedFraction::golden(16));
    TuneResult r = tune(family, t, 12, 96);
    REQUIRE(r.converged);
    TrigProductMap tuned = family.with_offset(r.a_star);
    ReturnStructure orbit(tuned, reduce_mod1(Real::of(0.0, bits)));
    auto records = orbit.measured_closest_returns(t.q_long(10));
    std::vector<long> expect;
    for (std::size_t n = 0; n <= 10; ++n)
      if (expect.empty() || t.q_long(n) > expect.back()) expect.push_back(t.q_long(n));
    CHECK(records == expect);
  }
}

TEST_CASE("tuned Arnold partitions validate to level 10") {
  const long bits = 320;
  TrigProductMap family(MapSpec{{{reduce_mod1(Real::of(0.0, bits)), 3}}, Real::of(0.0, bits)});
  ConvergentTable t = convergents(ContinuedFraction::golden(16));
  TuneResult r = tune(family, t, 12, 160);
  REQUIRE(r.converged);
  auto map = std::make_shared<TrigProductMap>(family.with_offset(r.a_star));
  PartitionSet ps(map, default_base(map->spec()), t);
  for (int n = 2; n <= 10; ++n) {
    auto p = ps.level(n);
    PartitionReport rep = validate_partition(*p, n >= 4 ? ps.level(n - 2).get() : nullptr);
    CHECK(rep.ok());
  }
}

TEST_CASE("golden rotation bounds: B_n = 1/g and s_n = g") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet ps = rotation_set(rot, g, 18);
  // oracle: |q_n g - p_n| = g^{n+1}, so adjacent atoms have ratio 1/g
  // and scaling ratios are exactly g
  for (int n = 2; n <= 12; ++n) {
    BoundsRow row = bounds_row(ps, n, n + 2 <= 14);
    CHECK(std::abs(row.B_n.to_double() - 1.0 / g.to_double()) < 1e-10);
    if (row.mu_n) {
      // mu = |I_{n+2}-atom| / |I_n-atom| worst case = g^2 ratio of
      // lengths of generation pairs: max is g^2 / ... check in (0,1)
      CHECK(row.mu_n->to_double() < 1.0);
      CHECK(row.mu_n->to_double() > 0.0);
    }
  }
  std::vector<Real> s = scaling_ratios(ps, 12);
  for (int n = 0; n <= 12; ++n) CHECK(std::abs(s[n].to_double() - g.to_double()) < 1e-12);
}

TEST_CASE("silver rotation bounds are larger than golden's") {
  const long bits = 256;
  Real s = silver_mean(bits);
  TrigProductMap rot(MapSpec::rotation(s));
  PartitionSet ps = rotation_set(rot, s, 16);
  Real g = golden_mean(bits);
  for (int n = 3; n <= 10; ++n) {
    BoundsRow row = bounds_row(ps, n, false);
    CHECK(row.B_n.to_double() > 1.0 / g.to_double());
    CHECK(row.B_n.to_double() < 4.0);  // bounded (a_n = 2 forces longer towers)
  }
}

TEST_CASE("multiplicity: disjoint atoms, duplicated interval, T_n family") {
  const long bits = 256;
  Real g = golden_mean(bits);

  auto atoms = rotation_partition_oracle(g, 5);
  std::vector<CircleInterval> ivs;
  for (const auto& a : atoms) ivs.push_back(a.interval);
  CHECK(multiplicity(ivs) == 1);

  std::vector<CircleInterval> dup{ivs[0], ivs[0]};
  CHECK(multiplicity(dup) == 2);

  // {T_n, f(T_n), ..., f^{q_{n+1}-1}(T_n)} for the rigid rotation:
  // multiplicity at most 3 (exactly 3 once wings overlap)
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet ps = rotation_set(rot, g, 16);
  for (int n = 3; n <= 8; ++n) {
    std::vector<CircleInterval> fam;
    const long qn1 = ps.table().q_long(n + 1);
    for (long j = 0; j < qn1; ++j) fam.push_back(ps.tn_image(n, j));
    int m = multiplicity(fam);
    CHECK(m <= 3);
    CHECK(m >= 2);
  }
}

TEST_CASE("wing spaces are bounded below") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet ps = rotation_set(rot, g, 16);
  for (int n = 2; n <= 8; ++n) {
    const long qn1 = ps.table().q_long(n + 1);
    double min_ratio = 1e9;
    for (long j : {0L, qn1 / 2, qn1}) {
      auto [l, r] = wing_spaces(ps, n, j);
      min_ratio = std::min({min_ratio, l.to_double(), r.to_double()});
    }
    CHECK(min_ratio > 0.05);
  }
  CHECK_THROWS_AS(wing_spaces(ps, 4, ps.table().q_long(5) + 1), std::invalid_argument);
}

TEST_CASE("building beyond the certified depth is rejected") {
  const long bits = 256;
  Real g = golden_mean(bits);
  TrigProductMap rot(MapSpec::rotation(g));
  PartitionSet ps = rotation_set(rot, g, 6);
  CHECK_THROWS_AS(ps.level(6), std::invalid_argument);
}

TEST_CASE("partition build detects broken combinatorics") {
  // an offset far from the target's consistency window violates the
  // endpoint interleaving at some level
  const long bits = 256;
  TrigProductMap rot(MapSpec::rotation(Real::of(0.51, bits)));
  ConvergentTable t = convergents(ContinuedFraction::golden(16));
  PartitionSet ps(rot, reduce_mod1(Real::of(0.0, bits)), t);
  bool threw = false;
  try {
    for (int n = 0; n <= 10; ++n) ps.level(n);
  } catch (const TilingViolation&) {
    threw = true;
  }
  CHECK(threw);
}
