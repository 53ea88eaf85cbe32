#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ergoshadow/errors.hpp"
#include "ergoshadow/measure_metrics.hpp"
#include "ergoshadow/orbit_engine.hpp"

using namespace ergoshadow;

namespace {

// All (i, j) / D on the D-grid with (A^n - I)(i, j) = 0 mod D, D = |det(A^n - I)|.
std::set<std::pair<std::int64_t, std::int64_t>> lattice_oracle(const TorusBase& base, int n, std::int64_t& D) {
  const auto p = base.power(n);
  const std::int64_t m00 = p[0][0] - 1, m01 = p[0][1], m10 = p[1][0], m11 = p[1][1] - 1;
  D = std::llabs(m00 * m11 - m01 * m10);
  std::set<std::pair<std::int64_t, std::int64_t>> out;
  for (std::int64_t i = 0; i < D; ++i) {
    for (std::int64_t j = 0; j < D; ++j) {
      if ((m00 * i + m01 * j) % D == 0 && (m10 * i + m11 * j) % D == 0) out.insert({i, j});
    }
  }
  return out;
}

}  // namespace

TEST(BasePeriodic, TorusMatchesLatticeOracle) {
  const TorusBase base;
  for (int n = 1; n <= 6; ++n) {
    std::int64_t D = 0;
    const auto oracle = lattice_oracle(base, n, D);
    const auto pts = enumerate_base_periodic(base, n);
    EXPECT_EQ(static_cast<std::int64_t>(pts.size()), std::llabs(base.power(n)[0][0] + base.power(n)[1][1] - 2));
    std::set<std::pair<std::int64_t, std::int64_t>> got;
    for (const auto& p : pts) {
      // rescale to the oracle grid
      ASSERT_EQ(D % p.denominator, 0);
      got.insert({p.i * (D / p.denominator), p.j * (D / p.denominator)});
      EXPECT_GT(p.denominator, 0);
    }
    EXPECT_EQ(got, oracle) << "n=" << n;
  }
}

TEST(BasePeriodic, SmallCases) {
  const TorusBase base;
  const auto one = enumerate_base_periodic(base, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].i, 0);
  EXPECT_EQ(one[0].j, 0);
  EXPECT_EQ(enumerate_base_periodic(base, 2).size(), 5u);
  const ShiftBase full;
  EXPECT_EQ(enumerate_base_periodic(full, 2, false).size(), 4u);
  EXPECT_EQ(enumerate_base_periodic(full, 2, true).size(), 3u);  // 00, 01, 11
  EXPECT_THROW(enumerate_base_periodic(base, 0), PreconditionError);
}

TEST(BasePeriodic, BudgetExceeded) {
  EXPECT_THROW(enumerate_base_periodic(TorusBase(), 8, 100), BudgetExceeded);
}

TEST(FiberFixedPoints, IdentityIsDegenerate) {
  const auto res = find_fiber_fixed_points(std::vector<CircleFiberMap>{CircleFiberMap(0.0, 0.0)});
  EXPECT_TRUE(res.degenerate);
}

TEST(FiberFixedPoints, ClosedFormSolution) {
  const auto res = find_fiber_fixed_points(std::vector<CircleFiberMap>{CircleFiberMap(0.0, 0.5)});
  ASSERT_EQ(res.points.size(), 2u);
  EXPECT_NEAR(res.points[0].t, 0.0, 1e-12);
  EXPECT_EQ(res.points[0].stability, Stability::repelling);
  EXPECT_NEAR(res.points[0].log_multiplier, std::log(1.5), 1e-12);
  EXPECT_NEAR(res.points[1].t, 0.5, 1e-12);
  EXPECT_EQ(res.points[1].stability, Stability::attracting);
  EXPECT_NEAR(res.points[1].log_multiplier, std::log(0.5), 1e-12);
}

TEST(FiberFixedPoints, DisplacementBoundedAwayFromZero) {
  // displacement 0.5 + (0.1 / 2pi) sin(2 pi t) never vanishes mod 1
  const auto res = find_fiber_fixed_points(std::vector<CircleFiberMap>{CircleFiberMap(0.5, 0.1)});
  EXPECT_TRUE(res.points.empty());
  EXPECT_FALSE(res.degenerate);
}

TEST(FiberFixedPoints, GridDoublingFindsNothingNew) {
  const auto sys = default_symbolic_system();
  for (const char* w : {"01", "0011", "00111", "0001111"}) {
    Word word;
    for (const char* c = w; *c; ++c) word.push_back(static_cast<std::uint8_t>(*c - '0'));
    FixedPointOptions coarse;
    FixedPointOptions fine;
    fine.grid = coarse.grid * 2;
    const auto a = find_fiber_fixed_points(sys, BaseCycle{word}, coarse);
    const auto b = find_fiber_fixed_points(sys, BaseCycle{word}, fine);
    ASSERT_EQ(a.points.size(), b.points.size()) << w;
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_NEAR(a.points[i].t, b.points[i].t, 1e-11);
  }
}

TEST(PeriodicOrbits, RotationFibreHasZeroExponent) {
  const auto sys = SkewProductSystem::torus(TorusBase(), 0.0, 0.0, Modulation::cos_x1);
  const auto orbits = periodic_orbits(sys, 1);
  ASSERT_EQ(orbits.size(), 1u);
  EXPECT_EQ(orbits[0].lambda_c, 0.0);
  EXPECT_EQ(orbits[0].stability, Stability::neutral);
  EXPECT_EQ(classify_exponent(orbits[0].lambda_c, 1e-3), IndexClass::nonhyperbolic);
}

TEST(PeriodicOrbits, SymbolicSigns) {
  const auto sys = default_symbolic_system();
  const auto o0 = make_periodic_orbit(sys, BaseCycle{Word{0}}, 0.0);
  EXPECT_LT(o0.lambda_c, 0.0);
  EXPECT_EQ(o0.stability, Stability::attracting);
  const auto o1 = make_periodic_orbit(sys, BaseCycle{Word{1}}, 0.0);
  EXPECT_GT(o1.lambda_c, 0.0);
  EXPECT_EQ(o1.stability, Stability::repelling);
}

TEST(PeriodicOrbits, ReiterationAndBirkhoffProperty) {
  for (const auto& sys : {default_torus_system(), default_symbolic_system()}) {
    for (int n = 1; n <= 4; ++n) {
      for (const auto& o : periodic_orbits(sys, n)) {
        EXPECT_LT(reiteration_residual(sys, o), 1e-10);
        double s = 0.0;
        for (std::int64_t i = 0; i < o.period(); ++i) s += center_log_derivative(sys, o.point(i));
        EXPECT_NEAR(o.lambda_c, s / static_cast<double>(o.period()), 1e-12);
      }
    }
  }
}

TEST(PeriodicOrbits, DedupByMinimalRotation) {
  const auto sys = default_symbolic_system();
  std::set<std::string> seen;
  for (const auto& o : periodic_orbits(sys, 4)) {
    EXPECT_EQ(o.word(), minimal_rotation(o.word()));
    EXPECT_TRUE(is_primitive(o.word()));
    seen.insert(o.itinerary_string() + "@" + std::to_string(o.t_star()));
  }
  EXPECT_FALSE(seen.empty());
  EXPECT_EQ(minimal_rotation(Word{1, 0, 0, 1}), (Word{0, 0, 1, 1}));
  EXPECT_FALSE(is_primitive(Word{0, 1, 0, 1}));
}

TEST(EmpiricalMeasure, AtomsAndWeights) {
  const auto sys = default_torus_system();
  const auto fixed = periodic_orbits(sys, 1);
  ASSERT_FALSE(fixed.empty());
  const auto m1 = empirical_measure(fixed.front());
  ASSERT_EQ(m1.size(), 1u);
  EXPECT_DOUBLE_EQ(m1.atoms()[0].weight, 1.0);
  const auto two = periodic_orbits(sys, 2);
  ASSERT_FALSE(two.empty());
  const auto m2 = empirical_measure(two.front());
  ASSERT_EQ(m2.size(), 2u);
  EXPECT_DOUBLE_EQ(m2.atoms()[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(m2.atoms()[1].weight, 0.5);
}

TEST(EmpiricalMeasure, SegmentIntegralIsArithmeticMean) {
  const auto sys = default_torus_system();
  const auto seg = make_segment(sys, torus_point(0.123, 0.456, 0.789), 10);
  const auto mu = empirical_measure(seg);
  ASSERT_EQ(mu.size(), 10u);
  const auto family = TestFunctionFamily::torus();
  for (std::size_t g = 1; g <= 30; ++g) {
    double mean = 0.0;
    for (const auto& p : seg.points) mean += family.evaluate(g, p);
    EXPECT_NEAR(integrate(family, g, mu), mean / 10.0, 1e-14);
  }
  for (std::int64_t i = 0; i < seg.length(); ++i) {
    EXPECT_EQ(seg.log_derivs[static_cast<std::size_t>(i)], center_log_derivative(sys, seg.points[static_cast<std::size_t>(i)]));
  }
}
