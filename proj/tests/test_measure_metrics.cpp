#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <tuple>

#include "ergoshadow/errors.hpp"
#include "ergoshadow/measure_metrics.hpp"

using namespace ergoshadow;

namespace {

// Torus test functions listed independently: sort all admissible k by
// (|k|_inf, k1, k2, k3), each contributing cos then sin.
std::vector<std::array<int, 3>> oracle_frequencies() {
  std::vector<std::tuple<int, int, int, int>> ks;
  for (int a = -6; a <= 6; ++a) {
    for (int b = -6; b <= 6; ++b) {
      for (int c = -6; c <= 6; ++c) {
        if (a < 0 || (a == 0 && b < 0) || (a == 0 && b == 0 && c <= 0)) continue;
        ks.emplace_back(std::max({std::abs(a), std::abs(b), std::abs(c)}), a, b, c);
      }
    }
  }
  std::sort(ks.begin(), ks.end());
  std::vector<std::array<int, 3>> out;
  for (const auto& [r, a, b, c] : ks) out.push_back({a, b, c});
  return out;
}

double oracle_torus_value(std::size_t index, double x1, double x2, double t) {
  static const auto ks = oracle_frequencies();
  const auto& k = ks[(index - 1) / 2];
  const double phase = kTwoPi * (k[0] * x1 + k[1] * x2 + k[2] * t);
  return (index - 1) % 2 == 0 ? std::cos(phase) : std::sin(phase);
}

EmpiricalMeasure atoms_at(const std::vector<std::array<double, 4>>& pts) {
  std::vector<Atom> atoms;
  for (const auto& p : pts) atoms.push_back({torus_point(p[0], p[1], p[2]), p[3]});
  return EmpiricalMeasure(std::move(atoms));
}

EmpiricalMeasure random_measure(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::array<double, 4>> pts;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    pts.push_back({u(rng), u(rng), u(rng), u(rng) + 0.1});
    total += pts.back()[3];
  }
  for (auto& p : pts) p[3] /= total;
  return atoms_at(pts);
}

}  // namespace

TEST(TestFunctions, TorusOrderingMatchesDocumentedRule) {
  const auto family = TestFunctionFamily::torus();
  EXPECT_EQ(family.size(), 2196u);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 1; i <= family.size(); i += 7) {
    const double x1 = u(rng), x2 = u(rng), t = u(rng);
    EXPECT_NEAR(family.evaluate(i, torus_point(x1, x2, t)), oracle_torus_value(i, x1, x2, t), 1e-12) << i;
  }
}

TEST(Integrate, Examples) {
  const auto family = TestFunctionFamily::torus();
  // g_1 = cos(2 pi t): k = (0, 0, 1) leads the list
  const auto k1 = family.at(1);
  ASSERT_EQ(k1.k, (std::array<int, 3>{0, 0, 1}));
  EXPECT_DOUBLE_EQ(integrate(family, 1, atoms_at({{0.0, 0.0, 0.0, 1.0}})), 1.0);
  EXPECT_NEAR(integrate(family, 1, atoms_at({{0.0, 0.0, 0.25, 1.0}})), 0.0, 1e-15);
  const auto uniform = atoms_at({{0, 0, 0, 0.25}, {0, 0, 0.25, 0.25}, {0, 0, 0.5, 0.25}, {0, 0, 0.75, 0.25}});
  EXPECT_NEAR(integrate(family, 1, uniform), 0.0, 1e-15);
}

TEST(WeakStar, SelfDistanceAndTail) {
  std::mt19937_64 rng(1);
  const auto mu = random_measure(rng, 5);
  for (std::size_t depth : {1u, 10u, 20u, 64u}) {
    const auto r = weak_star_distance(TestFunctionFamily::torus(), mu, mu, depth);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_DOUBLE_EQ(r.tail_bound, std::ldexp(2.0, -static_cast<int>(depth)));
  }
}

TEST(WeakStar, DiracPairByDirectSummation) {
  const auto family = TestFunctionFamily::torus();
  const auto a = atoms_at({{0, 0, 0, 1}});
  const auto b = atoms_at({{0, 0, 0.5, 1}});
  double expect = 0.0;
  for (std::size_t i = 1; i <= 20; ++i) {
    expect += std::ldexp(std::abs(oracle_torus_value(i, 0, 0, 0) - oracle_torus_value(i, 0, 0, 0.5)),
                         -static_cast<int>(i));
  }
  EXPECT_NEAR(weak_star_distance(family, a, b, 20).value, expect, 1e-15);
  EXPECT_GT(expect, 0.0);
}

TEST(WeakStar, MismatchedSpacesThrow) {
  const auto sys = default_symbolic_system();
  const auto sym = empirical_measure(make_periodic_orbit(sys, BaseCycle{Word{0}}, 0.0));
  const auto tor = atoms_at({{0, 0, 0, 1}});
  EXPECT_THROW(weak_star_distance(TestFunctionFamily::torus(), tor, sym, 10), PhaseSpaceMismatch);
}

TEST(WeakStarProperty, MetricAxiomsAndTruncation) {
  std::mt19937_64 rng(99);
  const auto family = TestFunctionFamily::torus();
  for (int trial = 0; trial < 60; ++trial) {
    const auto a = random_measure(rng, 3);
    const auto b = random_measure(rng, 4);
    const auto c = random_measure(rng, 2);
    const double ab = weak_star_distance(family, a, b, 20).value;
    const double ba = weak_star_distance(family, b, a, 20).value;
    const double ac = weak_star_distance(family, a, c, 20).value;
    const double cb = weak_star_distance(family, c, b, 20).value;
    EXPECT_EQ(ab, ba);
    EXPECT_LE(ab, ac + cb + 1e-15);
    double prev = 0.0;
    for (std::size_t depth = 1; depth <= 40; ++depth) {
      const double v = weak_star_distance(family, a, b, depth).value;
      EXPECT_GE(v, prev);
      prev = v;
    }
    const double d20 = weak_star_distance(family, a, b, 20).value;
    const double d40 = weak_star_distance(family, a, b, 40).value;
    EXPECT_LE(d40 - d20, 2.0 * std::ldexp(1.0, -20));
  }
}

TEST(CenterExponent, Examples) {
  const auto flat = SkewProductSystem::torus(TorusBase(), 0.0, 0.1, Modulation::cos_x1);
  std::mt19937_64 rng(2);
  EXPECT_EQ(center_exponent(flat, random_measure(rng, 4)), 0.0);
  const auto sys = default_symbolic_system();
  const auto rep = make_periodic_orbit(sys, BaseCycle{Word{1}}, 0.0);
  EXPECT_NEAR(center_exponent(sys, empirical_measure(rep)), std::log(1.5), 1e-15);
}

TEST(CenterExponentProperty, Affine) {
  const auto sys = default_torus_system();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto mu = random_measure(rng, 3);
    const auto nu = random_measure(rng, 5);
    const double alpha = u(rng);
    const auto mix = convex_combine({{alpha, mu}, {1.0 - alpha, nu}});
    EXPECT_NEAR(center_exponent(sys, mix),
                alpha * center_exponent(sys, mu) + (1.0 - alpha) * center_exponent(sys, nu), 1e-12);
  }
}

TEST(ClassifyIndex, DeadZone) {
  EXPECT_EQ(classify_exponent(0.4, 1e-3), IndexClass::index_i);
  EXPECT_EQ(classify_exponent(-0.4, 1e-3), IndexClass::index_i_plus_1);
  EXPECT_EQ(classify_exponent(5e-4, 1e-3), IndexClass::nonhyperbolic);
  EXPECT_THROW(classify_exponent(0.1, 0.0), PreconditionError);
}

TEST(ClassifyIndexProperty, RepresentationInvariant) {
  const auto sys = default_torus_system();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    const auto mu = random_measure(rng, 4);
    auto atoms = mu.atoms();
    std::reverse(atoms.begin(), atoms.end());
    // split the first atom in two halves
    Atom half = atoms.front();
    half.weight /= 2.0;
    atoms.front().weight /= 2.0;
    atoms.push_back(half);
    const EmpiricalMeasure rep(atoms);
    for (double tol : {1e-3, 1e-2, 0.1}) EXPECT_EQ(classify_index(sys, mu, tol), classify_index(sys, rep, tol));
  }
}

TEST(ConvexCombine, Examples) {
  std::mt19937_64 rng(6);
  const auto mu = random_measure(rng, 3);
  const auto nu = random_measure(rng, 2);
  const auto family = TestFunctionFamily::torus();
  const auto same = convex_combine({{1.0, mu}});
  EXPECT_EQ(weak_star_distance(family, same, mu, 64).value, 0.0);
  const auto zero = convex_combine({{0.0, mu}, {1.0, nu}});
  EXPECT_EQ(weak_star_distance(family, zero, nu, 64).value, 0.0);
  const auto mix = convex_combine({{0.3, mu}, {0.7, nu}});
  for (std::size_t g = 1; g <= 50; ++g) {
    EXPECT_NEAR(integrate(family, g, mix), 0.3 * integrate(family, g, mu) + 0.7 * integrate(family, g, nu), 1e-14);
  }
  EXPECT_THROW(convex_combine({{0.5, mu}, {0.6, nu}}), PreconditionError);
}
