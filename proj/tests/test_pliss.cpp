#include <gtest/gtest.h>

#include <boost/rational.hpp>
#include <random>

#include "ergoshadow/errors.hpp"
#include "ergoshadow/pliss.hpp"

using namespace ergoshadow;
using Q = boost::rational<long long>;

namespace {

PlissQuery<double> random_query(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 200);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PlissQuery<double> q;
  const int n = len(rng);
  q.b = 1.0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    q.a.push_back(u(rng));
    sum += q.a.back();
  }
  const double mean = sum / n;
  q.c = std::min(mean, 0.9);
  q.c_prime = q.c - 0.05 - 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return q;
}

}  // namespace

TEST(Pliss, ConstantSequence) {
  PlissQuery<double> q{std::vector<double>(17, 0.4), 1.0, 0.4, 0.1};
  const auto r = pliss_times(q);
  EXPECT_EQ(r.indices.size(), 17u);
  EXPECT_DOUBLE_EQ(r.proportion, 1.0);
  PlissQuery<double> top{std::vector<double>(9, 1.0), 1.0, 0.5, 0.0};
  EXPECT_EQ(pliss_times(top).indices.size(), 9u);
}

TEST(Pliss, SmallExampleAgainstOracle) {
  PlissQuery<double> q{{0.5, -0.5, 1.0, 1.0, -1.0, 1.0}, 1.0, 0.0, 0.0};
  double s = 0.0;
  for (double x : q.a) s += x;
  q.c = s / 6.0;
  const auto r = pliss_times(q);
  EXPECT_EQ(r.indices, pliss_oracle<double>(q.a, 0.0));
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{1, 3, 4, 6}));
  EXPECT_GE(r.proportion, 1.0 / 3.0);
}

TEST(Pliss, OracleEdgeCases) {
  EXPECT_TRUE(pliss_oracle<double>(std::vector<double>{}, 0.0).empty());
  EXPECT_EQ(pliss_oracle<double>(std::vector<double>{0.3}, 0.1), (std::vector<std::size_t>{1}));
}

TEST(Pliss, Preconditions) {
  EXPECT_THROW(pliss_times(PlissQuery<double>{{0.5, 0.5}, 1.0, 0.2, 0.3}), PreconditionError);
  EXPECT_THROW(pliss_times(PlissQuery<double>{{1.5, 0.5}, 1.0, 0.2, 0.0}), PreconditionError);
  EXPECT_THROW(pliss_times(PlissQuery<double>{{0.1, 0.1}, 1.0, 0.5, 0.0}), PreconditionError);
}

TEST(PlissProperty, EquivalenceAndProportionBound) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 1000; ++i) {
    const auto q = random_query(rng);
    const auto r = pliss_times(q);
    ASSERT_EQ(r.indices, pliss_oracle<double>(q.a, q.c_prime)) << "instance " << i;
    EXPECT_GE(r.proportion, pliss_lower_bound(q) - 1e-12);
  }
}

TEST(PlissProperty, ShiftRobustness) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    // dyadic values keep the shifted sums exact
    PlissQuery<double> q;
    std::uniform_int_distribution<int> v(-64, 64);
    const int n = 1 + i % 50;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      q.a.push_back(v(rng) / 64.0);
      sum += q.a.back();
    }
    q.b = 1.0;
    q.c = std::floor(sum / n * 64.0) / 64.0;
    q.c_prime = q.c - 0.25;
    const double s = 0.375;
    PlissQuery<double> shifted = q;
    for (auto& x : shifted.a) x += s;
    shifted.b += s;
    shifted.c += s;
    shifted.c_prime += s;
    EXPECT_EQ(pliss_times(q).indices, pliss_times(shifted).indices);
  }
}

TEST(PlissExact, RationalModeMatchesOracle) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<long long> num(-50, 50);
  for (int i = 0; i < 300; ++i) {
    PlissQuery<Q> q;
    const int n = 1 + i % 60;
    Q sum = 0;
    for (int k = 0; k < n; ++k) {
      q.a.emplace_back(num(rng), 50);
      sum += q.a.back();
    }
    q.b = Q(1);
    q.c = sum / Q(n);
    if (!(q.c < q.b)) continue;
    q.c_prime = q.c - Q(1, 7);
    const auto r = pliss_times(q);
    EXPECT_EQ(r.indices, pliss_oracle<Q>(q.a, q.c_prime));
    // exact bound l/n >= (c - c')/(b - c')
    EXPECT_GE(Q(static_cast<long long>(r.indices.size()), n), (q.c - q.c_prime) / (q.b - q.c_prime));
  }
}

TEST(PlissExact, NearThresholdTies) {
  // backward sums hit c' exactly; rationals keep every tie
  PlissQuery<Q> q{{Q(1, 3), Q(-1, 3), Q(1, 3), Q(0), Q(1, 3)}, Q(1), Q(1, 15), Q(0)};
  const auto r = pliss_times(q);
  EXPECT_EQ(r.indices, pliss_oracle<Q>(q.a, Q(0)));
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{1, 3, 4, 5}));
}
