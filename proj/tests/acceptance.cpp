// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "ergoshadow/experiments.hpp"
#include "ergoshadow/gikn.hpp"
#include "ergoshadow/measure_metrics.hpp"
#include "ergoshadow/orbit_engine.hpp"
#include "ergoshadow/pliss.hpp"
#include "ergoshadow/quasi_shadow.hpp"

using namespace ergoshadow;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <class T>
T cell(const ExperimentTable& t, std::size_t row, const std::string& col) {
  return std::get<T>(t.rows[row][t.column(col)]);
}

// Backward sums checked one by one.
std::vector<std::size_t> pliss_direct(const std::vector<double>& a, double cp) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool ok = true;
    double s = 0.0;
    for (std::size_t j = i + 1; j-- > 0 && ok;) {
      s += a[j] - cp;
      ok = s >= -1e-12;
    }
    if (ok) out.push_back(i + 1);
  }
  return out;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(1, 200);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int bad = 0, bound_bad = 0;
  for (int k = 0; k < 1000; ++k) {
    PlissQuery<double> q;
    const int n = len(rng);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      q.a.push_back(u(rng));
      sum += q.a.back();
    }
    q.b = 1.0;
    q.c = std::min(sum / n, 0.9);
    q.c_prime = q.c - 0.05 - 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto r = pliss_times(q);
    if (r.indices != pliss_direct(q.a, q.c_prime)) ++bad;
    if (r.proportion < (q.c - q.c_prime) / (q.b - q.c_prime) - 1e-12) ++bound_bad;
  }
  const double s = seconds_since(t0);
  return {bad == 0 && bound_bad == 0 && s < 5.0, std::to_string(bad) + " mismatches, " + std::to_string(bound_bad) +
                                                      " bound violations over 1000 queries, " + fmt(s) + " s"};
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  const TorusBase base;
  std::string detail;
  bool ok = true;
  // A^n by repeated multiplication; the D x D grid check counts solutions of (A^n - I) v = 0 mod D.
  std::array<std::array<std::int64_t, 2>, 2> a{{{2, 1}, {1, 1}}};
  auto p = a;
  for (int n = 1; n <= 8; ++n) {
    if (n > 1) {
      p = {{{p[0][0] * a[0][0] + p[0][1] * a[1][0], p[0][0] * a[0][1] + p[0][1] * a[1][1]},
            {p[1][0] * a[0][0] + p[1][1] * a[1][0], p[1][0] * a[0][1] + p[1][1] * a[1][1]}}};
    }
    const std::int64_t expect = std::llabs(p[0][0] + p[1][1] - 2);
    const std::int64_t m00 = p[0][0] - 1, m01 = p[0][1], m10 = p[1][0], m11 = p[1][1] - 1;
    const std::int64_t D = std::llabs(m00 * m11 - m01 * m10);
    std::int64_t grid = 0;
    for (std::int64_t i = 0; i < D; ++i) {
      for (std::int64_t j = 0; j < D; ++j) {
        if ((m00 * i + m01 * j) % D == 0 && (m10 * i + m11 * j) % D == 0) ++grid;
      }
    }
    const auto got = static_cast<std::int64_t>(enumerate_base_periodic(base, n).size());
    if (got != expect || grid != expect) ok = false;
    detail += (n > 1 ? " " : "") + std::string("n=") + std::to_string(n) + ":" + std::to_string(got);
  }
  const double s = seconds_since(t0);
  return {ok && s < 10.0, detail + ", " + fmt(s) + " s"};
}

EmpiricalMeasure random_measure(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1 + static_cast<int>(rng() % 5);
  std::vector<Atom> atoms;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    atoms.push_back({torus_point(u(rng), u(rng), u(rng)), u(rng) + 0.05});
    total += atoms.back().weight;
  }
  for (auto& a : atoms) a.weight /= total;
  return EmpiricalMeasure(std::move(atoms));
}

Outcome criterion3() {
  std::mt19937_64 rng(3);
  const auto family = TestFunctionFamily::torus();
  const std::size_t I = 20;
  int sym = 0, tri = 0, self = 0, trunc = 0;
  double worst_tri = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto a = random_measure(rng);
    const auto b = random_measure(rng);
    const auto c = random_measure(rng);
    const double ab = weak_star_distance(family, a, b, I).value;
    const double ba = weak_star_distance(family, b, a, I).value;
    const double ac = weak_star_distance(family, a, c, I).value;
    const double cb = weak_star_distance(family, c, b, I).value;
    if (ab != ba) ++sym;
    if (ab > ac + cb) ++tri;
    worst_tri = std::max(worst_tri, ab - ac - cb);
    if (weak_star_distance(family, a, a, I).value != 0.0) ++self;
    const double deep = weak_star_distance(family, a, b, 3 * I).value;
    if (std::abs(deep - ab) > std::ldexp(2.0, -static_cast<int>(I))) ++trunc;
  }
  return {sym + tri + self + trunc == 0, "symmetry " + std::to_string(sym) + ", triangle " + std::to_string(tri) +
                                             ", self " + std::to_string(self) + ", truncation " +
                                             std::to_string(trunc) + " failures over 200 triples"};
}

Outcome criterion4() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto sys = default_torus_system();
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int m = 2 + static_cast<int>(rng() % 3);
    std::vector<std::pair<double, EmpiricalMeasure>> parts;
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      parts.emplace_back(u(rng) + 0.01, random_measure(rng));
      total += parts.back().first;
    }
    double expect = 0.0;
    for (auto& [w, mu] : parts) {
      w /= total;
      expect += w * center_exponent(sys, mu);
    }
    worst = std::max(worst, std::abs(center_exponent(sys, convex_combine(parts)) - expect));
  }
  return {worst <= 1e-12, "max deviation " + fmt(worst) + " over 100 combinations"};
}

Outcome criterion5(ExperimentTable& table) {
  const auto t0 = Clock::now();
  table = run_experiment_shadow_scaling(default_experiment_config("shadow"));
  const double s = seconds_since(t0);
  std::map<std::string, std::pair<double, double>> ratios;
  int bad_residual = 0, unverified = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double res = cell<double>(table, i, "residual");
    if (!(res < 1e-9)) ++bad_residual;
    if (!cell<bool>(table, i, "plan_verified")) ++unverified;
    const double r = cell<double>(table, i, "distance") / cell<double>(table, i, "d");
    auto [it, fresh] = ratios.try_emplace(cell<std::string>(table, i, "orbit"), r, r);
    if (!fresh) {
      it->second.first = std::min(it->second.first, r);
      it->second.second = std::max(it->second.second, r);
    }
  }
  double band = 0.0;
  for (const auto& [name, lh] : ratios) band = std::max(band, lh.first > 0.0 ? lh.second / lh.first : INFINITY);
  const bool ok = table.rows.size() == 30 && ratios.size() == 10 && bad_residual == 0 && unverified == 0 &&
                  band <= 2.0 && s < 60.0;
  return {ok, std::to_string(table.rows.size()) + " pseudo-orbits over " + std::to_string(ratios.size()) +
                  " orbits, worst band " + fmt(band) + ", residual failures " + std::to_string(bad_residual) + ", " +
                  fmt(s) + " s"};
}

Outcome criterion6(ExperimentTable& table) {
  const auto t0 = Clock::now();
  const auto cfg = default_experiment_config("convex");
  table = run_experiment_convex(cfg);
  const double s = seconds_since(t0);
  std::vector<bool> seen(11, false);
  double worst_d = 0.0, worst_e = 0.0;
  bool ok = true;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double alpha = cell<double>(table, i, "alpha");
    const double d = cell<double>(table, i, "distance");
    const double e = std::abs(cell<double>(table, i, "achieved_exponent") - cell<double>(table, i, "mixture_exponent"));
    if (!(d < 0.05) || !(e <= 0.02)) ok = false;
    worst_d = std::max(worst_d, std::isnan(d) ? INFINITY : d);
    worst_e = std::max(worst_e, std::isnan(e) ? INFINITY : e);
    const long k = std::lround(alpha * 10);
    if (k >= 0 && k <= 10 && std::abs(alpha - k / 10.0) < 1e-12) seen[static_cast<std::size_t>(k)] = true;
  }
  for (bool b : seen) ok = ok && b;
  return {ok && s < 120.0, std::to_string(table.rows.size()) + " alphas, max distance " + fmt(worst_d) +
                               ", max exponent error " + fmt(worst_e) + ", " + fmt(s) + " s"};
}

Outcome criterion7() {
  const auto t0 = Clock::now();
  const auto sys = default_symbolic_system();
  const auto g0 = orbit_from_word(sys, "00000111111", 0.0);
  const auto sched = EpsilonSchedule::geometric(1e-2, 0.5);
  const DescendParams params;
  const auto seq = build_gikn_sequence(sys, g0, sched, params, 6);
  const auto rep = certify_convergence(sys, seq, 20, 1e-2);
  const double s = seconds_since(t0);
  const double lam0 = seq.orbits.front().lambda_c;
  // product and distance bounds recomputed here from the fitted rho
  const double threshold = 1.0 + (2.0 * rep.rho_fit / (1.0 - params.zeta)) * lam0;
  const double dist_bound = (2.0 + 4.0 * rep.rho_fit / (1.0 - params.zeta)) * std::abs(lam0) + std::ldexp(2.0, -20);
  bool certs = true;
  for (std::size_t n = 0; n < seq.certificates.size(); ++n) {
    certs = certs && verify_certificate(sys, seq.orbits[n + 1], seq.orbits[n], seq.certificates[n]).ok;
  }
  bool monotone = true;
  for (std::size_t n = 0; n + 1 < seq.orbits.size(); ++n) {
    const double q = seq.orbits[n + 1].lambda_c / seq.orbits[n].lambda_c;
    monotone = monotone && std::abs(seq.orbits[n + 1].lambda_c) < std::abs(seq.orbits[n].lambda_c) && q > params.zeta;
  }
  const double final_lam = seq.orbits.back().lambda_c;
  const bool ok = seq.orbits.size() == 7 && std::abs(lam0) <= 0.1 && lam0 < 0.0 && certs && sched.summable() &&
                  seq.prod_kappa() > threshold && monotone && std::abs(final_lam) < 1e-2 &&
                  rep.distance_first_last <= dist_bound && rep.pass() && s < 120.0;
  return {ok, "final lambda_c " + fmt(final_lam) + ", final period " + std::to_string(seq.orbits.back().period()) +
                  ", prod kappa " + fmt(seq.prod_kappa()) + " > " + fmt(threshold) + ", d(mu0, mu6) " +
                  fmt(rep.distance_first_last) + " <= " + fmt(dist_bound) + ", certificates " +
                  (certs ? "ok" : "FAILED") + ", " + fmt(s) + " s"};
}

Outcome criterion8(ExperimentTable& table) {
  table = run_experiment_gap_bound(default_experiment_config("gap"));
  // distance per (alpha, q exponent)
  std::map<double, std::map<double, double>> by_alpha;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double alpha = cell<double>(table, i, "alpha");
    if (alpha >= 1.0) continue;
    by_alpha[alpha][std::abs(cell<double>(table, i, "q_target"))] = cell<double>(table, i, "distance");
  }
  int pairs = 0;
  bool ok = !by_alpha.empty();
  std::string detail;
  for (const auto& [alpha, m] : by_alpha) {
    for (const auto& [lam, dist] : m) {
      const auto it = m.find(2.0 * lam);
      if (it == m.end()) continue;
      const double r = dist / it->second;
      ++pairs;
      ok = ok && r >= 0.3 && r <= 0.8;
      detail += (detail.empty() ? "" : " ") + std::string("a=") + fmt(alpha) + ",|l|=" + fmt(lam) + ":" + fmt(r);
    }
  }
  return {ok && pairs > 0, "ratios per halving " + detail};
}

Outcome criterion9() {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.35);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::uniform_int_distribution<int> len(1, 80);
  int verified = 0, failed = 0, drawn = 0;
  while (verified < 500 && drawn < 200000) {
    ++drawn;
    const auto split = drawn % 2 ? SplittingSpec::center_in_E : SplittingSpec::center_in_F;
    const double drift = (split == SplittingSpec::center_in_E ? -1.0 : 1.0) * u(rng) * 0.4;
    std::vector<BundleLogRates> rates;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) rates.push_back({-0.96 + 0.2 * noise(rng), drift + noise(rng), 0.96 + 0.2 * noise(rng)});
    const double lam = u(rng);
    if (!check_quasi_hyperbolic(rates, lam, split).verified) continue;
    ++verified;
    if (!check_quasi_hyperbolic(rates, (1.0 + lam) / 2.0, split).verified) ++failed;
  }
  return {verified == 500 && failed == 0,
          std::to_string(failed) + " of " + std::to_string(verified) + " verified strings fail at (1+lambda)/2"};
}

Outcome criterion10(const std::vector<std::pair<std::string, std::string>>& first_runs) {
  std::string detail;
  bool ok = !first_runs.empty();
  for (const auto& [name, csv] : first_runs) {
    const auto again = run_experiment(default_experiment_config(name)).to_csv();
    const bool same = again == csv;
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str());
    std::fflush(stdout);
  };

  ExperimentTable shadow, convex, gap;
  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  report(4, criterion4);
  report(5, [&] { return criterion5(shadow); });
  report(6, [&] { return criterion6(convex); });
  report(7, criterion7);
  report(8, [&] { return criterion8(gap); });
  report(9, criterion9);
  report(10, [&] {
    std::vector<std::pair<std::string, std::string>> runs;
    for (const auto* t : {&shadow, &convex, &gap}) {
      if (!t->rows.empty()) runs.emplace_back(t->name, t->to_csv());
    }
    runs.emplace_back("nonhyp", run_experiment(default_experiment_config("nonhyp")).to_csv());
    return criterion10(runs);
  });
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
