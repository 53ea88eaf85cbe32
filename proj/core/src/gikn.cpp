#include "ergoshadow/gikn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "ergoshadow/errors.hpp"
#include <json.hpp>

namespace ergoshadow {
namespace {

__extension__ typedef unsigned __int128 u128;

std::int64_t pmod(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

// Agreement radius needed for a symbolic base distance below eps, capped at
// the comparison window (beyond it the distance is 0).
int required_radius(double eps) {
  if (eps > 1.0) return 0;
  const double r = std::floor(std::log2(1.0 / eps));
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(kSymbolicWindow)));
}

double shadow_distance(const PeriodicOrbit& g1, std::int64_t j, const PeriodicOrbit& g2, std::int64_t x) {
  double d = 0.0;
  for (std::int64_t i = 0; i < g2.period(); ++i) d = std::max(d, phase_distance(g1.point(j + i), g2.point(x + i)));
  return d;
}

struct Match {
  std::int64_t j = 0;
  std::int64_t x = 0;
  double dist = 0.0;
};

// Keeps, for every x, the c closest matches, c the smallest preimage count.
std::vector<Match> balance(std::vector<Match> matches, std::int64_t p2, std::int64_t& cardinality) {
  std::vector<std::vector<Match>> by_x(static_cast<std::size_t>(p2));
  for (const auto& m : matches) by_x[static_cast<std::size_t>(m.x)].push_back(m);
  std::size_t c = std::numeric_limits<std::size_t>::max();
  for (const auto& v : by_x) c = std::min(c, v.size());
  cardinality = static_cast<std::int64_t>(c);
  std::vector<Match> kept;
  kept.reserve(c * by_x.size());
  for (auto& v : by_x) {
    std::stable_sort(v.begin(), v.end(), [](const Match& a, const Match& b) {
      return a.dist < b.dist || (a.dist == b.dist && a.j < b.j);
    });
    kept.insert(kept.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(c));
  }
  std::sort(kept.begin(), kept.end(), [](const Match& a, const Match& b) { return a.j < b.j; });
  return kept;
}

bool enough(std::size_t kept, std::int64_t p1, double kappa) {
  return static_cast<double>(kept) >= kappa * static_cast<double>(p1) - 1e-9;
}

GoodApproximationCertificate finish(std::vector<Match> best, std::int64_t p1, std::int64_t p2, double eps,
                                    double kappa) {
  GoodApproximationCertificate c;
  c.epsilon = eps;
  c.kappa_required = kappa;
  c.period1 = p1;
  c.period2 = p2;
  std::vector<Match> under;
  for (const auto& m : best) {
    if (m.dist < eps) under.push_back(m);
  }
  const auto kept = balance(std::move(under), p2, c.preimage_cardinality);
  for (const auto& m : kept) {
    c.subset.push_back(m.j);
    c.projection.push_back(m.x);
    c.max_distance = std::max(c.max_distance, m.dist);
  }
  c.kappa = static_cast<double>(kept.size()) / static_cast<double>(p1);
  c.valid = enough(kept.size(), p1, kappa);
  return c;
}

// Smallest threshold tau such that matches with distance <= tau reach kappa.
double epsilon_star(const std::vector<Match>& best, std::int64_t p1, std::int64_t p2, double kappa) {
  std::vector<double> levels;
  for (const auto& m : best) levels.push_back(m.dist);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  for (double tau : levels) {
    std::vector<Match> under;
    for (const auto& m : best) {
      if (m.dist <= tau) under.push_back(m);
    }
    std::int64_t card = 0;
    if (enough(balance(std::move(under), p2, card).size(), p1, kappa)) return tau;
  }
  return std::numeric_limits<double>::infinity();
}

// Polynomial hashes of fixed-length windows of a cyclic word.
class BlockHasher {
 public:
  BlockHasher(const Word& w, std::int64_t start_offset, std::int64_t count, std::int64_t len) : len_(len) {
    const auto n = static_cast<std::int64_t>(w.size());
    const auto total = count + len;
    h1_.assign(static_cast<std::size_t>(total) + 1, 0);
    h2_.assign(static_cast<std::size_t>(total) + 1, 0);
    for (std::int64_t s = 0; s < total; ++s) {
      const std::uint64_t v = w[static_cast<std::size_t>(pmod(start_offset + s, n))] + 1u;
      h1_[s + 1] = mulmod(h1_[s], kBase1) + v;
      if (h1_[s + 1] >= kMod) h1_[s + 1] -= kMod;
      h2_[s + 1] = h2_[s] * kBase2 + v;
    }
    p1_ = powmod(kBase1, len);
    p2_ = 1;
    for (std::int64_t i = 0; i < len; ++i) p2_ *= kBase2;
  }

  std::pair<std::uint64_t, std::uint64_t> at(std::int64_t s) const {
    const auto a = static_cast<std::size_t>(s);
    const auto b = static_cast<std::size_t>(s + len_);
    std::uint64_t x = h1_[b] + kMod - mulmod(h1_[a], p1_);
    if (x >= kMod) x -= kMod;
    return {x, h2_[b] - h2_[a] * p2_};
  }

 private:
  static constexpr std::uint64_t kMod = (std::uint64_t{1} << 61) - 1;
  static constexpr std::uint64_t kBase1 = 1'000'003;
  static constexpr std::uint64_t kBase2 = 0x9E3779B97F4A7C15ull;
  static std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
    const u128 p = static_cast<u128>(a) * b;
    std::uint64_t r = static_cast<std::uint64_t>(p >> 61) + static_cast<std::uint64_t>(p & kMod);
    if (r >= kMod) r -= kMod;
    return r;
  }
  static std::uint64_t powmod(std::uint64_t b, std::int64_t e) {
    std::uint64_t r = 1;
    while (e > 0) {
      if (e & 1) r = mulmod(r, b);
      b = mulmod(b, b);
      e >>= 1;
    }
    return r;
  }
  std::int64_t len_;
  std::uint64_t p1_ = 1;
  std::uint64_t p2_ = 1;
  std::vector<std::uint64_t> h1_;
  std::vector<std::uint64_t> h2_;
};

struct PairHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
    return static_cast<std::size_t>(p.first * 0x9E3779B97F4A7C15ull ^ p.second);
  }
};

// Symbolic matching: the base condition at radius R forces agreement on a
// block of length p2 + 2R, which (for a primitive gamma2) pins down x.
std::vector<Match> symbolic_matches(const PeriodicOrbit& g1, const PeriodicOrbit& g2, double eps) {
  const Word& w1 = g1.word();
  const Word& w2 = g2.word();
  const std::int64_t p1 = g1.period();
  const std::int64_t p2 = g2.period();
  const int r = required_radius(eps);
  const std::int64_t len = p2 + 2 * r;
  auto s1 = [&](std::int64_t i) { return w1[static_cast<std::size_t>(pmod(i, p1))]; };
  auto s2 = [&](std::int64_t i) { return w2[static_cast<std::size_t>(pmod(i, p2))]; };

  const BlockHasher h2(w2, -r, p2, len);
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, std::vector<std::int64_t>, PairHash> table;
  for (std::int64_t x = 0; x < p2; ++x) table[h2.at(x)].push_back(x);
  const BlockHasher h1(w1, -r, p1, len);

  auto block_equal = [&](std::int64_t j, std::int64_t x, std::int64_t extra) {
    for (std::int64_t s = -r; s < p2 + r + extra; ++s) {
      if (s1(j + s) != s2(x + s)) return false;
    }
    return true;
  };

  // Candidate pairs, exact-checked.
  std::vector<Match> cand;
  for (std::int64_t j = 0; j < p1; ++j) {
    const auto it = table.find(h1.at(j));
    if (it == table.end()) continue;
    for (std::int64_t x : it->second) {
      const bool continues = !cand.empty() && cand.back().j == j - 1 && pmod(cand.back().x + 1, p2) == x;
      // Along a run only the newly exposed symbol needs checking.
      const bool ok = continues ? s1(j + p2 - 1 + r) == s2(x + p2 - 1 + r) : block_equal(j, x, 0);
      if (ok) cand.push_back({j, x, 0.0});
    }
  }

  // Base distance from the full agreement radius, fibre part by sliding maxima.
  const bool fiber_flat = std::all_of(g1.fiber.begin(), g1.fiber.end(), [&](double t) { return t == g2.fiber[0]; }) &&
                          std::all_of(g2.fiber.begin(), g2.fiber.end(), [&](double t) { return t == g2.fiber[0]; });
  std::size_t a = 0;
  while (a < cand.size()) {
    std::size_t b = a + 1;
    while (b < cand.size() && cand[b].j == cand[b - 1].j + 1 && cand[b].x == pmod(cand[b - 1].x + 1, p2)) ++b;
    const std::int64_t j0 = cand[a].j;
    const std::int64_t x0 = cand[a].x;
    const auto run = static_cast<std::int64_t>(b - a);
    std::vector<double> fmax(static_cast<std::size_t>(run), 0.0);
    if (!fiber_flat) {
      std::deque<std::int64_t> dq;
      std::vector<double> diff(static_cast<std::size_t>(run + p2 - 1));
      for (std::int64_t s = 0; s < run + p2 - 1; ++s) {
        diff[s] = circle_dist(g1.fiber[static_cast<std::size_t>(pmod(j0 + s, p1))],
                              g2.fiber[static_cast<std::size_t>(pmod(x0 + s, p2))]);
      }
      for (std::int64_t s = 0; s < run + p2 - 1; ++s) {
        while (!dq.empty() && diff[dq.back()] <= diff[s]) dq.pop_back();
        dq.push_back(s);
        const std::int64_t start = s - p2 + 1;
        if (start < 0) continue;
        while (dq.front() < start) dq.pop_front();
        fmax[start] = diff[dq.front()];
      }
    }
    for (std::int64_t q = 0; q < run; ++q) {
      auto& m = cand[a + static_cast<std::size_t>(q)];
      int left = r;
      while (left < kSymbolicWindow && s1(m.j - left - 1) == s2(m.x - left - 1)) ++left;
      int right = r;
      while (right < kSymbolicWindow && s1(m.j + p2 - 1 + right + 1) == s2(m.x + p2 - 1 + right + 1)) ++right;
      const int k = std::min(left, right);
      const double base = k >= kSymbolicWindow ? 0.0 : std::ldexp(1.0, -(k + 1));
      m.dist = std::max(base, fmax[q]);
    }
    a = b;
  }

  // Best candidate per j.
  std::vector<Match> best;
  for (const auto& m : cand) {
    if (!best.empty() && best.back().j == m.j) {
      if (m.dist < best.back().dist) best.back() = m;
    } else {
      best.push_back(m);
    }
  }
  return best;
}

}  // namespace

GoodApproximationCertificate check_good_approximation(const SkewProductSystem& system,
                                                      const PeriodicOrbit& gamma1,
                                                      const PeriodicOrbit& gamma2, double epsilon,
                                                      double kappa, const GoodApproximationOptions& options) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  if (!(kappa <= 1.0)) throw PreconditionError("kappa must be at most 1");
  if (gamma1.is_torus() != gamma2.is_torus() || gamma1.is_torus() != system.is_torus()) {
    throw PhaseSpaceMismatch("orbits and system on different phase spaces");
  }
  const std::int64_t p1 = gamma1.period();
  const std::int64_t p2 = gamma2.period();
  const double work = static_cast<double>(p1) * static_cast<double>(p2) * static_cast<double>(p2);
  const bool brute = work <= static_cast<double>(options.brute_force_budget);

  std::vector<Match> best;
  if (brute) {
    for (std::int64_t j = 0; j < p1; ++j) {
      Match m{j, 0, std::numeric_limits<double>::infinity()};
      for (std::int64_t x = 0; x < p2; ++x) {
        const double d = shadow_distance(gamma1, j, gamma2, x);
        if (d < m.dist) m = {j, x, d};
      }
      best.push_back(m);
    }
  } else {
    if (system.is_torus()) throw BudgetExceeded("torus good-approximation check exceeds the scan budget");
    best = symbolic_matches(gamma1, gamma2, epsilon);
  }
  auto cert = finish(best, p1, p2, epsilon, kappa);
  cert.epsilon_star = brute ? epsilon_star(best, p1, p2, kappa) : std::numeric_limits<double>::quiet_NaN();
  return cert;
}

CertificateCheck verify_certificate(const SkewProductSystem& system, const PeriodicOrbit& gamma1,
                                    const PeriodicOrbit& gamma2, const GoodApproximationCertificate& cert) {
  CertificateCheck out;
  auto fail = [&](std::string why) {
    out.ok = false;
    out.failure = std::move(why);
    return out;
  };
  const std::int64_t p1 = gamma1.period();
  const std::int64_t p2 = gamma2.period();
  if (cert.period1 != p1 || cert.period2 != p2) return fail("periods do not match the orbits");
  if (cert.subset.size() != cert.projection.size()) return fail("subset and projection sizes differ");
  for (std::size_t i = 0; i < cert.subset.size(); ++i) {
    if (cert.subset[i] < 0 || cert.subset[i] >= p1) return fail("subset index out of range");
    if (i > 0 && cert.subset[i] <= cert.subset[i - 1]) return fail("subset not strictly increasing");
    if (cert.projection[i] < 0 || cert.projection[i] >= p2) return fail("projection index out of range");
  }

  // Equal preimage counts.
  std::vector<std::int64_t> count(static_cast<std::size_t>(p2), 0);
  for (auto x : cert.projection) ++count[static_cast<std::size_t>(x)];
  for (auto c : count) {
    if (c != cert.preimage_cardinality) return fail("preimage cardinalities differ");
  }

  // Proportion.
  const double prop = static_cast<double>(cert.subset.size()) / static_cast<double>(p1);
  if (std::abs(prop - cert.kappa) > 1e-12) return fail("recorded proportion is wrong");
  if (static_cast<double>(cert.subset.size()) < cert.kappa_required * static_cast<double>(p1) - 1e-9) {
    return fail("proportion below kappa");
  }

  // Shadow distances, checked along runs j, j+1, ... mapped to x, x+1, ...
  const double eps = cert.epsilon;
  std::size_t a = 0;
  while (a < cert.subset.size()) {
    std::size_t b = a + 1;
    while (b < cert.subset.size() && cert.subset[b] == cert.subset[b - 1] + 1 &&
           cert.projection[b] == (cert.projection[b - 1] + 1) % p2) {
      ++b;
    }
    const std::int64_t j0 = cert.subset[a];
    const std::int64_t x0 = cert.projection[a];
    const auto run = static_cast<std::int64_t>(b - a);
    if (system.is_torus()) {
      for (std::int64_t s = 0; s < run + p2 - 1; ++s) {
        if (!(phase_distance(gamma1.point(j0 + s), gamma2.point(x0 + s)) < eps)) {
          return fail("shadow distance not below epsilon");
        }
      }
    } else {
      const Word& w1 = gamma1.word();
      const Word& w2 = gamma2.word();
      const int r = required_radius(eps);
      const bool base_free = eps > 1.0;
      for (std::int64_t s = -r; s < run + p2 - 1 + r && !base_free; ++s) {
        if (w1[static_cast<std::size_t>(pmod(j0 + s, p1))] != w2[static_cast<std::size_t>(pmod(x0 + s, p2))]) {
          return fail("symbol disagreement inside the shadowing window");
        }
      }
      for (std::int64_t s = 0; s < run + p2 - 1; ++s) {
        const double d = circle_dist(gamma1.fiber[static_cast<std::size_t>(pmod(j0 + s, p1))],
                                     gamma2.fiber[static_cast<std::size_t>(pmod(x0 + s, p2))]);
        if (!(d < eps)) return fail("fibre distance not below epsilon");
      }
    }
    a = b;
  }
  out.ok = true;
  return out;
}

EpsilonSchedule EpsilonSchedule::geometric(double eps0, double ratio) {
  if (!(eps0 > 0.0) || !(ratio > 0.0)) throw PreconditionError("schedule parameters must be positive");
  EpsilonSchedule s;
  s.kind_ = Kind::geometric;
  s.eps0_ = eps0;
  s.ratio_ = ratio;
  s.summable_ = ratio < 1.0;
  return s;
}

EpsilonSchedule EpsilonSchedule::harmonic(double eps0) {
  if (!(eps0 > 0.0)) throw PreconditionError("schedule parameters must be positive");
  EpsilonSchedule s;
  s.kind_ = Kind::harmonic;
  s.eps0_ = eps0;
  s.summable_ = false;
  return s;
}

double EpsilonSchedule::at(int n) const {
  if (n < 1) throw PreconditionError("schedule index starts at 1");
  if (kind_ == Kind::harmonic) return eps0_ / static_cast<double>(n);
  return eps0_ * std::pow(ratio_, n);
}

double EpsilonSchedule::partial_sum(int n) const {
  double s = 0.0;
  for (int i = 1; i <= n; ++i) s += at(i);
  return s;
}

std::string EpsilonSchedule::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (kind_ == Kind::harmonic) {
    os << "harmonic eps0=" << eps0_;
  } else {
    os << "geometric eps0=" << eps0_ << " ratio=" << ratio_;
  }
  return os.str();
}

namespace {

Word repeat_word(const Word& w, std::int64_t times) {
  Word out;
  out.reserve(w.size() * static_cast<std::size_t>(times));
  for (std::int64_t i = 0; i < times; ++i) out.insert(out.end(), w.begin(), w.end());
  return out;
}

}  // namespace

DescendResult descend_step(const SkewProductSystem& system, const PeriodicOrbit& gamma, double epsilon,
                           const DescendParams& params) {
  if (system.is_torus() || gamma.is_torus()) throw PreconditionError("descend needs a symbolic base");
  if (!(params.zeta > 0.0 && params.zeta < 1.0)) throw PreconditionError("zeta must lie in (0, 1)");
  if (!(params.ratio_high > params.zeta && params.ratio_high <= 1.0)) {
    throw PreconditionError("ratio window must be a non-empty subinterval of (zeta, 1]");
  }
  if (!(params.rho > 0.0)) throw PreconditionError("rho must be positive");
  if (!(params.min_kappa >= 0.0 && params.min_kappa < 1.0)) throw PreconditionError("min_kappa must lie in [0, 1)");
  const double lam = gamma.lambda_c;
  if (std::abs(lam) < 1e-12) throw PreconditionError("orbit is not hyperbolic");
  if (std::abs(lam) > params.max_abs_exponent) throw PreconditionError("orbit exponent above the smallness threshold");

  const double level = gamma.t_star();
  for (double t : gamma.fiber) {
    if (circle_dist(t, level) > 1e-12) throw PreconditionError("orbit does not lie on a single fibre level");
  }
  std::array<double, 2> c{};
  for (std::uint8_t s = 0; s < 2; ++s) {
    const auto& f = system.symbol_map(s);
    if (circle_dist(f(level), level) > 1e-12) throw PreconditionError("fibre level is not invariant");
    c[s] = f.log_derivative(level);
  }
  int opp = -1;
  for (int s = 0; s < 2; ++s) {
    if (c[s] * lam < 0.0) opp = s;
  }
  if (opp < 0) throw PreconditionError("no opposite region");
  const int same = 1 - opp;
  const double c_o = c[opp];
  const double c_s = c[same];

  const std::int64_t pi = gamma.period();
  const double S = lam * static_cast<double>(pi);
  const int r = required_radius(epsilon);
  const double kappa_req = std::max(1.0 - params.rho * std::abs(lam), params.min_kappa);
  auto ratio = [&](std::int64_t m, std::int64_t len, std::int64_t k) {
    const double sp = static_cast<double>(m) * S + static_cast<double>(len - k) * c_s + static_cast<double>(k) * c_o;
    const double pp = static_cast<double>(m * pi + len);
    return (sp / pp) / lam;
  };

  std::string last_failure = "exponent window never reached";
  for (std::int64_t m = 2; m <= params.max_loops; ++m) {
    if (m * pi > params.max_period) break;
    // Shortest excursion landing the ratio in the window.
    std::int64_t len = 1;
    while (ratio(m, len, len) >= params.ratio_high) ++len;
    std::int64_t found_len = -1;
    std::int64_t found_k = -1;
    for (std::int64_t l = len; l <= 4 * len + 64 && found_len < 0; ++l) {
      for (std::int64_t k = 0; k <= l; ++k) {
        const double q = ratio(m, l, k);
        if (q > params.zeta && q < params.ratio_high) {
          found_len = l;
          found_k = k;
          break;
        }
      }
    }
    if (found_len < 0) continue;
    const std::int64_t period = m * pi + found_len;
    if (period > params.max_period) break;

    // Balanced-match estimate before any orbit work.
    const std::int64_t per_x = (m * pi - pi + 1 - 2 * r) / pi;
    const double kappa_est = per_x > 0 ? static_cast<double>(per_x * pi) / static_cast<double>(period) : 0.0;
    if (kappa_est < kappa_req) continue;

    Word excursion(static_cast<std::size_t>(found_len - found_k), static_cast<std::uint8_t>(same));
    excursion.insert(excursion.end(), static_cast<std::size_t>(found_k), static_cast<std::uint8_t>(opp));
    Word w = repeat_word(gamma.word(), m);
    w.insert(w.end(), excursion.begin(), excursion.end());

    FixedPointOptions fpo;
    fpo.grid = 3;
    fpo.window = Arc::centered(level, 1e-3);
    const auto search = find_fiber_fixed_points(system, BaseCycle{w}, fpo);
    if (search.points.empty()) {
      last_failure = "no fibre fixed point near the level";
      continue;
    }
    const auto nearest = std::min_element(search.points.begin(), search.points.end(),
                                          [&](const FiberFixedPoint& a, const FiberFixedPoint& b) {
                                            return circle_dist(a.t, level) < circle_dist(b.t, level);
                                          });
    PeriodicOrbit next = make_periodic_orbit(system, BaseCycle{w}, nearest->t);
    const double q = next.lambda_c / lam;
    if (!(q > params.zeta && q < 1.0)) {
      last_failure = "recomputed exponent left the window";
      continue;
    }
    auto cert = check_good_approximation(system, next, gamma, epsilon, kappa_req);
    if (!cert.valid) {
      std::ostringstream os;
      os << "certificate failed at kappa " << kappa_req << " (achieved " << cert.kappa << ")";
      last_failure = os.str();
      continue;
    }
    DescendResult res;
    res.orbit = std::move(next);
    res.certificate = std::move(cert);
    res.loops = m;
    res.excursion = std::move(excursion);
    res.ratio = q;
    return res;
  }
  throw BudgetExceeded("no loop count within budget: " + last_failure);
}

void GiknSequence::append(PeriodicOrbit orbit, GoodApproximationCertificate cert, std::int64_t m, Word excursion) {
  const double eps = cert.epsilon;
  const double kappa = cert.kappa;
  orbits.push_back(std::move(orbit));
  certificates.push_back(std::move(cert));
  epsilons.push_back(eps);
  kappas.push_back(kappa);
  loops.push_back(m);
  excursions.push_back(std::move(excursion));
  partial_eps_sums.push_back(sum_eps() + eps);
  partial_kappa_products.push_back(prod_kappa() * kappa);
}

GiknSequence build_gikn_sequence(const SkewProductSystem& system, const PeriodicOrbit& gamma0,
                                 const EpsilonSchedule& schedule, const DescendParams& params, int n_max,
                                 std::optional<GiknSequence> resume, const std::string& jsonl_path) {
  if (!schedule.summable()) throw PreconditionError("epsilon schedule is not summable");
  if (n_max < 0) throw PreconditionError("n_max must be non-negative");
  GiknSequence seq;
  if (resume && !resume->orbits.empty()) {
    seq = std::move(*resume);
  } else {
    seq.orbits.push_back(gamma0);
  }
  seq.params = params;
  for (int n = static_cast<int>(seq.orbits.size()); n <= n_max; ++n) {
    auto step = descend_step(system, seq.orbits.back(), schedule.at(n), params);
    seq.append(std::move(step.orbit), std::move(step.certificate), step.loops, std::move(step.excursion));
    if (!jsonl_path.empty()) save_gikn_jsonl(seq, jsonl_path);
  }
  seq.stop_reason = "n_max reached";
  if (!jsonl_path.empty()) save_gikn_jsonl(seq, jsonl_path);
  return seq;
}

namespace {

std::string word_string(const Word& w) {
  std::string s(w.size(), '0');
  for (std::size_t i = 0; i < w.size(); ++i) s[i] = static_cast<char>('0' + w[i]);
  return s;
}

Word parse_word(const std::string& s) {
  Word w(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw ConfigError("word must consist of 0 and 1");
    w[i] = static_cast<std::uint8_t>(s[i] - '0');
  }
  return w;
}

}  // namespace

void save_gikn_jsonl(const GiknSequence& seq, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t n = 0; n < seq.orbits.size(); ++n) {
    const auto& o = seq.orbits[n];
    if (o.is_torus()) throw PreconditionError("sequence persistence covers symbolic orbits");
    nlohmann::ordered_json j;
    j["index"] = n;
    j["word"] = word_string(o.word());
    j["t_star"] = o.t_star();
    j["lambda_c"] = o.lambda_c;
    j["period"] = o.period();
    if (n == 0) {
      j["params"] = {{"rho", seq.params.rho},
                     {"zeta", seq.params.zeta},
                     {"ratio_high", seq.params.ratio_high},
                     {"max_abs_exponent", seq.params.max_abs_exponent},
                     {"min_kappa", seq.params.min_kappa}};
    } else {
      const auto& c = seq.certificates[n - 1];
      j["certificate"] = {{"epsilon", c.epsilon},
                          {"kappa_required", c.kappa_required},
                          {"kappa", c.kappa},
                          {"preimage_cardinality", c.preimage_cardinality},
                          {"matched", c.subset.size()},
                          {"max_distance", c.max_distance}};
      j["loops"] = seq.loops[n - 1];
      j["excursion"] = word_string(seq.excursions[n - 1]);
    }
    out << j.dump() << '\n';
  }
}

GiknSequence load_gikn_jsonl(const SkewProductSystem& system, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  GiknSequence seq;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("malformed sequence line: ") + e.what());
    }
    auto orbit = make_periodic_orbit(system, BaseCycle{parse_word(j.at("word").get<std::string>())},
                                     j.at("t_star").get<double>());
    if (seq.orbits.empty()) {
      if (j.contains("params")) {
        const auto& p = j["params"];
        seq.params.rho = p.value("rho", seq.params.rho);
        seq.params.zeta = p.value("zeta", seq.params.zeta);
        seq.params.ratio_high = p.value("ratio_high", seq.params.ratio_high);
        seq.params.max_abs_exponent = p.value("max_abs_exponent", seq.params.max_abs_exponent);
        seq.params.min_kappa = p.value("min_kappa", seq.params.min_kappa);
      }
      seq.orbits.push_back(std::move(orbit));
      continue;
    }
    const auto& c = j.at("certificate");
    auto cert = check_good_approximation(system, orbit, seq.orbits.back(), c.at("epsilon").get<double>(),
                                         c.at("kappa_required").get<double>());
    if (!cert.valid) throw ConfigError("stored certificate does not re-verify");
    seq.append(std::move(orbit), std::move(cert), j.value("loops", std::int64_t{0}),
               parse_word(j.value("excursion", std::string{})));
  }
  if (seq.orbits.empty()) throw ConfigError("empty sequence file");
  return seq;
}

ConvergenceReport certify_convergence(const SkewProductSystem& system, const GiknSequence& seq, std::size_t depth,
                                      double tol_hyp) {
  if (seq.orbits.size() < 2) throw PreconditionError("sequence needs at least two orbits");
  ConvergenceReport rep;
  rep.sum_eps = seq.sum_eps();
  rep.prod_kappa = seq.prod_kappa();
  rep.zeta = seq.params.zeta;
  const auto family = TestFunctionFamily::for_system(system);
  std::vector<std::vector<double>> ints;
  for (const auto& o : seq.orbits) {
    rep.exponents.push_back(o.lambda_c);
    ints.push_back(family.integrals(empirical_measure(o), depth));
  }
  for (std::size_t n = 0; n + 1 < seq.orbits.size(); ++n) {
    const double d = distance_from_integrals(ints[n], ints[n + 1], depth).value;
    rep.increments.push_back(d);
    if (n < seq.epsilons.size() && seq.epsilons[n] > 0.0) {
      rep.increment_constant = std::max(rep.increment_constant, d / seq.epsilons[n]);
    }
    const double a = std::abs(rep.exponents[n]);
    const double b = std::abs(rep.exponents[n + 1]);
    if (!(b < a)) rep.exponents_monotone = false;
    if (!(rep.exponents[n] != 0.0 && rep.exponents[n + 1] / rep.exponents[n] > rep.zeta)) rep.ratios_above_zeta = false;
  }
  for (std::size_t n = 0; n < seq.kappas.size(); ++n) {
    const double a = std::abs(rep.exponents[n]);
    if (a > 0.0) rep.rho_fit = std::max(rep.rho_fit, (1.0 - seq.kappas[n]) / a);
  }
  for (std::size_t n = 0; n < seq.certificates.size(); ++n) {
    if (!verify_certificate(system, seq.orbits[n + 1], seq.orbits[n], seq.certificates[n]).ok) {
      rep.certificates_ok = false;
    }
  }
  const double lam0 = std::abs(rep.exponents.front());
  rep.product_threshold = 1.0 - (2.0 * rep.rho_fit / (1.0 - rep.zeta)) * lam0;
  rep.product_ok = rep.prod_kappa > rep.product_threshold || (rep.rho_fit == 0.0 && rep.prod_kappa == 1.0);
  rep.distance_first_last = distance_from_integrals(ints.front(), ints.back(), depth).value;
  rep.distance_bound = (2.0 + 4.0 * rep.rho_fit / (1.0 - rep.zeta)) * lam0 + std::ldexp(2.0, -static_cast<int>(depth));
  rep.bound_ok = rep.distance_first_last <= rep.distance_bound;
  rep.final_nonhyperbolic = std::abs(rep.exponents.back()) < tol_hyp;
  return rep;
}

namespace {

std::uint64_t window_code(const SymbolicCoord& c, int k) {
  std::uint64_t code = 0;
  for (int o = -k; o <= k; ++o) code = (code << 1) | c.symbol(o);
  return code;
}

}  // namespace

SupportEstimate limit_support_estimate(const SkewProductSystem& system, const GiknSequence& seq, std::size_t n,
                                       int window_cap) {
  if (!(n < seq.orbits.size())) throw PreconditionError("sequence must be longer than n");
  if (window_cap < 0 || window_cap > 31) throw PreconditionError("window cap must lie in [0, 31]");
  SupportEstimate est;
  est.window_cap = window_cap;
  for (std::size_t k = n; k < seq.orbits.size(); ++k) {
    for (std::int64_t i = 0; i < seq.orbits[k].period(); ++i) est.points.push_back(seq.orbits[k].point(i));
  }
  if (seq.orbits.size() - n < 2) return est;

  std::vector<double> dh;
  if (system.is_torus()) {
    // Direct scan; tail unions are nested so only the new orbit matters.
    std::vector<PhasePoint> tail;
    for (std::int64_t i = 0; i < seq.orbits.back().period(); ++i) tail.push_back(seq.orbits.back().point(i));
    for (std::size_t m = seq.orbits.size() - 1; m-- > n;) {
      double h = 0.0;
      for (std::int64_t i = 0; i < seq.orbits[m].period(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        const auto p = seq.orbits[m].point(i);
        for (const auto& q : tail) best = std::min(best, phase_distance(p, q));
        h = std::max(h, best);
      }
      dh.push_back(h);
      for (std::int64_t i = 0; i < seq.orbits[m].period(); ++i) tail.push_back(seq.orbits[m].point(i));
    }
  } else {
    // Exact window codes per radius, each with the sorted fibre values seen.
    std::vector<std::unordered_map<std::uint64_t, std::vector<double>>> tables(static_cast<std::size_t>(window_cap) + 1);
    auto insert = [&](const PeriodicOrbit& o) {
      for (std::int64_t i = 0; i < o.period(); ++i) {
        const auto p = o.point(i);
        for (int k = 0; k <= window_cap; ++k) tables[k][window_code(p.symbolic(), k)].push_back(p.t);
      }
      for (auto& t : tables) {
        for (auto& [code, v] : t) std::sort(v.begin(), v.end());
      }
    };
    auto fiber_gap = [](const std::vector<double>& v, double t) {
      auto it = std::lower_bound(v.begin(), v.end(), t);
      double g = std::numeric_limits<double>::infinity();
      if (it != v.end()) g = std::min(g, circle_dist(*it, t));
      if (it != v.begin()) g = std::min(g, circle_dist(*std::prev(it), t));
      g = std::min({g, circle_dist(v.front(), t), circle_dist(v.back(), t)});
      return g;
    };
    insert(seq.orbits.back());
    for (std::size_t m = seq.orbits.size() - 1; m-- > n;) {
      double h = 0.0;
      const auto& o = seq.orbits[m];
      for (std::int64_t i = 0; i < o.period(); ++i) {
        const auto p = o.point(i);
        double best = 1.0;
        for (int k = 0; k <= window_cap; ++k) {
          const auto it = tables[k].find(window_code(p.symbolic(), k));
          if (it == tables[k].end()) break;
          best = std::min(best, std::max(std::ldexp(1.0, -(k + 1)), fiber_gap(it->second, p.t)));
        }
        h = std::max(h, best);
      }
      dh.push_back(h);
      insert(o);
    }
  }
  est.hausdorff.assign(dh.rbegin(), dh.rend());
  return est;
}

}  // namespace ergoshadow
