#include "ergoshadow/orbit_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ergoshadow/errors.hpp"
#include "ergoshadow/fiber_cycle.hpp"

namespace ergoshadow {

__extension__ typedef __int128 i128;
namespace {

std::int64_t mod(std::int64_t a, std::int64_t m) {
  std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

std::int64_t mod128(i128 a, std::int64_t m) {
  i128 r = a % m;
  if (r < 0) r += m;
  return static_cast<std::int64_t>(r);
}

// x*a + y*b = g >= 0
std::int64_t ext_gcd(std::int64_t a, std::int64_t b, std::int64_t& x, std::int64_t& y) {
  std::int64_t old_r = a, r = b, old_s = 1, s = 0, old_t = 0, t = 1;
  while (r != 0) {
    const std::int64_t q = old_r / r;
    std::tie(old_r, r) = std::make_pair(r, old_r - q * r);
    std::tie(old_s, s) = std::make_pair(s, old_s - q * s);
    std::tie(old_t, t) = std::make_pair(t, old_t - q * t);
  }
  if (old_r < 0) {
    old_r = -old_r;
    old_s = -old_s;
    old_t = -old_t;
  }
  x = old_s;
  y = old_t;
  return old_r;
}

}  // namespace

std::vector<RationalTorusPoint> enumerate_base_periodic(const TorusBase& base, int n,
                                                        std::int64_t budget) {
  if (n < 1) throw PreconditionError("period must be at least 1");
  if (n > 40) throw BudgetExceeded("period too large for exact lattice arithmetic");
  auto m = base.power(n);
  m[0][0] -= 1;
  m[1][1] -= 1;
  const std::int64_t det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const std::int64_t d = std::abs(det);
  if (d == 0) throw PreconditionError("A^n - I is singular");
  if (d > budget) throw BudgetExceeded("periodic point count exceeds budget");

  // Column Hermite form of the lattice spanned by the columns of M.
  std::int64_t x = 0, y = 0;
  std::int64_t g = ext_gcd(m[0][0], m[0][1], x, y);
  std::int64_t h21 = 0, h22 = 0;
  if (g == 0) throw PreconditionError("degenerate lattice");
  {
    const std::int64_t c1b = x * m[1][0] + y * m[1][1];
    const std::int64_t c2b = (-m[0][1] / g) * m[1][0] + (m[0][0] / g) * m[1][1];
    h22 = std::abs(c2b);
    h21 = mod(c1b, h22);
  }
  (void)h21;
  const std::int64_t h11 = g;

  std::vector<RationalTorusPoint> pts;
  pts.reserve(static_cast<std::size_t>(d));
  for (std::int64_t k1 = 0; k1 < h11; ++k1) {
    for (std::int64_t k2 = 0; k2 < h22; ++k2) {
      // x = adj(M) k / det
      i128 n1 = static_cast<i128>(m[1][1]) * k1 - static_cast<i128>(m[0][1]) * k2;
      i128 n2 = -static_cast<i128>(m[1][0]) * k1 + static_cast<i128>(m[0][0]) * k2;
      if (det < 0) {
        n1 = -n1;
        n2 = -n2;
      }
      pts.push_back({mod128(n1, d), mod128(n2, d), d});
    }
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

std::vector<Word> enumerate_base_periodic(const ShiftBase& base, int n, bool dedup_rotations,
                                          std::int64_t budget) {
  if (n < 1) throw PreconditionError("period must be at least 1");
  if (n > 40 || (std::int64_t{1} << n) > budget) throw BudgetExceeded("word count exceeds budget");
  std::vector<Word> out;
  for (std::int64_t code = 0; code < (std::int64_t{1} << n); ++code) {
    Word w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[i] = static_cast<std::uint8_t>((code >> (n - 1 - i)) & 1);
    if (!base.admissible(w, true)) continue;
    if (dedup_rotations && minimal_rotation(w) != w) continue;
    out.push_back(std::move(w));
  }
  return out;
}

RationalTorusPoint apply_exact(const TorusBase& base, const RationalTorusPoint& p) {
  const auto& m = base.matrix();
  const std::int64_t d = p.denominator;
  const i128 a = static_cast<i128>(m[0][0]) * p.i + static_cast<i128>(m[0][1]) * p.j;
  const i128 b = static_cast<i128>(m[1][0]) * p.i + static_cast<i128>(m[1][1]) * p.j;
  return {mod128(a, d), mod128(b, d), d};
}

Word minimal_rotation(const Word& w) {
  Word best = w;
  Word r = w;
  for (std::size_t k = 1; k < w.size(); ++k) {
    std::rotate(r.begin(), r.begin() + 1, r.end());
    if (r < best) best = r;
  }
  return best;
}

bool is_primitive(const Word& w) {
  const std::size_t n = w.size();
  for (std::size_t p = 1; p < n; ++p) {
    if (n % p != 0) continue;
    bool rep = true;
    for (std::size_t i = p; i < n && rep; ++i) rep = w[i] == w[i - p];
    if (rep) return false;
  }
  return true;
}

TorusCycle torus_cycle(const TorusBase& base, const RationalTorusPoint& p, int n) {
  TorusCycle c;
  c.points.reserve(static_cast<std::size_t>(n));
  RationalTorusPoint q = p;
  for (int i = 0; i < n; ++i) {
    c.points.push_back(q);
    q = apply_exact(base, q);
  }
  return c;
}

std::int64_t cycle_length(const BaseCycle& cycle) {
  if (const auto* w = std::get_if<Word>(&cycle)) return static_cast<std::int64_t>(w->size());
  return static_cast<std::int64_t>(std::get<TorusCycle>(cycle).points.size());
}

std::vector<CircleFiberMap> fiber_factors(const SkewProductSystem& system, const BaseCycle& cycle) {
  std::vector<CircleFiberMap> out;
  if (const auto* w = std::get_if<Word>(&cycle)) {
    if (system.is_torus()) throw PhaseSpaceMismatch("symbolic cycle given to a torus system");
    out.reserve(w->size());
    for (auto s : *w) out.push_back(system.symbol_map(s));
  } else {
    if (!system.is_torus()) throw PhaseSpaceMismatch("torus cycle given to a symbolic system");
    const auto& c = std::get<TorusCycle>(cycle);
    out.reserve(c.points.size());
    for (const auto& p : c.points) out.push_back(system.torus_fiber_map(p.x1()));
  }
  return out;
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::attracting:
      return "attracting";
    case Stability::repelling:
      return "repelling";
    case Stability::neutral:
      return "neutral";
  }
  return "neutral";
}

Stability stability_from_log_multiplier(double log_multiplier) {
  if (std::abs(std::expm1(log_multiplier)) < 1e-8) return Stability::neutral;
  return log_multiplier > 0.0 ? Stability::repelling : Stability::attracting;
}

double compose_lift(const std::vector<CircleFiberMap>& factors, double t) {
  for (const auto& f : factors) t = f.lift(t);
  return t;
}

double compose_log_derivative(const std::vector<CircleFiberMap>& factors, double t) {
  double s = 0.0;
  for (const auto& f : factors) {
    s += f.log_derivative(t);
    t = f.lift(t);
  }
  return s;
}

FixedPointSearch find_fiber_fixed_points(const std::vector<CircleFiberMap>& factors,
                                         const FixedPointOptions& options) {
  FixedPointSearch out;
  if (factors.empty()) throw PreconditionError("empty return map");
  if (options.grid < 2) throw PreconditionError("grid must have at least 2 points");
  const bool identity = std::all_of(factors.begin(), factors.end(), [](const CircleFiberMap& f) {
    return f.a() == 0.0 && f.beta() == 0.0;
  });
  if (identity) {
    out.degenerate = true;
    out.note = "identity return map: every point is fixed";
    return out;
  }

  const bool windowed = options.window.has_value();
  const double lo = windowed ? options.window->lo : 0.0;
  const double span = windowed ? options.window->length() : 1.0;
  const int n = options.grid;
  // Windowed grids include both ends; the full circle wraps.
  const int cells = windowed ? n - 1 : n;
  std::vector<double> ts(static_cast<std::size_t>(cells) + 1);
  std::vector<double> disp(ts.size());
  for (int j = 0; j <= cells; ++j) {
    ts[j] = lo + span * static_cast<double>(j) / static_cast<double>(cells);
    if (!windowed && j == cells) {
      disp[j] = disp[0];
    } else {
      disp[j] = compose_lift(factors, ts[j]) - ts[j];
    }
  }

  std::vector<double> roots;
  auto refine = [&](double a, double b, double k) {
    double da = compose_lift(factors, a) - a - k;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      const double dm = compose_lift(factors, m) - m - k;
      if (dm == 0.0) return m;
      if ((dm < 0.0) == (da < 0.0)) {
        a = m;
        da = dm;
      } else {
        b = m;
      }
      if (b - a < 1e-15 && std::abs(dm) < options.tol) break;
      if (b - a < 1e-16) break;
    }
    double t = 0.5 * (a + b);
    // Newton polish, kept inside the bracket.
    for (int it = 0; it < 3; ++it) {
      const double lm = compose_log_derivative(factors, t);
      const double slope = std::exp(lm) - 1.0;
      if (std::abs(slope) < 1e-8) break;
      const double next = t - (compose_lift(factors, t) - t - k) / slope;
      if (!(next >= a - 1e-15 && next <= b + 1e-15)) break;
      t = next;
    }
    return t;
  };

  for (int j = 0; j < cells; ++j) {
    const double d0 = disp[j];
    const double d1 = disp[j + 1];
    const double kmin = std::ceil(std::min(d0, d1));
    const double kmax = std::floor(std::max(d0, d1));
    for (double k = kmin; k <= kmax; k += 1.0) {
      if (d0 == k) {
        roots.push_back(ts[j]);
      } else if (d1 == k) {
        if (windowed && j + 1 == cells) roots.push_back(ts[j + 1]);
      } else {
        roots.push_back(refine(ts[j], ts[j + 1], k));
      }
    }
  }

  std::vector<double> canon;
  for (double r : roots) canon.push_back(windowed ? r : wrap01(r));
  std::sort(canon.begin(), canon.end());
  std::vector<double> unique;
  for (double r : canon) {
    if (unique.empty() || circle_dist(unique.back(), r) > 1e-9) unique.push_back(r);
  }
  if (!windowed && unique.size() > 1 && circle_dist(unique.front(), unique.back()) <= 1e-9) {
    unique.pop_back();
  }
  for (double r : unique) {
    FiberFixedPoint fp;
    fp.t = wrap01(r);
    fp.log_multiplier = compose_log_derivative(factors, fp.t);
    fp.stability = stability_from_log_multiplier(fp.log_multiplier);
    out.points.push_back(fp);
  }
  if (out.points.empty()) out.note = "no fixed point: displacement never meets an integer";
  return out;
}

FixedPointSearch find_fiber_fixed_points(const SkewProductSystem& system, const BaseCycle& cycle,
                                         const FixedPointOptions& options) {
  return find_fiber_fixed_points(fiber_factors(system, cycle), options);
}

PhasePoint PeriodicOrbit::point(std::int64_t i) const {
  const std::int64_t n = period();
  const std::int64_t r = ((i % n) + n) % n;
  if (const auto* c = std::get_if<TorusCycle>(&base)) {
    const auto& q = c->points[static_cast<std::size_t>(r)];
    return PhasePoint{TorusCoord{q.x1(), q.x2()}, fiber[static_cast<std::size_t>(r)]};
  }
  return PhasePoint{SymbolicCoord{itinerary, r}, fiber[static_cast<std::size_t>(r)]};
}

std::string PeriodicOrbit::itinerary_string() const {
  std::ostringstream os;
  if (const auto* c = std::get_if<TorusCycle>(&base)) {
    const auto& q = c->points.front();
    os << q.i << "/" << q.denominator << ";" << q.j << "/" << q.denominator;
  } else {
    for (auto s : std::get<Word>(base)) os << static_cast<int>(s);
  }
  return os.str();
}

namespace {

PeriodicOrbit finish_orbit(const SkewProductSystem& system, BaseCycle base,
                           std::vector<double> fiber, const std::vector<CircleFiberMap>& factors) {
  PeriodicOrbit orbit;
  if (const auto* w = std::get_if<Word>(&base)) orbit.itinerary = Itinerary::periodic(*w);
  orbit.base = std::move(base);
  orbit.fiber = std::move(fiber);
  double s = 0.0;
  for (std::size_t i = 0; i < factors.size(); ++i) s += factors[i].log_derivative(orbit.fiber[i]);
  orbit.lambda_c = s / static_cast<double>(factors.size());
  orbit.stability = stability_from_log_multiplier(s);
  (void)system;
  return orbit;
}

}  // namespace

PeriodicOrbit make_periodic_orbit(const SkewProductSystem& system, BaseCycle base, double t_star) {
  const auto factors = fiber_factors(system, base);
  std::vector<double> fiber(factors.size());
  double t = wrap01(t_star);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    fiber[i] = t;
    t = factors[i](t);
  }
  if (circle_dist(t, fiber[0]) > 1e-12) {
    fiber = solve_fiber_cycle(factors, std::move(fiber)).fiber;
  }
  return finish_orbit(system, std::move(base), std::move(fiber), factors);
}

PeriodicOrbit make_periodic_orbit(const SkewProductSystem& system, BaseCycle base,
                                  std::vector<double> fiber) {
  const auto factors = fiber_factors(system, base);
  if (fiber.size() != factors.size()) throw PreconditionError("fibre sequence length mismatch");
  if (fiber_cycle_residual(factors, fiber) > 1e-12) {
    fiber = solve_fiber_cycle(factors, std::move(fiber)).fiber;
  }
  return finish_orbit(system, std::move(base), std::move(fiber), factors);
}

std::vector<PeriodicOrbit> periodic_orbits(const SkewProductSystem& system, int n,
                                           std::int64_t budget, const FixedPointOptions& options) {
  std::vector<BaseCycle> cycles;
  if (system.is_torus()) {
    const auto& base = system.torus_base();
    const auto pts = enumerate_base_periodic(base, n, budget);
    std::set<RationalTorusPoint> seen;
    for (const auto& p : pts) {
      if (seen.count(p)) continue;
      auto c = torus_cycle(base, p, n);
      std::vector<RationalTorusPoint> members;
      RationalTorusPoint q = p;
      do {
        members.push_back(q);
        q = apply_exact(base, q);
      } while (!(q == p));
      for (const auto& mbr : members) seen.insert(mbr);
      if (static_cast<int>(members.size()) != n) continue;
      // p is the smallest member because pts is sorted and unseen.
      cycles.emplace_back(std::move(c));
    }
  } else {
    for (auto& w : enumerate_base_periodic(system.shift_base(), n, true, budget)) {
      if (is_primitive(w)) cycles.emplace_back(std::move(w));
    }
  }

  std::vector<PeriodicOrbit> out;
  for (auto& cycle : cycles) {
    const auto search = find_fiber_fixed_points(system, cycle, options);
    if (search.degenerate) {
      // Whole fibre fixed; one neutral representative at t = 0.
      out.push_back(make_periodic_orbit(system, cycle, 0.0));
      out.back().stability = Stability::neutral;
      continue;
    }
    for (const auto& fp : search.points) out.push_back(make_periodic_orbit(system, cycle, fp.t));
  }
  return out;
}

double stepwise_residual(const SkewProductSystem& system, const PeriodicOrbit& orbit) {
  return fiber_cycle_residual(fiber_factors(system, orbit.base), orbit.fiber);
}

double reiteration_residual(const SkewProductSystem& system, const PeriodicOrbit& orbit) {
  const PhasePoint p = orbit.point(0);
  return phase_distance(skew_apply(system, p, orbit.period()), p);
}

OrbitSegment make_segment(const SkewProductSystem& system, const PhasePoint& start, std::int64_t n) {
  if (n < 1) throw PreconditionError("segment length must be at least 1");
  if (n > system.iteration_budget()) throw BudgetExceeded("iteration budget exceeded");
  OrbitSegment seg;
  seg.points.reserve(static_cast<std::size_t>(n));
  seg.log_derivs.reserve(static_cast<std::size_t>(n));
  PhasePoint p = start;
  for (std::int64_t i = 0; i < n; ++i) {
    seg.points.push_back(p);
    seg.log_derivs.push_back(center_log_derivative(system, p));
    if (i + 1 < n) p = skew_apply(system, p, 1);
  }
  return seg;
}

OrbitSegment segment_from_points(const SkewProductSystem& system, std::vector<PhasePoint> points) {
  if (points.empty()) throw PreconditionError("segment length must be at least 1");
  OrbitSegment seg;
  seg.log_derivs.reserve(points.size());
  for (const auto& p : points) seg.log_derivs.push_back(center_log_derivative(system, p));
  seg.points = std::move(points);
  return seg;
}

namespace {

double neumaier_sum(const std::vector<Atom>& atoms) {
  double s = 0.0;
  double c = 0.0;
  for (const auto& a : atoms) {
    const double t = s + a.weight;
    if (std::abs(s) >= std::abs(a.weight)) {
      c += (s - t) + a.weight;
    } else {
      c += (a.weight - t) + s;
    }
    s = t;
  }
  return s + c;
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw PreconditionError("empirical measure needs at least one atom");
  const bool torus = atoms_.front().point.is_torus();
  for (const auto& a : atoms_) {
    if (!(a.weight >= 0.0)) throw PreconditionError("negative atom weight");
    if (a.point.is_torus() != torus) throw PhaseSpaceMismatch("atoms on different phase spaces");
  }
  if (std::abs(neumaier_sum(atoms_) - 1.0) > 1e-12) {
    throw PreconditionError("atom weights must sum to 1");
  }
}

double EmpiricalMeasure::total_mass() const { return neumaier_sum(atoms_); }

EmpiricalMeasure empirical_measure(const OrbitSegment& segment) {
  return empirical_measure(segment, 0, segment.length());
}

EmpiricalMeasure empirical_measure(const OrbitSegment& segment, std::int64_t from, std::int64_t to) {
  if (!(from >= 0 && to <= segment.length() && to > from)) {
    throw PreconditionError("segment range must be non-empty");
  }
  const double w = 1.0 / static_cast<double>(to - from);
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(to - from));
  for (std::int64_t i = from; i < to; ++i) atoms.push_back({segment.points[i], w});
  return EmpiricalMeasure(std::move(atoms));
}

EmpiricalMeasure empirical_measure(const PeriodicOrbit& orbit) {
  const double w = 1.0 / static_cast<double>(orbit.period());
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(orbit.period()));
  for (std::int64_t i = 0; i < orbit.period(); ++i) atoms.push_back({orbit.point(i), w});
  return EmpiricalMeasure(std::move(atoms));
}

}  // namespace ergoshadow
