#include "ergoshadow/model_systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ergoshadow/errors.hpp"

namespace ergoshadow {

CircleFiberMap::CircleFiberMap(double beta, double a) : beta_(wrap01(beta)), a_(a) {
  if (!(std::abs(a) < 1.0)) {
    throw PreconditionError("fibre amplitude must satisfy |a| < 1");
  }
}

double CircleFiberMap::inverse_lift(double y) const {
  const double r = std::abs(a_) / kTwoPi;
  double lo = y - beta_ - r;
  double hi = y - beta_ + r;
  double s = y - beta_;
  for (int it = 0; it < 100; ++it) {
    const double g = lift(s) - y;
    if (g == 0.0) return s;
    if (g > 0.0) {
      hi = s;
    } else {
      lo = s;
    }
    double next = s - g / derivative(s);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-17 * std::max(1.0, std::abs(s)) || hi - lo < 1e-16) {
      return next;
    }
    s = next;
  }
  return s;
}

TorusBase::TorusBase() : TorusBase(Matrix{{{2, 1}, {1, 1}}}) {}

TorusBase::TorusBase(const Matrix& m) : m_(m) {
  const std::int64_t det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  if (det != 1) throw PreconditionError("torus matrix must have determinant 1");
  const double tr = static_cast<double>(trace());
  if (std::abs(tr) <= 2.0) throw PreconditionError("matrix not hyperbolic: |trace| <= 2");
  const double disc = std::sqrt(tr * tr - 4.0);
  lambda_u_ = (std::abs(tr) + disc) / 2.0;
  lambda_s_ = 1.0 / lambda_u_;
  const double sign = tr > 0 ? 1.0 : -1.0;
  auto eigvec = [&](double mu) {
    double v1 = 0.0;
    double v2 = 0.0;
    if (m[0][1] != 0) {
      v1 = static_cast<double>(m[0][1]);
      v2 = mu - static_cast<double>(m[0][0]);
    } else {
      v1 = mu - static_cast<double>(m[1][1]);
      v2 = static_cast<double>(m[1][0]);
    }
    const double n = std::hypot(v1, v2);
    return std::array<double, 2>{v1 / n, v2 / n};
  };
  eu_ = eigvec(sign * lambda_u_);
  es_ = eigvec(sign * lambda_s_);
}

std::array<double, 2> TorusBase::apply(double x1, double x2) const {
  const double y1 = static_cast<double>(m_[0][0]) * x1 + static_cast<double>(m_[0][1]) * x2;
  const double y2 = static_cast<double>(m_[1][0]) * x1 + static_cast<double>(m_[1][1]) * x2;
  return {wrap01(y1), wrap01(y2)};
}

std::array<double, 2> TorusBase::apply_inverse(double x1, double x2) const {
  const double y1 = static_cast<double>(m_[1][1]) * x1 - static_cast<double>(m_[0][1]) * x2;
  const double y2 = -static_cast<double>(m_[1][0]) * x1 + static_cast<double>(m_[0][0]) * x2;
  return {wrap01(y1), wrap01(y2)};
}

TorusBase::Matrix TorusBase::power(int n) const {
  Matrix r{{{1, 0}, {0, 1}}};
  for (int i = 0; i < n; ++i) {
    Matrix t{};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) t[a][b] = r[a][0] * m_[0][b] + r[a][1] * m_[1][b];
    }
    r = t;
  }
  return r;
}

ShiftBase::ShiftBase() : allowed_{{{true, true}, {true, true}}} {}

ShiftBase::ShiftBase(const Transitions& allowed) : allowed_(allowed) {
  // Primitive iff some power is strictly positive; for 2x2 the square suffices.
  std::array<std::array<int, 2>, 2> sq{};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      sq[a][b] = (allowed[a][0] && allowed[0][b]) || (allowed[a][1] && allowed[1][b]);
    }
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      if (!sq[a][b]) throw PreconditionError("transition matrix is not primitive");
    }
  }
}

bool ShiftBase::is_full() const {
  return allowed_[0][0] && allowed_[0][1] && allowed_[1][0] && allowed_[1][1];
}

bool ShiftBase::admissible(const Word& w, bool cyclic) const {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 1) return false;
    if (i + 1 < w.size() && !allowed_[w[i]][w[i + 1]]) return false;
  }
  if (cyclic && !w.empty() && !allowed_[w.back()][w.front()]) return false;
  return true;
}

std::shared_ptr<const Itinerary> Itinerary::periodic(Word word) {
  if (word.empty()) throw PreconditionError("periodic itinerary needs a non-empty word");
  auto it = std::shared_ptr<Itinerary>(new Itinerary());
  it->tail_ = std::move(word);
  it->periodic_ = true;
  return it;
}

std::shared_ptr<const Itinerary> Itinerary::spliced(Word history, Word prefix, Word tail) {
  if (tail.empty()) throw PreconditionError("itinerary tail must be non-empty");
  // Canonical form: absorb prefix symbols that already continue the tail backwards.
  while (!prefix.empty() && prefix.back() == tail.back()) {
    std::rotate(tail.rbegin(), tail.rbegin() + 1, tail.rend());
    prefix.pop_back();
  }
  if (history.empty() && prefix.empty()) return periodic(std::move(tail));
  auto it = std::shared_ptr<Itinerary>(new Itinerary());
  it->history_ = std::move(history);
  it->prefix_ = std::move(prefix);
  it->tail_ = std::move(tail);
  return it;
}

bool Itinerary::known(std::int64_t i) const {
  if (periodic_) return true;
  return i >= -static_cast<std::int64_t>(history_.size());
}

std::uint8_t Itinerary::at(std::int64_t i) const {
  const auto n = static_cast<std::int64_t>(tail_.size());
  if (periodic_) {
    std::int64_t r = i % n;
    if (r < 0) r += n;
    return tail_[static_cast<std::size_t>(r)];
  }
  const auto p = static_cast<std::int64_t>(prefix_.size());
  if (i >= p) return tail_[static_cast<std::size_t>((i - p) % n)];
  if (i >= 0) return prefix_[static_cast<std::size_t>(i)];
  const auto h = static_cast<std::int64_t>(history_.size());
  if (i < -h) throw WindowExhausted("representation window exhausted");
  return history_[static_cast<std::size_t>(h + i)];
}

PhasePoint torus_point(double x1, double x2, double t) {
  return PhasePoint{TorusCoord{wrap01(x1), wrap01(x2)}, wrap01(t)};
}

PhasePoint symbolic_point(std::shared_ptr<const Itinerary> seq, std::int64_t origin, double t) {
  if (seq->is_periodic()) {
    const std::int64_t n = seq->period();
    origin %= n;
    if (origin < 0) origin += n;
  }
  return PhasePoint{SymbolicCoord{std::move(seq), origin}, wrap01(t)};
}

SkewProductSystem SkewProductSystem::torus(TorusBase base, double a, double beta,
                                           Modulation modulation) {
  SkewProductSystem s;
  CircleFiberMap check(beta, a);
  s.base_ = std::move(base);
  s.a_ = a;
  s.beta_ = check.beta();
  s.modulation_ = modulation;
  const auto& tb = s.torus_base();
  if (!(s.sup_fiber_derivative() < tb.lambda_u() && s.inf_fiber_derivative() > tb.lambda_s())) {
    throw ConfigError("partial hyperbolicity margin fails: fibre derivative range overlaps base rates");
  }
  return s;
}

SkewProductSystem SkewProductSystem::shift(ShiftBase base, CircleFiberMap f0, CircleFiberMap f1) {
  SkewProductSystem s;
  s.base_ = std::move(base);
  s.maps_ = {f0, f1};
  return s;
}

double SkewProductSystem::amplitude_at(double x1) const {
  if (modulation_ == Modulation::cos_x1) return a_ * std::cos(kTwoPi * x1);
  return a_;
}

CircleFiberMap SkewProductSystem::torus_fiber_map(double x1) const {
  return CircleFiberMap(beta_, amplitude_at(x1));
}

CircleFiberMap SkewProductSystem::fiber_map_at(const PhasePoint& p) const {
  if (is_torus()) {
    if (!p.is_torus()) throw PhaseSpaceMismatch("symbolic point given to a torus system");
    return torus_fiber_map(p.torus().x1);
  }
  if (p.is_torus()) throw PhaseSpaceMismatch("torus point given to a symbolic system");
  return maps_[p.symbolic().symbol()];
}

double SkewProductSystem::sup_fiber_derivative() const {
  if (is_torus()) return 1.0 + std::abs(a_);
  return 1.0 + std::max(std::abs(maps_[0].a()), std::abs(maps_[1].a()));
}

double SkewProductSystem::inf_fiber_derivative() const {
  if (is_torus()) return 1.0 - std::abs(a_);
  return 1.0 - std::max(std::abs(maps_[0].a()), std::abs(maps_[1].a()));
}

SkewProductSystem default_torus_system() {
  return SkewProductSystem::torus(TorusBase(), 0.5, 0.0, Modulation::cos_x1);
}

SkewProductSystem default_symbolic_system() {
  return SkewProductSystem::shift(ShiftBase(), CircleFiberMap(0.0, -0.5), CircleFiberMap(0.0, 0.5));
}

PhasePoint skew_apply(const SkewProductSystem& system, const PhasePoint& p, std::int64_t steps) {
  if (std::abs(steps) > system.iteration_budget()) throw BudgetExceeded("iteration budget exceeded");
  if (system.is_torus()) {
    if (!p.is_torus()) throw PhaseSpaceMismatch("symbolic point given to a torus system");
    const auto& base = system.torus_base();
    double x1 = p.torus().x1;
    double x2 = p.torus().x2;
    double t = p.t;
    for (std::int64_t i = 0; i < steps; ++i) {
      t = system.torus_fiber_map(x1)(t);
      const auto y = base.apply(x1, x2);
      x1 = y[0];
      x2 = y[1];
    }
    for (std::int64_t i = 0; i > steps; --i) {
      const auto y = base.apply_inverse(x1, x2);
      x1 = y[0];
      x2 = y[1];
      t = system.torus_fiber_map(x1).inverse(t);
    }
    return PhasePoint{TorusCoord{x1, x2}, t};
  }
  if (p.is_torus()) throw PhaseSpaceMismatch("torus point given to a symbolic system");
  const auto& sc = p.symbolic();
  std::int64_t origin = sc.origin;
  double t = p.t;
  for (std::int64_t i = 0; i < steps; ++i) {
    t = system.symbol_map(sc.seq->at(origin))(t);
    ++origin;
  }
  for (std::int64_t i = 0; i > steps; --i) {
    --origin;
    t = system.symbol_map(sc.seq->at(origin)).inverse(t);
  }
  return symbolic_point(sc.seq, origin, t);
}

double center_log_derivative(const SkewProductSystem& system, const PhasePoint& p) {
  return system.fiber_map_at(p).log_derivative(p.t);
}

BundleLogRates bundle_log_rates(const SkewProductSystem& system, const PhasePoint& p) {
  BundleLogRates r;
  r.c = center_log_derivative(system, p);
  if (system.is_torus()) {
    r.ss = std::log(system.torus_base().lambda_s());
    r.uu = std::log(system.torus_base().lambda_u());
  } else {
    r.ss = std::log(SkewProductSystem::kSymbolicContraction);
    r.uu = std::log(SkewProductSystem::kSymbolicExpansion);
  }
  return r;
}

std::pair<double, double> base_cocycle_rates(const TorusBase& base, int n) {
  if (n < 1) throw PreconditionError("n must be at least 1");
  return {std::pow(base.lambda_s(), n), std::pow(base.lambda_u(), n)};
}

double symbolic_base_distance(const SymbolicCoord& a, const SymbolicCoord& b, int window) {
  for (int k = 0; k <= window; ++k) {
    for (int sgn : {1, -1}) {
      if (k == 0 && sgn == -1) continue;
      const std::int64_t ia = a.origin + sgn * k;
      const std::int64_t ib = b.origin + sgn * k;
      if (!a.seq->known(ia) || !b.seq->known(ib) || a.seq->at(ia) != b.seq->at(ib)) {
        return std::ldexp(1.0, -k);
      }
    }
  }
  return 0.0;
}

double phase_distance(const PhasePoint& p, const PhasePoint& q) {
  if (p.is_torus() != q.is_torus()) throw PhaseSpaceMismatch("points live on different phase spaces");
  const double dt = circle_dist(p.t, q.t);
  if (p.is_torus()) {
    return std::max({circle_dist(p.torus().x1, q.torus().x1), circle_dist(p.torus().x2, q.torus().x2), dt});
  }
  return std::max(symbolic_base_distance(p.symbolic(), q.symbolic()), dt);
}

CoveringCertificate blender_covering_check(const CircleFiberMap& f0, const CircleFiberMap& f1,
                                           const Arc& arc, double margin) {
  const double len = arc.length();
  if (!(len > 0.0 && len < 1.0)) throw PreconditionError("degenerate arc");
  if (!(margin > 0.0) || !(margin < len / 2.0)) {
    throw PreconditionError("margin must lie in (0, arc length / 2)");
  }
  CoveringCertificate cert;
  cert.arc = arc;
  cert.shrunk = {arc.lo + margin, arc.hi - margin};
  cert.images[0] = {f0.lift(cert.shrunk.lo), f0.lift(cert.shrunk.hi)};
  cert.images[1] = {f1.lift(cert.shrunk.lo), f1.lift(cert.shrunk.hi)};

  std::vector<Arc> pieces;
  for (const auto& img : cert.images) {
    const double base = std::floor(arc.lo - img.hi);
    for (int j = 0; j <= 3; ++j) {
      const Arc shifted{img.lo + base + j, img.hi + base + j};
      if (shifted.hi >= arc.lo && shifted.lo <= arc.hi) pieces.push_back(shifted);
    }
  }
  std::sort(pieces.begin(), pieces.end(), [](const Arc& x, const Arc& y) { return x.lo < y.lo; });
  double covered = arc.lo;
  for (const auto& piece : pieces) {
    if (piece.lo > covered) {
      cert.uncovered = Arc{covered, std::min(piece.lo, arc.hi)};
      return cert;
    }
    covered = std::max(covered, piece.hi);
    if (covered >= arc.hi) break;
  }
  if (covered < arc.hi) {
    cert.uncovered = Arc{covered, arc.hi};
    return cert;
  }
  cert.certified = true;
  return cert;
}

bool expansion_factor_check(const CircleFiberMap& f, const Arc& region, double tau) {
  const double len = region.length();
  if (!(len > 0.0)) throw PreconditionError("degenerate region");
  const double span = std::min(len, 1.0);
  const double lip = f.second_derivative_bound();
  for (std::int64_t n = 1024; n <= (std::int64_t{1} << 20); n *= 4) {
    const double h = span / static_cast<double>(n - 1);
    double lowest = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < n; ++i) {
      lowest = std::min(lowest, f.derivative(region.lo + h * static_cast<double>(i)));
    }
    if (lowest < tau) return false;
    if (lowest - lip * h / 2.0 >= tau) return true;
  }
  return false;
}

}  // namespace ergoshadow
