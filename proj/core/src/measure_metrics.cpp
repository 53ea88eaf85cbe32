#include "ergoshadow/measure_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ergoshadow/errors.hpp"

namespace ergoshadow {
namespace {

constexpr int kMonomials = 2 * TestFunctionFamily::kMaxFrequency + 1;

double fiber_monomial(int slot, double t) {
  if (slot == 0) return 1.0;
  const int k = (slot + 1) / 2;
  const double arg = kTwoPi * static_cast<double>(k) * t;
  return (slot % 2 == 1) ? std::cos(arg) : std::sin(arg);
}

std::uint32_t pattern_code(const SymbolicCoord& c, int m) {
  std::uint32_t code = 0;
  for (int j = -m; j <= m; ++j) code = (code << 1) | c.symbol(j);
  return code;
}

}  // namespace

TestFunctionFamily TestFunctionFamily::torus() {
  TestFunctionFamily f;
  f.torus_ = true;
  for (int r = 1; r <= kMaxFrequency; ++r) {
    for (int k1 = -r; k1 <= r; ++k1) {
      for (int k2 = -r; k2 <= r; ++k2) {
        for (int k3 = -r; k3 <= r; ++k3) {
          if (std::max({std::abs(k1), std::abs(k2), std::abs(k3)}) != r) continue;
          const int lead = k1 != 0 ? k1 : (k2 != 0 ? k2 : k3);
          if (lead <= 0) continue;
          f.freqs_.push_back({k1, k2, k3});
        }
      }
    }
  }
  return f;
}

TestFunctionFamily TestFunctionFamily::symbolic(const ShiftBase& base) {
  TestFunctionFamily f;
  f.torus_ = false;
  std::size_t offset = 0;
  for (int m = 0; m <= kMaxLevel; ++m) {
    const int len = 2 * m + 1;
    std::vector<std::uint32_t> pats;
    for (std::uint32_t code = 0; code < (1u << len); ++code) {
      Word w(static_cast<std::size_t>(len));
      for (int j = 0; j < len; ++j) w[j] = static_cast<std::uint8_t>((code >> (len - 1 - j)) & 1u);
      if (base.admissible(w, false)) pats.push_back(code);
    }
    f.level_offsets_.push_back(offset);
    offset += pats.size() * kMonomials;
    f.patterns_.push_back(std::move(pats));
  }
  f.level_offsets_.push_back(offset);
  return f;
}

TestFunctionFamily TestFunctionFamily::for_system(const SkewProductSystem& system) {
  return system.is_torus() ? torus() : symbolic(system.shift_base());
}

std::size_t TestFunctionFamily::size() const {
  return torus_ ? 2 * freqs_.size() : level_offsets_.back();
}

TestFunction TestFunctionFamily::at(std::size_t index) const {
  if (index < 1 || index > size()) throw PreconditionError("test function index out of range");
  TestFunction g;
  g.torus = torus_;
  const std::size_t z = index - 1;
  if (torus_) {
    g.k = freqs_[z / 2];
    g.sine = (z % 2) == 1;
    return g;
  }
  int m = 0;
  while (level_offsets_[m + 1] <= z) ++m;
  const std::size_t within = z - level_offsets_[m];
  g.level = m;
  g.pattern = patterns_[m][within / kMonomials];
  const int slot = static_cast<int>(within % kMonomials);
  g.freq = (slot + 1) / 2;
  g.sine = slot != 0 && slot % 2 == 0;
  return g;
}

double TestFunctionFamily::evaluate(std::size_t index, const PhasePoint& p) const {
  const TestFunction g = at(index);
  if (p.is_torus() != torus_) throw PhaseSpaceMismatch("point and test family on different phase spaces");
  if (torus_) {
    const auto& b = p.torus();
    const double arg = kTwoPi * (g.k[0] * b.x1 + g.k[1] * b.x2 + g.k[2] * p.t);
    return g.sine ? std::sin(arg) : std::cos(arg);
  }
  if (pattern_code(p.symbolic(), g.level) != g.pattern) return 0.0;
  const int slot = g.freq == 0 ? 0 : (g.sine ? 2 * g.freq : 2 * g.freq - 1);
  return fiber_monomial(slot, p.t);
}

std::vector<double> TestFunctionFamily::integrals(const EmpiricalMeasure& mu, std::size_t depth) const {
  depth = std::min(depth, size());
  std::vector<double> out(depth, 0.0);
  if (mu.is_torus() != torus_) throw PhaseSpaceMismatch("measure and test family on different phase spaces");
  if (torus_) {
    const std::size_t nvec = (depth + 1) / 2;
    for (const auto& atom : mu.atoms()) {
      const auto& b = atom.point.torus();
      for (std::size_t v = 0; v < nvec; ++v) {
        const auto& k = freqs_[v];
        const double arg = kTwoPi * (k[0] * b.x1 + k[1] * b.x2 + k[2] * atom.point.t);
        out[2 * v] += atom.weight * std::cos(arg);
        if (2 * v + 1 < depth) out[2 * v + 1] += atom.weight * std::sin(arg);
      }
    }
    return out;
  }

  int top = 0;
  while (top < kMaxLevel && level_offsets_[top + 1] < depth) ++top;
  std::vector<std::vector<int>> rank(static_cast<std::size_t>(top) + 1);
  for (int m = 0; m <= top; ++m) {
    rank[m].assign(std::size_t{1} << (2 * m + 1), -1);
    for (std::size_t r = 0; r < patterns_[m].size(); ++r) rank[m][patterns_[m][r]] = static_cast<int>(r);
  }
  std::array<double, kMonomials> mono{};
  for (const auto& atom : mu.atoms()) {
    const auto& c = atom.point.symbolic();
    for (int s = 0; s < kMonomials; ++s) mono[s] = fiber_monomial(s, atom.point.t);
    for (int m = 0; m <= top; ++m) {
      const int r = rank[m][pattern_code(c, m)];
      if (r < 0) continue;
      const std::size_t base = level_offsets_[m] + static_cast<std::size_t>(r) * kMonomials;
      for (int s = 0; s < kMonomials; ++s) {
        const std::size_t idx = base + static_cast<std::size_t>(s);
        if (idx >= depth) break;
        out[idx] += atom.weight * mono[s];
      }
    }
  }
  return out;
}

double integrate(const TestFunctionFamily& family, std::size_t index, const EmpiricalMeasure& mu) {
  double s = 0.0;
  for (const auto& atom : mu.atoms()) s += atom.weight * family.evaluate(index, atom.point);
  return s;
}

MeasureDistanceReport distance_from_integrals(const std::vector<double>& a, const std::vector<double>& b,
                                              std::size_t depth) {
  depth = std::min({depth, a.size(), b.size()});
  MeasureDistanceReport r;
  r.depth = depth;
  for (std::size_t i = 0; i < depth; ++i) {
    r.value += std::ldexp(std::abs(a[i] - b[i]), -static_cast<int>(i + 1));
  }
  r.tail_bound = std::ldexp(2.0, -static_cast<int>(depth));
  return r;
}

MeasureDistanceReport weak_star_distance(const TestFunctionFamily& family, const EmpiricalMeasure& mu,
                                         const EmpiricalMeasure& nu, std::size_t depth) {
  if (depth < 1) throw PreconditionError("truncation depth must be at least 1");
  if (mu.is_torus() != nu.is_torus()) throw PhaseSpaceMismatch("measures on different phase spaces");
  return distance_from_integrals(family.integrals(mu, depth), family.integrals(nu, depth), depth);
}

MeasureDistanceReport weak_star_distance(const SkewProductSystem& system, const EmpiricalMeasure& mu,
                                         const EmpiricalMeasure& nu, std::size_t depth) {
  return weak_star_distance(TestFunctionFamily::for_system(system), mu, nu, depth);
}

double center_exponent(const SkewProductSystem& system, const EmpiricalMeasure& mu) {
  double s = 0.0;
  for (const auto& atom : mu.atoms()) s += atom.weight * center_log_derivative(system, atom.point);
  return s;
}

const char* to_string(IndexClass c) {
  switch (c) {
    case IndexClass::index_i:
      return "index_i";
    case IndexClass::index_i_plus_1:
      return "index_i+1";
    case IndexClass::nonhyperbolic:
      return "nonhyperbolic";
  }
  return "nonhyperbolic";
}

IndexClass classify_exponent(double lambda_c, double tol_hyp) {
  if (!(tol_hyp > 0.0)) throw PreconditionError("tol_hyp must be positive");
  if (lambda_c > tol_hyp) return IndexClass::index_i;
  if (lambda_c < -tol_hyp) return IndexClass::index_i_plus_1;
  return IndexClass::nonhyperbolic;
}

IndexClass classify_index(const SkewProductSystem& system, const EmpiricalMeasure& mu, double tol_hyp) {
  return classify_exponent(center_exponent(system, mu), tol_hyp);
}

EmpiricalMeasure convex_combine(const std::vector<std::pair<double, EmpiricalMeasure>>& terms) {
  if (terms.empty()) throw PreconditionError("convex combination needs at least one term");
  double total = 0.0;
  for (const auto& [w, mu] : terms) {
    if (!(w >= 0.0)) throw PreconditionError("negative convex weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw PreconditionError("convex weights must sum to 1");
  std::vector<Atom> atoms;
  for (const auto& [w, mu] : terms) {
    if (w == 0.0) continue;
    for (const auto& a : mu.atoms()) atoms.push_back({a.point, w * a.weight});
  }
  return EmpiricalMeasure(std::move(atoms));
}

}  // namespace ergoshadow
