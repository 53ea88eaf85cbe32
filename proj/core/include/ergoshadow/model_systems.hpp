#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ergoshadow/circle.hpp"

namespace ergoshadow {

using Word = std::vector<std::uint8_t>;

// t -> t + beta + (a / 2pi) sin(2pi t) on the circle.
class CircleFiberMap {
 public:
  CircleFiberMap() = default;
  CircleFiberMap(double beta, double a);

  double beta() const { return beta_; }
  double a() const { return a_; }

  // Value on lifts, no reduction.
  double lift(double t) const { return t + beta_ + a_ / kTwoPi * std::sin(kTwoPi * t); }
  double operator()(double t) const { return wrap01(lift(t)); }
  double derivative(double t) const { return 1.0 + a_ * std::cos(kTwoPi * t); }
  double log_derivative(double t) const { return std::log1p(a_ * std::cos(kTwoPi * t)); }
  // |f''| <= 2 pi |a|
  double second_derivative_bound() const { return kTwoPi * std::abs(a_); }

  // Solves lift(s) = y for s.
  double inverse_lift(double y) const;
  double inverse(double y) const { return wrap01(inverse_lift(y)); }

 private:
  double beta_ = 0.0;
  double a_ = 0.0;
};

class TorusBase {
 public:
  using Matrix = std::array<std::array<std::int64_t, 2>, 2>;

  TorusBase();
  explicit TorusBase(const Matrix& m);

  const Matrix& matrix() const { return m_; }
  std::int64_t trace() const { return m_[0][0] + m_[1][1]; }
  // Moduli of the eigenvalues, stable first.
  double lambda_s() const { return lambda_s_; }
  double lambda_u() const { return lambda_u_; }
  // Unit eigenvectors (stable, unstable).
  std::array<double, 2> stable_direction() const { return es_; }
  std::array<double, 2> unstable_direction() const { return eu_; }

  std::array<double, 2> apply(double x1, double x2) const;
  std::array<double, 2> apply_inverse(double x1, double x2) const;
  Matrix power(int n) const;

 private:
  Matrix m_;
  double lambda_s_ = 0.0;
  double lambda_u_ = 0.0;
  std::array<double, 2> es_{};
  std::array<double, 2> eu_{};
};

class ShiftBase {
 public:
  using Transitions = std::array<std::array<bool, 2>, 2>;

  ShiftBase();
  explicit ShiftBase(const Transitions& allowed);

  const Transitions& transitions() const { return allowed_; }
  bool allowed(std::uint8_t from, std::uint8_t to) const { return allowed_[from][to]; }
  bool is_full() const;
  // Linear admissibility of a word; cyclic also checks last -> first.
  bool admissible(const Word& w, bool cyclic) const;

 private:
  Transitions allowed_;
};

// Bi-infinite symbol sequence. Known symbols occupy [-history, prefix) and the
// periodic tail repeats from index prefix.size() onward. A sequence with no
// history and no prefix is purely periodic in both directions.
class Itinerary {
 public:
  static std::shared_ptr<const Itinerary> periodic(Word word);
  static std::shared_ptr<const Itinerary> spliced(Word history, Word prefix, Word tail);

  bool is_periodic() const { return periodic_; }
  bool known(std::int64_t i) const;
  std::uint8_t at(std::int64_t i) const;
  const Word& tail() const { return tail_; }
  const Word& prefix() const { return prefix_; }
  const Word& history() const { return history_; }
  std::int64_t period() const { return static_cast<std::int64_t>(tail_.size()); }

 private:
  Itinerary() = default;
  Word history_;
  Word prefix_;
  Word tail_;
  bool periodic_ = false;
};

struct TorusCoord {
  double x1 = 0.0;
  double x2 = 0.0;
};

struct SymbolicCoord {
  std::shared_ptr<const Itinerary> seq;
  std::int64_t origin = 0;

  std::uint8_t symbol(std::int64_t offset = 0) const { return seq->at(origin + offset); }
};

struct PhasePoint {
  std::variant<TorusCoord, SymbolicCoord> base;
  double t = 0.0;

  bool is_torus() const { return std::holds_alternative<TorusCoord>(base); }
  const TorusCoord& torus() const { return std::get<TorusCoord>(base); }
  const SymbolicCoord& symbolic() const { return std::get<SymbolicCoord>(base); }
};

PhasePoint torus_point(double x1, double x2, double t);
PhasePoint symbolic_point(std::shared_ptr<const Itinerary> seq, std::int64_t origin, double t);

enum class Modulation { none, cos_x1 };

struct BundleLogRates {
  double ss = 0.0;
  double c = 0.0;
  double uu = 0.0;
};

class SkewProductSystem {
 public:
  static SkewProductSystem torus(TorusBase base, double a, double beta, Modulation modulation);
  static SkewProductSystem shift(ShiftBase base, CircleFiberMap f0, CircleFiberMap f1);

  bool is_torus() const { return std::holds_alternative<TorusBase>(base_); }
  const TorusBase& torus_base() const { return std::get<TorusBase>(base_); }
  const ShiftBase& shift_base() const { return std::get<ShiftBase>(base_); }

  // Torus fibre family parameters.
  double torus_a() const { return a_; }
  double torus_beta() const { return beta_; }
  Modulation modulation() const { return modulation_; }
  // Shift fibre maps.
  const CircleFiberMap& symbol_map(std::uint8_t s) const { return maps_[s]; }

  double amplitude_at(double x1) const;
  CircleFiberMap fiber_map_at(const PhasePoint& p) const;
  CircleFiberMap torus_fiber_map(double x1) const;

  // Expansion proxy used for the symbolic strong bundles (contraction 1/2, expansion 2).
  static constexpr double kSymbolicContraction = 0.5;
  static constexpr double kSymbolicExpansion = 2.0;

  std::int64_t iteration_budget() const { return budget_; }
  void set_iteration_budget(std::int64_t b) { budget_ = b; }

  // sup_t f'(t) and inf_t f'(t) over all fibres.
  double sup_fiber_derivative() const;
  double inf_fiber_derivative() const;

 private:
  SkewProductSystem() = default;
  std::variant<TorusBase, ShiftBase> base_;
  double a_ = 0.0;
  double beta_ = 0.0;
  Modulation modulation_ = Modulation::none;
  std::array<CircleFiberMap, 2> maps_{};
  std::int64_t budget_ = 100'000'000;
};

SkewProductSystem default_torus_system();
SkewProductSystem default_symbolic_system();

PhasePoint skew_apply(const SkewProductSystem& system, const PhasePoint& p, std::int64_t steps);
double center_log_derivative(const SkewProductSystem& system, const PhasePoint& p);
BundleLogRates bundle_log_rates(const SkewProductSystem& system, const PhasePoint& p);

// (lambda_s^n, lambda_u^n)
std::pair<double, double> base_cocycle_rates(const TorusBase& base, int n);

// Sup metric on phase space. Symbolic base distance is 2^{-k}, k the smallest
// |i| with differing symbols, compared out to kSymbolicWindow.
inline constexpr int kSymbolicWindow = 30;
double phase_distance(const PhasePoint& p, const PhasePoint& q);
double symbolic_base_distance(const SymbolicCoord& a, const SymbolicCoord& b, int window = kSymbolicWindow);

// Closed arc [lo, hi] on lifts, hi - lo in (0, 1).
struct Arc {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  static Arc centered(double c, double radius) { return {c - radius, c + radius}; }
};

struct CoveringCertificate {
  bool certified = false;
  Arc arc;
  Arc shrunk;
  // Images of the shrunk arc on lifts, shifted to meet the arc.
  std::array<Arc, 2> images{};
  // On failure: the first uncovered sub-arc.
  std::optional<Arc> uncovered;
};

CoveringCertificate blender_covering_check(const CircleFiberMap& f0, const CircleFiberMap& f1,
                                           const Arc& arc, double margin);

bool expansion_factor_check(const CircleFiberMap& f, const Arc& region, double tau);

}  // namespace ergoshadow
