#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ergoshadow/model_systems.hpp"

namespace ergoshadow {

// x = (i / denominator, j / denominator) on the torus.
struct RationalTorusPoint {
  std::int64_t i = 0;
  std::int64_t j = 0;
  std::int64_t denominator = 1;

  double x1() const { return static_cast<double>(i) / static_cast<double>(denominator); }
  double x2() const { return static_cast<double>(j) / static_cast<double>(denominator); }
  friend bool operator==(const RationalTorusPoint&, const RationalTorusPoint&) = default;
  friend auto operator<=>(const RationalTorusPoint&, const RationalTorusPoint&) = default;
};

// All x with A^n x = x mod 1; count |trace(A^n) - 2|.
std::vector<RationalTorusPoint> enumerate_base_periodic(const TorusBase& base, int n,
                                                        std::int64_t budget = 1'000'000);
// Admissible cyclic words of length n, optionally one per rotation class
// (lexicographically minimal representative).
std::vector<Word> enumerate_base_periodic(const ShiftBase& base, int n, bool dedup_rotations,
                                          std::int64_t budget = 1'000'000);

RationalTorusPoint apply_exact(const TorusBase& base, const RationalTorusPoint& p);
Word minimal_rotation(const Word& w);
bool is_primitive(const Word& w);

// Base orbit of a periodic point: the torus points p, Ap, ..., A^{n-1}p.
struct TorusCycle {
  std::vector<RationalTorusPoint> points;
};
using BaseCycle = std::variant<Word, TorusCycle>;

TorusCycle torus_cycle(const TorusBase& base, const RationalTorusPoint& p, int n);
std::int64_t cycle_length(const BaseCycle& cycle);
// Fibre maps met along one pass of the base cycle.
std::vector<CircleFiberMap> fiber_factors(const SkewProductSystem& system, const BaseCycle& cycle);

enum class Stability { attracting, repelling, neutral };
const char* to_string(Stability s);
Stability stability_from_log_multiplier(double log_multiplier);

struct FiberFixedPoint {
  double t = 0.0;
  Stability stability = Stability::neutral;
  double log_multiplier = 0.0;  // log G'(t)
};

struct FixedPointOptions {
  int grid = 4096;
  double tol = 1e-12;
  // Restrict the search to an arc (grid laid over [lo, hi]).
  std::optional<Arc> window;
};

struct FixedPointSearch {
  std::vector<FiberFixedPoint> points;
  bool degenerate = false;
  std::string note;
};

// Composition of lifts, applied in order.
double compose_lift(const std::vector<CircleFiberMap>& factors, double t);
double compose_log_derivative(const std::vector<CircleFiberMap>& factors, double t);

FixedPointSearch find_fiber_fixed_points(const std::vector<CircleFiberMap>& factors,
                                         const FixedPointOptions& options = {});
FixedPointSearch find_fiber_fixed_points(const SkewProductSystem& system, const BaseCycle& cycle,
                                         const FixedPointOptions& options = {});

struct PeriodicOrbit {
  BaseCycle base;
  std::shared_ptr<const Itinerary> itinerary;  // symbolic orbits only
  std::vector<double> fiber;                   // fibre coordinate of each orbit point
  double lambda_c = 0.0;
  Stability stability = Stability::neutral;

  std::int64_t period() const { return static_cast<std::int64_t>(fiber.size()); }
  double t_star() const { return fiber.front(); }
  bool is_torus() const { return std::holds_alternative<TorusCycle>(base); }
  const Word& word() const { return std::get<Word>(base); }
  PhasePoint point(std::int64_t i) const;
  std::string itinerary_string() const;
};

// Builds the orbit through (base start, t_star); polishes the fibre cycle
// when forward iteration does not close to 1e-12.
PeriodicOrbit make_periodic_orbit(const SkewProductSystem& system, BaseCycle base, double t_star);
// Uses an explicit fibre sequence (already a cycle up to rounding).
PeriodicOrbit make_periodic_orbit(const SkewProductSystem& system, BaseCycle base,
                                  std::vector<double> fiber);

// Orbits of exact base period n, one per rotation class and fibre fixed point.
std::vector<PeriodicOrbit> periodic_orbits(const SkewProductSystem& system, int n,
                                           std::int64_t budget = 1'000'000,
                                           const FixedPointOptions& options = {});

// max_i |f_i(t_i) - t_{i+1}| over the cycle, and the full re-iteration
// distance |F^period(p) - p| from the first point.
double stepwise_residual(const SkewProductSystem& system, const PeriodicOrbit& orbit);
double reiteration_residual(const SkewProductSystem& system, const PeriodicOrbit& orbit);

struct OrbitSegment {
  std::vector<PhasePoint> points;
  std::vector<double> log_derivs;

  std::int64_t length() const { return static_cast<std::int64_t>(points.size()); }
  const PhasePoint& start() const { return points.front(); }
};

OrbitSegment make_segment(const SkewProductSystem& system, const PhasePoint& start, std::int64_t n);
// Segment from consecutive orbit points computed elsewhere (for instance by
// backward iteration); the points are taken as given.
OrbitSegment segment_from_points(const SkewProductSystem& system, std::vector<PhasePoint> points);

struct Atom {
  PhasePoint point;
  double weight = 0.0;
};

class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(std::vector<Atom> atoms);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool is_torus() const { return atoms_.front().point.is_torus(); }
  double total_mass() const;

 private:
  std::vector<Atom> atoms_;
};

EmpiricalMeasure empirical_measure(const OrbitSegment& segment);
EmpiricalMeasure empirical_measure(const OrbitSegment& segment, std::int64_t from, std::int64_t to);
EmpiricalMeasure empirical_measure(const PeriodicOrbit& orbit);

}  // namespace ergoshadow
