#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergoshadow/measure_metrics.hpp"
#include "ergoshadow/model_systems.hpp"
#include "ergoshadow/orbit_engine.hpp"

namespace ergoshadow {

// Which side the centre bundle sits on.
//   center_in_F: E = E^ss,       F = E^c + E^uu
//   center_in_E: E = E^ss + E^c, F = E^uu
enum class SplittingSpec { center_in_F, center_in_E };
const char* to_string(SplittingSpec s);
SplittingSpec splitting_for_exponent(double mixture_exponent);

enum class ViolationSide { none, E, F };
const char* to_string(ViolationSide s);

struct QuasiHyperbolicString {
  std::int64_t length = 0;
  double rate = 0.0;
  SplittingSpec split = SplittingSpec::center_in_F;
  bool verified = false;
  ViolationSide side = ViolationSide::none;
  // E side: the k of the first failing prefix (k = 1..n, ascending scan).
  // F side: the k of the first failing suffix, scanning from k = n-1 down.
  std::int64_t index = -1;
};

// Per-step log norms on E and log mininorms on F.
double e_log_norm(const BundleLogRates& r, SplittingSpec split);
double f_log_mininorm(const BundleLogRates& r, SplittingSpec split);

QuasiHyperbolicString check_quasi_hyperbolic(const std::vector<BundleLogRates>& rates, double lambda,
                                             SplittingSpec split);
QuasiHyperbolicString check_quasi_hyperbolic(const SkewProductSystem& system, const OrbitSegment& segment,
                                             double lambda, SplittingSpec split);
std::vector<BundleLogRates> segment_bundle_rates(const SkewProductSystem& system, const OrbitSegment& segment);

// Rotation r of a cyclic string such that the string read from r is
// lambda-quasi-hyperbolic. Candidates come from Pliss times of the F-side
// (end points) and of the reversed E-side (start points).
std::optional<std::int64_t> quasi_hyperbolic_rotation(const std::vector<BundleLogRates>& cyclic_rates,
                                                      double lambda, SplittingSpec split);

enum class PlanKind { exact_periodic, concatenated, perturbed, gap };
const char* to_string(PlanKind k);

struct PseudoOrbitPlan {
  PlanKind kind = PlanKind::concatenated;
  OrbitSegment segment;  // genuine orbit segment from the plan start
  Word word;             // symbolic itinerary of one pass (symbolic plans)
  std::array<std::int64_t, 3> winding{};  // torus plans: integer part of the lifted return
  std::int64_t follow_start = 0;
  std::int64_t follow_length = 0;
  std::int64_t loops_m = 0;
  std::int64_t n_d = 0;
  std::int64_t transition_k = 0;  // gap plans: centre-recovery steps
  std::int64_t target_loops = 0;  // gap plans: loops of the contracting orbit
  std::int64_t entry_steps = 0;   // gap plans: steps from p's level into q's
  std::int64_t anchor_period = 0;
  double alpha = 1.0;
  double d = 0.0;
  double gap = 0.0;
  double rate = 0.0;
  double mixture_exponent = 0.0;
  double follow_distance = 0.0;  // truncated distance of the following portion to the target
  SplittingSpec split = SplittingSpec::center_in_F;
  QuasiHyperbolicString check;

  std::int64_t length() const { return segment.length(); }
};

struct AssemblyOptions {
  double d = 1e-6;
  double tol_hyp = 1e-2;
  std::size_t depth = 20;
  std::int64_t max_length = 5'000'000;
  // Verification rate as a power of lambda = exp(-|mixture exponent|); 0.5 is the square root.
  double rate_power = 0.5;
  double diameter = 0.5;
};

// Symbolic target: a periodic orbit or a stored segment of an orbit.
struct AssemblyTarget {
  Word word;
  double fiber_start = 0.0;
  bool periodic = true;
  double lambda_c = 0.0;
  EmpiricalMeasure measure;

  static AssemblyTarget from_orbit(const PeriodicOrbit& orbit);
  static AssemblyTarget from_segment(const SkewProductSystem& system, const Word& word, double fiber_start);
};

// alpha is the weight carried by the anchor.
PseudoOrbitPlan assemble_pseudo_orbit(const SkewProductSystem& system, const AssemblyTarget& target,
                                      const PeriodicOrbit& anchor, double alpha, double epsilon,
                                      const AssemblyOptions& options = {});

// Plan whose expanding orbit p carries weight alpha and whose contracting
// orbit q sits on a different fibre level, joined through an entry
// transition and a centre-recovery excursion.
struct GapOptions {
  double d = 1e-4;
  std::int64_t total_length = 8000;
  double recovery_radius = 0.05;
  double tau = 1.2;
  // Verify at (1 + lambda) / 2 instead of lambda^rate_power.
  bool relaxed_rate = true;
  double rate_power = 0.5;
  double diameter = 0.5;
};

PseudoOrbitPlan assemble_gap_pseudo_orbit(const SkewProductSystem& system, const PeriodicOrbit& p,
                                          const PeriodicOrbit& q, double alpha, const GapOptions& options = {});

// A periodic orbit read as a plan with zero gap.
PseudoOrbitPlan plan_from_orbit(const SkewProductSystem& system, const PeriodicOrbit& orbit);

// Torus plan: start x0 near the orbit point r solving F^n(x0) = x0 + W + d*g
// on lifts, g a direction with sup norm 1.
PseudoOrbitPlan perturbed_periodic_plan(const SkewProductSystem& system, const PeriodicOrbit& orbit,
                                        std::int64_t rotation, double d, const std::array<double, 3>& g,
                                        double rate_power = 0.5);

struct ShadowingConstants {
  double L = 1.0;
  double d0 = 1e-2;
};

struct ShadowResult {
  PeriodicOrbit orbit;
  double max_distance = 0.0;
  double ratio = 0.0;  // max_distance / d (0 when d = 0)
  bool within_bound = true;
  double residual = 0.0;
  int iterations = 0;
};

ShadowResult shadow_periodic(const SkewProductSystem& system, const PseudoOrbitPlan& plan,
                             const ShadowingConstants& constants = {});

struct ShadowSample {
  double d = 0.0;
  double distance = 0.0;
  bool converged = true;
};

ShadowingConstants estimate_shadowing_constant(const std::vector<ShadowSample>& samples,
                                               double floor = 1.0);

// Lipschitz budget sum_i Lip(g_i) 2^{-i} of the first depth test functions
// with respect to the fibre coordinate alone.
double fiber_lipschitz_budget(const TestFunctionFamily& family, std::size_t depth);

}  // namespace ergoshadow
