#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ergoshadow/model_systems.hpp"
#include "ergoshadow/orbit_engine.hpp"

namespace ergoshadow {

// Test functions, indexed from 1.
//
// Torus: cos / sin(2 pi k.(x1, x2, t)) for k != 0 in Z^3 with first nonzero
// component positive, ordered by |k|_inf, then lexicographically, cos first.
// Capped at |k|_inf <= 6 (2196 functions).
//
// Symbolic: indicator of the cylinder on coordinates -m..m times a fibre
// monomial, ordered by m, then cylinder pattern (omega_{-m} most significant),
// then monomial 1, cos 2 pi t, sin 2 pi t, ..., cos 12 pi t, sin 12 pi t.
// Only admissible patterns are listed; m is capped at 6.
struct TestFunction {
  bool torus = true;
  std::array<int, 3> k{};  // torus frequency
  int level = 0;           // symbolic m
  std::uint32_t pattern = 0;
  int freq = 0;  // symbolic fibre frequency (0 = constant)
  bool sine = false;
};

class TestFunctionFamily {
 public:
  static constexpr int kMaxFrequency = 6;
  static constexpr int kMaxLevel = 6;

  static TestFunctionFamily torus();
  static TestFunctionFamily symbolic(const ShiftBase& base);
  static TestFunctionFamily for_system(const SkewProductSystem& system);

  bool is_torus() const { return torus_; }
  std::size_t size() const;
  TestFunction at(std::size_t index) const;  // 1-based
  double evaluate(std::size_t index, const PhasePoint& p) const;

  // Integrals of g_1..g_depth (depth clamped to size()).
  std::vector<double> integrals(const EmpiricalMeasure& mu, std::size_t depth) const;

 private:
  bool torus_ = true;
  std::vector<std::array<int, 3>> freqs_;
  // per level: admissible patterns in order
  std::vector<std::vector<std::uint32_t>> patterns_;
  std::vector<std::size_t> level_offsets_;  // number of functions before each level
};

double integrate(const TestFunctionFamily& family, std::size_t index, const EmpiricalMeasure& mu);

struct MeasureDistanceReport {
  double value = 0.0;
  std::size_t depth = 0;
  double tail_bound = 0.0;
};

MeasureDistanceReport weak_star_distance(const TestFunctionFamily& family, const EmpiricalMeasure& mu,
                                         const EmpiricalMeasure& nu, std::size_t depth = 64);
MeasureDistanceReport weak_star_distance(const SkewProductSystem& system, const EmpiricalMeasure& mu,
                                         const EmpiricalMeasure& nu, std::size_t depth = 64);
// Distance between measures given by precomputed integral vectors.
MeasureDistanceReport distance_from_integrals(const std::vector<double>& a, const std::vector<double>& b,
                                              std::size_t depth);

double center_exponent(const SkewProductSystem& system, const EmpiricalMeasure& mu);

enum class IndexClass { index_i, index_i_plus_1, nonhyperbolic };
const char* to_string(IndexClass c);
IndexClass classify_exponent(double lambda_c, double tol_hyp);
IndexClass classify_index(const SkewProductSystem& system, const EmpiricalMeasure& mu, double tol_hyp);

EmpiricalMeasure convex_combine(const std::vector<std::pair<double, EmpiricalMeasure>>& terms);

}  // namespace ergoshadow
