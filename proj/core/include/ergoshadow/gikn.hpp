#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergoshadow/measure_metrics.hpp"
#include "ergoshadow/model_systems.hpp"
#include "ergoshadow/orbit_engine.hpp"

namespace ergoshadow {

// Witness that gamma1 is an (epsilon, kappa) good approximation of gamma2.
struct GoodApproximationCertificate {
  bool valid = false;
  double epsilon = 0.0;
  double kappa_required = 0.0;
  double kappa = 0.0;  // achieved proportion after balancing
  std::int64_t period1 = 0;
  std::int64_t period2 = 0;
  std::vector<std::int64_t> subset;      // indices into gamma1, increasing
  std::vector<std::int64_t> projection;  // matching index into gamma2
  std::int64_t preimage_cardinality = 0;
  double max_distance = 0.0;  // largest shadow distance among kept matches
  // Best achievable epsilon for kappa_required; NaN when not computed (large orbits).
  double epsilon_star = 0.0;
};

struct GoodApproximationOptions {
  // Brute-force scan (and epsilon_star) when period1 * period2^2 stays below this.
  std::int64_t brute_force_budget = 4'000'000;
};

GoodApproximationCertificate check_good_approximation(const SkewProductSystem& system,
                                                      const PeriodicOrbit& gamma1,
                                                      const PeriodicOrbit& gamma2, double epsilon,
                                                      double kappa,
                                                      const GoodApproximationOptions& options = {});

struct CertificateCheck {
  bool ok = false;
  std::string failure;
};

// From-scratch re-check of the three defining conditions.
CertificateCheck verify_certificate(const SkewProductSystem& system, const PeriodicOrbit& gamma1,
                                    const PeriodicOrbit& gamma2, const GoodApproximationCertificate& cert);

class EpsilonSchedule {
 public:
  static EpsilonSchedule geometric(double eps0, double ratio);
  static EpsilonSchedule harmonic(double eps0);

  double at(int n) const;  // n >= 1
  bool summable() const { return summable_; }
  double partial_sum(int n) const;
  std::string describe() const;

 private:
  enum class Kind { geometric, harmonic };
  Kind kind_ = Kind::geometric;
  double eps0_ = 1e-2;
  double ratio_ = 0.5;
  bool summable_ = true;
};

struct DescendParams {
  double rho = 12.0;
  double zeta = 0.4;
  // Upper end of the accepted exponent ratio window (zeta, ratio_high).
  double ratio_high = 0.6;
  double max_abs_exponent = 0.1;
  // Floor on the required proportion; 1 - rho |lambda| is negative for |lambda| > 1/rho.
  double min_kappa = 0.25;
  std::int64_t max_loops = 100'000;
  std::int64_t max_period = 20'000'000;
};

struct DescendResult {
  PeriodicOrbit orbit;
  GoodApproximationCertificate certificate;
  std::int64_t loops = 0;
  Word excursion;
  double ratio = 0.0;
};

DescendResult descend_step(const SkewProductSystem& system, const PeriodicOrbit& gamma, double epsilon,
                           const DescendParams& params = {});

struct GiknSequence {
  std::vector<PeriodicOrbit> orbits;
  std::vector<GoodApproximationCertificate> certificates;  // certificates[n-1] links orbits[n] to orbits[n-1]
  std::vector<double> epsilons;
  std::vector<double> kappas;
  std::vector<std::int64_t> loops;
  std::vector<Word> excursions;
  std::vector<double> partial_eps_sums;
  std::vector<double> partial_kappa_products;
  DescendParams params;
  std::string stop_reason;

  double sum_eps() const { return partial_eps_sums.empty() ? 0.0 : partial_eps_sums.back(); }
  double prod_kappa() const { return partial_kappa_products.empty() ? 1.0 : partial_kappa_products.back(); }
  void append(PeriodicOrbit orbit, GoodApproximationCertificate cert, std::int64_t m, Word excursion);
};

// Continues from seq when it already holds orbits (resume), otherwise starts at gamma0.
GiknSequence build_gikn_sequence(const SkewProductSystem& system, const PeriodicOrbit& gamma0,
                                 const EpsilonSchedule& schedule, const DescendParams& params, int n_max,
                                 std::optional<GiknSequence> resume = std::nullopt,
                                 const std::string& jsonl_path = {});

// One JSON object per line: orbit word, fibre start, exponent and the
// certificate linking it to the previous orbit (matched subset omitted).
void save_gikn_jsonl(const GiknSequence& seq, const std::string& path);
GiknSequence load_gikn_jsonl(const SkewProductSystem& system, const std::string& path);

struct ConvergenceReport {
  double sum_eps = 0.0;
  double prod_kappa = 1.0;
  std::vector<double> exponents;
  std::vector<double> increments;  // d(mu_n, mu_{n+1})
  double increment_constant = 0.0;  // fitted c with increments_n <= c * eps_{n+1}
  double rho_fit = 0.0;
  double zeta = 0.0;
  double product_threshold = 0.0;
  double distance_first_last = 0.0;
  double distance_bound = 0.0;
  bool exponents_monotone = true;
  bool ratios_above_zeta = true;
  bool product_ok = true;
  bool bound_ok = true;
  bool final_nonhyperbolic = false;
  bool certificates_ok = true;
  bool pass() const {
    return exponents_monotone && ratios_above_zeta && product_ok && bound_ok && certificates_ok;
  }
};

ConvergenceReport certify_convergence(const SkewProductSystem& system, const GiknSequence& seq,
                                      std::size_t depth = 20, double tol_hyp = 1e-2);

struct SupportEstimate {
  std::vector<PhasePoint> points;       // union of orbits n..end
  std::vector<double> hausdorff;        // d_H(U_m, U_{m+1}) for m = n .. end-2
  int window_cap = 20;
};

SupportEstimate limit_support_estimate(const SkewProductSystem& system, const GiknSequence& seq, std::size_t n,
                                       int window_cap = 20);

}  // namespace ergoshadow
