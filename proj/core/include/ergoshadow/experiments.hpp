#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ergoshadow/gikn.hpp"
#include "ergoshadow/model_systems.hpp"
#include "ergoshadow/quasi_shadow.hpp"

namespace ergoshadow {

// Experiment configuration; see configs/*.json for the documented schema.
struct ExperimentConfig {
  std::string experiment = "convex";  // convex | nonhyp | gap | shadow
  std::string system_json = R"({"base": {"kind": "shift"}})";
  std::uint64_t seed = 20240611;
  std::vector<double> alpha_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double epsilon_target = 0.05;
  double tol_hyp = 1e-2;
  std::size_t depth = 20;
  std::int64_t max_period = 5'000'000;
  std::int64_t max_iterations = 100'000'000;

  // convex
  std::string mu_word = "1";
  double mu_t = 0.0;
  std::string q_word = "0";
  double q_t = 0.0;
  double plan_d = 1e-6;
  double plan_epsilon = 0.005;
  double exponent_tolerance = 0.02;

  // nonhyp
  std::vector<double> eps_schedule{0.4, 0.2, 0.1};
  int gikn_steps = 5;
  std::string gamma0_word = "00000111111";
  std::string anchor_word = "1";
  double anchor_t = 0.0;
  double gikn_eps0 = 1e-2;
  double gikn_ratio = 0.5;
  DescendParams descend;

  // gap
  std::string p_word = "01";
  std::vector<double> q_exponents{-0.08, -0.04, -0.02};
  int q_max_length = 70;
  double gap_d = 1e-4;
  std::int64_t gap_total_length = 6000;
  double gap_epsilon = 2e-3;
  double rho_initial = 0.5;
  double ratio_low = 0.3;
  double ratio_high = 0.8;

  // shadow (torus)
  std::vector<double> d_values{1e-3, 1e-4, 1e-5};
  int shadow_orbits = 10;
  int max_base_period = 5;
  double band = 2.0;
  double residual_tolerance = 1e-9;
};

ExperimentConfig default_experiment_config(const std::string& experiment);
ExperimentConfig experiment_config_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

using Cell = std::variant<std::int64_t, double, std::string, bool>;

struct ExperimentTable {
  std::string name;
  int schema_version = 1;
  std::vector<std::pair<std::string, std::string>> header;  // emitted in the comment line
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(const std::string& name) const;
  bool all_pass() const;  // conjunction of the "pass" column
  // CSV: one "# ..." schema line, the column line, then rows; 17 significant digits.
  std::string to_csv() const;
  // One JSON object per row, mirroring the CSV.
  std::string to_jsonl() const;
};

ExperimentTable run_experiment_convex(const ExperimentConfig& cfg);
ExperimentTable run_experiment_nonhyp_approx(const ExperimentConfig& cfg);
// Variant with an explicit target (rejected unless it is non-hyperbolic).
ExperimentTable run_experiment_nonhyp_approx(const ExperimentConfig& cfg, const PeriodicOrbit& target,
                                             int proxy_depth);
ExperimentTable run_experiment_gap_bound(const ExperimentConfig& cfg);
ExperimentTable run_experiment_shadow_scaling(const ExperimentConfig& cfg);
ExperimentTable run_experiment(const ExperimentConfig& cfg);

// Shared helpers.
Word word_from_string(const std::string& s);
std::string word_to_string(const Word& w);
// Orbit over a symbolic word through the fibre fixed point nearest t.
PeriodicOrbit orbit_from_word(const SkewProductSystem& system, const std::string& word, double t);
// Repelling fibre fixed point of the word with the largest exponent.
PeriodicOrbit expanding_orbit(const SkewProductSystem& system, const std::string& word);
// Section orbit over 0^a 1^b (a + b <= max_length) whose exponent is closest to target.
PeriodicOrbit section_orbit_near(const SkewProductSystem& system, double target, int max_length);

}  // namespace ergoshadow
