#include "cli.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ergoshadow/errors.hpp"
#include "ergoshadow/experiments.hpp"
#include "ergoshadow/gikn.hpp"
#include "ergoshadow/io.hpp"
#include "ergoshadow/pliss.hpp"
#include "ergoshadow/quasi_shadow.hpp"
#include "ergoshadow/system_config.hpp"

namespace ergoshadow {
namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SkewProductSystem system_or_default(const std::string& path, bool torus) {
  if (!path.empty()) return load_system_file(path);
  return torus ? default_torus_system() : default_symbolic_system();
}

std::string join_path(const std::string& dir, const std::string& file) { return dir + "/" + file; }

struct Options {
  std::string config;
  std::string out;
  bool strict = false;

  // orbits
  int period = 1;
  std::int64_t budget = 1'000'000;

  // pliss
  std::string input;
  double b = 1.0;
  double c = 0.0;
  double cprime = 0.0;

  // shadow
  int orbit_index = 0;
  double d = 1e-4;
  std::uint64_t seed = 20240611;
  std::string word = "0";
  double t = 0.0;
  std::string anchor = "1";
  double anchor_t = 0.0;
  double alpha = 0.5;
  double epsilon = 0.01;

  // gikn
  std::string gamma0 = "00000111111";
  int steps = 6;
  double eps0 = 1e-2;
  double ratio = 0.5;
  double rho = 12.0;
  double zeta = 0.4;
  double min_kappa = 0.25;
  std::string resume;
};

int cmd_systems_list(const Options& o, std::ostream& out) {
  if (!o.config.empty()) {
    const auto sys = load_system_file(o.config);
    out << describe_system(sys) << "\n" << system_to_json(sys) << "\n";
    return 0;
  }
  out << "torus (default)\n  " << describe_system(default_torus_system()) << "\n";
  out << "symbolic (default)\n  " << describe_system(default_symbolic_system()) << "\n";
  return 0;
}

int cmd_orbits_find(const Options& o, std::ostream& out) {
  if (o.period < 1) throw ConfigError("--period must be at least 1");
  const auto sys = system_or_default(o.config, true);
  const std::string dir = resolve_output_dir(o.out);
  if (sys.is_torus()) {
    const auto pts = enumerate_base_periodic(sys.torus_base(), o.period, o.budget);
    std::string csv = "i,j,denominator,x1,x2\n";
    for (const auto& p : pts) {
      csv += std::to_string(p.i) + "," + std::to_string(p.j) + "," + std::to_string(p.denominator) + "," +
             g17(p.x1()) + "," + g17(p.x2()) + "\n";
    }
    write_text_file(join_path(dir, "base_points_p" + std::to_string(o.period) + ".csv"), csv);
    out << "base points: " << pts.size() << "\n";
    for (const auto& p : pts) out << "  (" << p.i << "/" << p.denominator << ", " << p.j << "/" << p.denominator << ")\n";
  } else {
    const auto words = enumerate_base_periodic(sys.shift_base(), o.period, true, o.budget);
    out << "base cycles: " << words.size() << "\n";
  }
  const auto orbits = periodic_orbits(sys, o.period, o.budget);
  const std::string csv = orbits_to_csv(orbits);
  write_text_file(join_path(dir, "orbits_p" + std::to_string(o.period) + ".csv"), csv);
  out << "primitive orbits: " << orbits.size() << "\n" << csv;
  return 0;
}

int cmd_pliss_check(const Options& o, std::ostream& out) {
  PlissQuery<double> q{read_values_csv(o.input), o.b, o.c, o.cprime};
  const auto res = pliss_times(q);
  out << "indices:";
  for (auto i : res.indices) out << " " << i;
  out << "\nproportion: " << g17(res.proportion) << "\n";
  out << "lower bound: " << g17(pliss_lower_bound(q)) << "\n";
  return 0;
}

int cmd_shadow_run(const Options& o, std::ostream& out) {
  const auto sys = system_or_default(o.config, true);
  PseudoOrbitPlan plan;
  if (sys.is_torus()) {
    std::vector<PeriodicOrbit> hyperbolic;
    for (auto& orb : periodic_orbits(sys, o.period, o.budget)) {
      if (std::abs(orb.lambda_c) > 1e-2) hyperbolic.push_back(std::move(orb));
    }
    if (o.orbit_index < 0 || o.orbit_index >= static_cast<int>(hyperbolic.size())) {
      throw ConfigError("--orbit out of range (" + std::to_string(hyperbolic.size()) + " hyperbolic orbits)");
    }
    const auto& orb = hyperbolic[static_cast<std::size_t>(o.orbit_index)];
    std::vector<BundleLogRates> rates;
    for (std::int64_t i = 0; i < orb.period(); ++i) rates.push_back(bundle_log_rates(sys, orb.point(i)));
    const double lam = std::exp(-0.5 * std::abs(orb.lambda_c));
    const auto rot = quasi_hyperbolic_rotation(rates, lam, splitting_for_exponent(orb.lambda_c));
    if (!rot) throw PreconditionError("orbit has no quasi-hyperbolic rotation");
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::array<double, 3> g{u(rng), u(rng), u(rng)};
    plan = perturbed_periodic_plan(sys, orb, *rot, o.d, g);
  } else {
    const auto target = orbit_from_word(sys, o.word, o.t);
    const auto anchor = orbit_from_word(sys, o.anchor, o.anchor_t);
    AssemblyOptions ao;
    ao.d = o.d;
    plan = assemble_pseudo_orbit(sys, AssemblyTarget::from_orbit(target), anchor, o.alpha, o.epsilon, ao);
  }
  const auto res = shadow_periodic(sys, plan);
  const std::string dir = resolve_output_dir(o.out);
  write_text_file(join_path(dir, "plan.json"), plan_to_json(plan) + "\n");
  write_text_file(join_path(dir, "shadow.json"), shadow_result_to_json(res, plan) + "\n");
  out << "plan: " << to_string(plan.kind) << " length " << plan.length() << " gap " << g17(plan.gap)
      << " verified " << (plan.check.verified ? "true" : "false") << "\n";
  out << "shadow: period " << res.orbit.period() << " lambda_c " << g17(res.orbit.lambda_c) << " max distance "
      << g17(res.max_distance) << " ratio " << g17(res.ratio) << " residual " << g17(res.residual) << "\n";
  return o.strict && !(plan.check.verified && res.within_bound) ? 1 : 0;
}

int cmd_gikn_build(const Options& o, std::ostream& out) {
  const auto sys = system_or_default(o.config, false);
  DescendParams params;
  params.rho = o.rho;
  params.zeta = o.zeta;
  params.min_kappa = o.min_kappa;
  const auto schedule = EpsilonSchedule::geometric(o.eps0, o.ratio);
  const std::string dir = resolve_output_dir(o.out);
  const std::string jsonl = join_path(dir, "gikn.jsonl");
  std::optional<GiknSequence> resume;
  if (!o.resume.empty()) resume = load_gikn_jsonl(sys, o.resume);
  const auto gamma0 = orbit_from_word(sys, o.gamma0, o.t);
  write_text_file(jsonl, "");
  const auto seq = build_gikn_sequence(sys, gamma0, schedule, params, o.steps, resume, jsonl);
  const auto rep = certify_convergence(sys, seq);

  nlohmann::ordered_json j;
  j["schedule"] = schedule.describe();
  j["steps"] = seq.orbits.size() - 1;
  j["stop_reason"] = seq.stop_reason;
  j["sum_eps"] = rep.sum_eps;
  j["prod_kappa"] = rep.prod_kappa;
  j["exponents"] = rep.exponents;
  j["rho_fit"] = rep.rho_fit;
  j["product_threshold"] = rep.product_threshold;
  j["distance_first_last"] = rep.distance_first_last;
  j["distance_bound"] = rep.distance_bound;
  j["certificates_ok"] = rep.certificates_ok;
  j["exponents_monotone"] = rep.exponents_monotone;
  j["ratios_above_zeta"] = rep.ratios_above_zeta;
  j["product_ok"] = rep.product_ok;
  j["bound_ok"] = rep.bound_ok;
  j["final_nonhyperbolic"] = rep.final_nonhyperbolic;
  j["pass"] = rep.pass();
  write_text_file(join_path(dir, "convergence.json"), j.dump(2) + "\n");

  for (std::size_t i = 0; i < seq.orbits.size(); ++i) {
    out << i << ": period " << seq.orbits[i].period() << " lambda_c " << g17(seq.orbits[i].lambda_c);
    if (i > 0) out << " kappa " << g17(seq.kappas[i - 1]) << " eps " << g17(seq.epsilons[i - 1]);
    out << "\n";
  }
  out << "convergence: " << (rep.pass() ? "pass" : "fail") << "\n";
  return o.strict && !rep.pass() ? 1 : 0;
}

int cmd_experiment(const std::string& name, const Options& o, std::ostream& out) {
  ExperimentConfig cfg = default_experiment_config(name);
  if (!o.config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(o.config));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("experiment") && j["experiment"] != name) {
      throw ConfigError("config is for experiment '" + j["experiment"].dump() + "', not '" + name + "'");
    }
    j["experiment"] = name;
    cfg = experiment_config_from_json(j.dump());
  }
  const auto table = run_experiment(cfg);
  const std::string dir = resolve_output_dir(o.out);
  write_text_file(join_path(dir, name + ".csv"), table.to_csv());
  write_text_file(join_path(dir, name + ".jsonl"), table.to_jsonl());
  const std::size_t pc = table.column("pass");
  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += std::get<bool>(r[pc]) ? 0 : 1;
  out << name << ": " << table.rows.size() << " rows, " << failed << " failed -> " << join_path(dir, name + ".csv")
      << "\n";
  return o.strict && failed > 0 ? 1 : 0;
}

}  // namespace

int cli_main(int argc, char** argv) { return cli_main(argc, argv, std::cout, std::cerr); }

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Partially hyperbolic model systems: periodic orbits, shadowing and measure approximation", "ergoshadow"};
  app.require_subcommand(0, 1);
  Options o;

  auto add_common = [&o](CLI::App* sub, const std::string& config_help) {
    sub->add_option("--config", o.config, config_help)->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory (default: $ERGOSHADOW_OUT, then ./out)");
    sub->add_flag("--strict", o.strict, "Exit 1 when any row or check fails");
  };

  auto* systems = app.add_subcommand("systems", "Model systems");
  auto* systems_list = systems->add_subcommand("list", "Describe the default systems or a system file");
  systems_list->add_option("--config", o.config, "System JSON file")->check(CLI::ExistingFile);
  systems->require_subcommand(1);

  auto* orbits = app.add_subcommand("orbits", "Periodic orbits");
  auto* orbits_find = orbits->add_subcommand("find", "Enumerate periodic orbits of a given period");
  orbits_find->add_option("--period", o.period, "Base period n")->required();
  orbits_find->add_option("--budget", o.budget, "Enumeration budget");
  add_common(orbits_find, "System JSON file (default: torus)");
  orbits->require_subcommand(1);

  auto* pliss = app.add_subcommand("pliss", "Pliss times");
  auto* pliss_check = pliss->add_subcommand("check", "Pliss times of a sequence read from CSV");
  pliss_check->add_option("--input", o.input, "CSV of values")->required()->check(CLI::ExistingFile);
  pliss_check->add_option("--b", o.b, "Upper bound b")->required();
  pliss_check->add_option("--c", o.c, "Mean lower bound c")->required();
  pliss_check->add_option("--cprime", o.cprime, "Backward average threshold c'")->required();
  pliss->require_subcommand(1);

  auto* shadow = app.add_subcommand("shadow", "Shadowing");
  auto* shadow_run = shadow->add_subcommand("run", "Assemble a pseudo-orbit and shadow it");
  add_common(shadow_run, "System JSON file (default: torus)");
  shadow_run->add_option("--period", o.period, "Torus: base period of the orbit");
  shadow_run->add_option("--orbit", o.orbit_index, "Torus: index among hyperbolic orbits of that period");
  shadow_run->add_option("--d", o.d, "Pseudo-orbit gap");
  shadow_run->add_option("--seed", o.seed, "Torus: seed of the perturbation direction");
  shadow_run->add_option("--word", o.word, "Symbolic: target word");
  shadow_run->add_option("--t", o.t, "Symbolic: target fibre start");
  shadow_run->add_option("--anchor", o.anchor, "Symbolic: anchor word");
  shadow_run->add_option("--anchor-t", o.anchor_t, "Symbolic: anchor fibre start");
  shadow_run->add_option("--alpha", o.alpha, "Symbolic: anchor weight");
  shadow_run->add_option("--epsilon", o.epsilon, "Symbolic: assembly tolerance");
  shadow->require_subcommand(1);

  auto* gikn = app.add_subcommand("gikn", "Good-approximation sequences");
  auto* gikn_build = gikn->add_subcommand("build", "Build a sequence and certify convergence");
  add_common(gikn_build, "System JSON file (default: symbolic)");
  gikn_build->add_option("--gamma0", o.gamma0, "Initial word");
  gikn_build->add_option("--t", o.t, "Fibre start of the initial orbit");
  gikn_build->add_option("--steps", o.steps, "Number of descend steps");
  gikn_build->add_option("--eps0", o.eps0, "Geometric schedule: first term scale");
  gikn_build->add_option("--ratio", o.ratio, "Geometric schedule: ratio");
  gikn_build->add_option("--rho", o.rho, "Proportion constant rho");
  gikn_build->add_option("--zeta", o.zeta, "Minimal exponent ratio zeta");
  gikn_build->add_option("--min-kappa", o.min_kappa, "Floor on the required proportion per step");
  gikn_build->add_option("--resume", o.resume, "Resume from a JSONL file")->check(CLI::ExistingFile);
  gikn->require_subcommand(1);

  auto* experiment = app.add_subcommand("experiment", "Run an experiment and write CSV + JSONL");
  std::string experiment_name;
  for (const char* name : {"convex", "nonhyp", "gap", "shadow"}) {
    auto* sub = experiment->add_subcommand(name, std::string("Experiment '") + name + "'");
    add_common(sub, "Experiment JSON config (see configs/)");
    sub->callback([&experiment_name, name] { experiment_name = name; });
  }
  experiment->require_subcommand(1);

  if (argc <= 1) {
    out << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (systems_list->parsed()) return cmd_systems_list(o, out);
    if (orbits_find->parsed()) return cmd_orbits_find(o, out);
    if (pliss_check->parsed()) return cmd_pliss_check(o, out);
    if (shadow_run->parsed()) return cmd_shadow_run(o, out);
    if (gikn_build->parsed()) return cmd_gikn_build(o, out);
    if (!experiment_name.empty()) return cmd_experiment(experiment_name, o, out);
    out << app.help();
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ergoshadow
