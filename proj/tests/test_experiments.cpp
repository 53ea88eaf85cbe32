#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ergoshadow/errors.hpp"
#include "ergoshadow/experiments.hpp"
#include "ergoshadow/pliss.hpp"
#include "ergoshadow/system_config.hpp"

using namespace ergoshadow;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ergoshadow");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ergoshadow_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool cell_bool(const ExperimentTable& t, std::size_t row, const std::string& col) {
  return std::get<bool>(t.rows[row][t.column(col)]);
}

double cell_double(const ExperimentTable& t, std::size_t row, const std::string& col) {
  return std::get<double>(t.rows[row][t.column(col)]);
}

}  // namespace

TEST(ExperimentConfig, ParseOverridesDefaults) {
  const auto cfg = experiment_config_from_json(
      R"({"experiment": "gap", "seed": 7, "alpha_grid": [0.5], "budgets": {"max_period": 99},
          "descend": {"zeta": 0.3}, "system": {"base": {"kind": "shift"}}})");
  EXPECT_EQ(cfg.experiment, "gap");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.alpha_grid, std::vector<double>{0.5});
  EXPECT_EQ(cfg.max_period, 99);
  EXPECT_DOUBLE_EQ(cfg.descend.zeta, 0.3);
  const auto again = experiment_config_from_json(experiment_config_to_json(cfg));
  EXPECT_EQ(again.seed, 7u);
  EXPECT_EQ(again.alpha_grid, cfg.alpha_grid);
}

TEST(ExperimentConfig, ValidationErrors) {
  EXPECT_THROW(experiment_config_from_json("[1, 2]"), ConfigError);
  EXPECT_THROW(experiment_config_from_json("{oops"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"experiment": "nope"})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"alpha_grid": [1.5]})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"tol_hyp": 0})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"seed": "abc"})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"system": "torus"})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"system": {"fiber": {"a": 3.0}}})"), ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ConfigError);
}

TEST(ExperimentTable, CsvAndJsonlFormatting) {
  ExperimentTable t;
  t.name = "demo";
  t.header = {{"seed", "1"}};
  t.columns = {"a", "b", "c", "pass"};
  t.rows = {{std::int64_t{3}, 0.1, std::string("x,y"), true},
            {std::int64_t{-1}, std::numeric_limits<double>::quiet_NaN(), std::string("plain"), false}};
  EXPECT_EQ(t.to_csv(),
            "# schema=ergoshadow.demo.v1 seed=1\n"
            "a,b,c,pass\n"
            "3,0.10000000000000001,\"x,y\",true\n"
            "-1,nan,plain,false\n");
  const auto jl = t.to_jsonl();
  EXPECT_NE(jl.find("\"b\":null"), std::string::npos);
  EXPECT_NE(jl.find("\"c\":\"x,y\""), std::string::npos);
  EXPECT_FALSE(t.all_pass());
  EXPECT_THROW(t.column("missing"), PreconditionError);
}

TEST(Experiments, GapDeterministicAndFlagsRefit) {
  auto cfg = default_experiment_config("gap");
  cfg.rho_initial = 1e-6;
  const auto a = run_experiment_gap_bound(cfg);
  const auto b = run_experiment_gap_bound(cfg);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  ASSERT_FALSE(a.rows.empty());
  EXPECT_TRUE(cell_bool(a, 0, "bound_violated"));
  bool saw_rho = false;
  for (const auto& [k, v] : a.header) {
    if (k == "rho_fit") {
      saw_rho = true;
      EXPECT_GT(std::stod(v), 1e-6);
    }
  }
  EXPECT_TRUE(saw_rho);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_LE(cell_double(a, i, "distance"), cell_double(a, i, "bound") + 1e-15) << i;
  }
}

TEST(Experiments, ShadowRowsCarryHeaderConstant) {
  const auto t = run_experiment_shadow_scaling(default_experiment_config("shadow"));
  ASSERT_FALSE(t.rows.empty());
  EXPECT_TRUE(t.all_pass());
  const auto csv = t.to_csv();
  EXPECT_EQ(csv.rfind("# schema=ergoshadow.shadow.v1 ", 0), 0u);
  EXPECT_NE(csv.find(" L="), std::string::npos);
  EXPECT_NE(csv.find(" band=2"), std::string::npos);
}

TEST(Experiments, WrongSystemKindRejected) {
  auto cfg = default_experiment_config("convex");
  cfg.system_json = R"({"base": {"kind": "torus"}})";
  EXPECT_THROW(run_experiment_convex(cfg), ConfigError);
  auto sh = default_experiment_config("shadow");
  sh.system_json = R"({"base": {"kind": "shift"}})";
  EXPECT_THROW(run_experiment_shadow_scaling(sh), ConfigError);
}

TEST(Experiments, NonhypRejectsHyperbolicTarget) {
  const auto cfg = default_experiment_config("nonhyp");
  const auto sys = system_from_json(cfg.system_json);
  const auto hyperbolic = orbit_from_word(sys, "1", 0.0);
  EXPECT_THROW(run_experiment_nonhyp_approx(cfg, hyperbolic, 0), PreconditionError);
}

TEST(Cli, NoArgumentsPrintsUsage) {
  const auto r = run_cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
}

TEST(Cli, PlissCheckMatchesOracle) {
  const auto dir = scratch("pliss");
  write(dir / "a.csv", "value\n0.5\n-0.5\n1\n1\n-1\n1\n");
  const auto r = run_cli({"pliss", "check", "--input", (dir / "a.csv").string(), "--b", "1", "--c",
                          "0.16666666666666666", "--cprime", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::string expect = "indices:";
  for (auto i : pliss_oracle<double>(std::vector<double>{0.5, -0.5, 1, 1, -1, 1}, 0.0)) expect += " " + std::to_string(i);
  EXPECT_NE(r.out.find(expect + "\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("indices: 1 3 4 6\n"), std::string::npos);
  // c' above c violates the preconditions
  EXPECT_EQ(run_cli({"pliss", "check", "--input", (dir / "a.csv").string(), "--b", "1", "--c", "0.1", "--cprime",
                     "0.5"})
                .code,
            1);
}

TEST(Cli, OrbitsFindWritesFiles) {
  const auto dir = scratch("orbits");
  const auto r = run_cli({"orbits", "find", "--period", "2", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("base points: 5\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "base_points_p2.csv"));
  const auto orbits = read(dir / "orbits_p2.csv");
  EXPECT_EQ(orbits.rfind("itinerary,period,t_star,lambda_c,stability\n", 0), 0u) << orbits;
}

TEST(Cli, ExperimentStrictAndConfigErrors) {
  const auto dir = scratch("experiment");
  const auto ok = run_cli({"experiment", "gap", "--strict", "--out", dir.string()});
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  EXPECT_TRUE(fs::exists(dir / "gap.csv"));
  EXPECT_TRUE(fs::exists(dir / "gap.jsonl"));

  // a ratio window no row can meet makes --strict fail
  write(dir / "narrow.json", R"({"ratio_low": 0.99, "ratio_high": 0.991})");
  EXPECT_EQ(run_cli({"experiment", "gap", "--config", (dir / "narrow.json").string(), "--out", dir.string()}).code, 0);
  EXPECT_EQ(run_cli({"experiment", "gap", "--strict", "--config", (dir / "narrow.json").string(), "--out",
                     dir.string()})
                .code,
            1);

  write(dir / "bad.json", R"({"alpha_grid": [2.0]})");
  EXPECT_EQ(run_cli({"experiment", "gap", "--config", (dir / "bad.json").string(), "--out", dir.string()}).code, 2);
  write(dir / "other.json", R"({"experiment": "convex"})");
  EXPECT_EQ(run_cli({"experiment", "gap", "--config", (dir / "other.json").string(), "--out", dir.string()}).code, 2);
}

TEST(ExperimentConfig, ShippedConfigsMatchDefaults) {
  for (const std::string name : {"convex", "nonhyp", "gap", "shadow"}) {
    const auto shipped = load_experiment_config(std::string(ERGOSHADOW_CONFIG_DIR) + "/" + name + ".json");
    const auto def = default_experiment_config(name);
    EXPECT_EQ(system_to_json(system_from_json(shipped.system_json)), system_to_json(system_from_json(def.system_json)))
        << name;
    auto a = shipped;
    auto b = def;
    a.system_json = b.system_json = "{}";
    EXPECT_EQ(experiment_config_to_json(a), experiment_config_to_json(b)) << name;
  }
}
