#include "ergoshadow/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ergoshadow/errors.hpp"

namespace ergoshadow {
namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

std::string orbits_to_csv(const std::vector<PeriodicOrbit>& orbits) {
  std::string out = "itinerary,period,t_star,lambda_c,stability\n";
  for (const auto& o : orbits) {
    out += o.itinerary_string() + "," + std::to_string(o.period()) + "," + g17(o.t_star()) + "," +
           g17(o.lambda_c) + "," + to_string(o.stability) + "\n";
  }
  return out;
}

std::string plan_to_json(const PseudoOrbitPlan& plan) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(plan.kind);
  j["length"] = plan.length();
  std::string word(plan.word.size(), '0');
  for (std::size_t i = 0; i < plan.word.size(); ++i) word[i] = static_cast<char>('0' + plan.word[i]);
  j["word"] = word;
  j["winding"] = plan.winding;
  j["follow_start"] = plan.follow_start;
  j["follow_length"] = plan.follow_length;
  j["loops_m"] = plan.loops_m;
  j["n_d"] = plan.n_d;
  j["transition_k"] = plan.transition_k;
  j["target_loops"] = plan.target_loops;
  j["entry_steps"] = plan.entry_steps;
  j["anchor_period"] = plan.anchor_period;
  j["alpha"] = number(plan.alpha);
  j["d"] = number(plan.d);
  j["gap"] = number(plan.gap);
  j["rate"] = number(plan.rate);
  j["mixture_exponent"] = number(plan.mixture_exponent);
  j["follow_distance"] = number(plan.follow_distance);
  j["split"] = to_string(plan.split);
  j["check"] = {{"verified", plan.check.verified},
                {"rate", number(plan.check.rate)},
                {"side", to_string(plan.check.side)},
                {"index", plan.check.index}};
  if (plan.length() > 0) {
    const auto& p = plan.segment.start();
    if (p.is_torus()) {
      j["start"] = {p.torus().x1, p.torus().x2, p.t};
    } else {
      j["start"] = {{"t", p.t}};
    }
  }
  return j.dump(2);
}

std::string shadow_result_to_json(const ShadowResult& result, const PseudoOrbitPlan& plan) {
  nlohmann::ordered_json j;
  j["plan"] = nlohmann::ordered_json::parse(plan_to_json(plan));
  j["orbit"] = {{"itinerary", result.orbit.itinerary_string()},
                {"period", result.orbit.period()},
                {"t_star", result.orbit.t_star()},
                {"lambda_c", result.orbit.lambda_c},
                {"stability", to_string(result.orbit.stability)}};
  j["max_distance"] = number(result.max_distance);
  j["ratio"] = number(result.ratio);
  j["within_bound"] = result.within_bound;
  j["residual"] = number(result.residual);
  j["iterations"] = result.iterations;
  return j.dump(2);
}

std::vector<double> read_values_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      tok = tok.substr(b, tok.find_last_not_of(" \t\r") - b + 1);
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) {
        // a non-numeric first line is taken as a header
        if (values.empty()) break;
        throw ConfigError("not a number: '" + tok + "'");
      }
      values.push_back(v);
    }
  }
  return values;
}

std::string resolve_output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ERGOSHADOW_OUT"); env && *env) return env;
  return "out";
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << content;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace ergoshadow
