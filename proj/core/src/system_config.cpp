#include "ergoshadow/system_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ergoshadow/errors.hpp"

namespace ergoshadow {
namespace {

using nlohmann::json;

const json* find_path(const json& j, const char* group, const char* key) {
  if (!j.is_object()) return nullptr;
  // Accept both nested {"base": {"kind": ...}} and dotted {"base.kind": ...}.
  const std::string dotted = std::string(group) + "." + key;
  if (auto it = j.find(dotted); it != j.end()) return &*it;
  if (auto g = j.find(group); g != j.end() && g->is_object()) {
    if (auto it = g->find(key); it != g->end()) return &*it;
  }
  return nullptr;
}

SkewProductSystem build(const json& j) {
  std::string kind = "torus";
  if (const json* k = find_path(j, "base", "kind")) kind = k->get<std::string>();
  const json* matrix = find_path(j, "base", "matrix");
  const json* a = find_path(j, "fiber", "a");
  const json* beta = find_path(j, "fiber", "beta");
  const json* mod = find_path(j, "fiber", "modulation");

  if (kind == "torus") {
    TorusBase::Matrix m{{{2, 1}, {1, 1}}};
    if (matrix) {
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) m[r][c] = matrix->at(r).at(c).get<std::int64_t>();
      }
    }
    const double av = a ? a->get<double>() : 0.5;
    const double bv = beta ? beta->get<double>() : 0.0;
    Modulation modulation = Modulation::cos_x1;
    if (mod) {
      const auto s = mod->get<std::string>();
      if (s == "none") {
        modulation = Modulation::none;
      } else if (s != "cos_x1") {
        throw ConfigError("unknown fiber.modulation '" + s + "'");
      }
    }
    return SkewProductSystem::torus(TorusBase(m), av, bv, modulation);
  }
  if (kind == "shift") {
    ShiftBase::Transitions t{{{true, true}, {true, true}}};
    if (matrix) {
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) t[r][c] = matrix->at(r).at(c).get<int>() != 0;
      }
    }
    double a0 = -0.5;
    double a1 = 0.5;
    double b0 = 0.0;
    double b1 = 0.0;
    if (a) {
      a0 = a->at(0).get<double>();
      a1 = a->at(1).get<double>();
    }
    if (beta) {
      b0 = beta->at(0).get<double>();
      b1 = beta->at(1).get<double>();
    }
    if (mod && mod->get<std::string>() != "none") {
      throw ConfigError("fiber.modulation applies to torus systems only");
    }
    return SkewProductSystem::shift(ShiftBase(t), CircleFiberMap(b0, a0), CircleFiberMap(b1, a1));
  }
  throw ConfigError("unknown base.kind '" + kind + "'");
}

}  // namespace

SkewProductSystem system_from_json(const std::string& text) {
  try {
    const json j = text.empty() ? json::object() : json::parse(text);
    return build(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed system config: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("invalid system config: ") + e.what());
  }
}

SkewProductSystem load_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return system_from_json(ss.str());
}

std::string system_to_json(const SkewProductSystem& system) {
  json j;
  if (system.is_torus()) {
    const auto& m = system.torus_base().matrix();
    j["base"] = {{"kind", "torus"}, {"matrix", {{m[0][0], m[0][1]}, {m[1][0], m[1][1]}}}};
    j["fiber"] = {{"a", system.torus_a()},
                  {"beta", system.torus_beta()},
                  {"modulation", system.modulation() == Modulation::cos_x1 ? "cos_x1" : "none"}};
  } else {
    const auto& t = system.shift_base().transitions();
    j["base"] = {{"kind", "shift"},
                 {"matrix", {{int(t[0][0]), int(t[0][1])}, {int(t[1][0]), int(t[1][1])}}}};
    j["fiber"] = {{"a", {system.symbol_map(0).a(), system.symbol_map(1).a()}},
                  {"beta", {system.symbol_map(0).beta(), system.symbol_map(1).beta()}}};
  }
  return j.dump();
}

std::string describe_system(const SkewProductSystem& system) {
  std::ostringstream os;
  if (system.is_torus()) {
    const auto& b = system.torus_base();
    const auto& m = b.matrix();
    os << "torus base [[" << m[0][0] << "," << m[0][1] << "],[" << m[1][0] << "," << m[1][1]
       << "]] lambda_u=" << b.lambda_u() << " fiber a=" << system.torus_a()
       << " beta=" << system.torus_beta()
       << " modulation=" << (system.modulation() == Modulation::cos_x1 ? "cos_x1" : "none")
       << " fiber derivative range [" << system.inf_fiber_derivative() << ", "
       << system.sup_fiber_derivative() << "]";
  } else {
    os << "shift base " << (system.shift_base().is_full() ? "full 2-shift" : "subshift")
       << " f0(a=" << system.symbol_map(0).a() << ", beta=" << system.symbol_map(0).beta() << ")"
       << " f1(a=" << system.symbol_map(1).a() << ", beta=" << system.symbol_map(1).beta() << ")";
  }
  return os.str();
}

}  // namespace ergoshadow
