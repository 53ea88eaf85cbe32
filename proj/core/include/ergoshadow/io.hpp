#pragma once

#include <string>
#include <vector>

#include "ergoshadow/orbit_engine.hpp"
#include "ergoshadow/quasi_shadow.hpp"

namespace ergoshadow {

// Columns: itinerary, period, t_star, lambda_c, stability.
std::string orbits_to_csv(const std::vector<PeriodicOrbit>& orbits);

std::string plan_to_json(const PseudoOrbitPlan& plan);
std::string shadow_result_to_json(const ShadowResult& result, const PseudoOrbitPlan& plan);

// Reads one number per line or comma separated; '#' starts a comment.
std::vector<double> read_values_csv(const std::string& path);

// Resolution order: explicit flag, then ERGOSHADOW_OUT, then "out".
std::string resolve_output_dir(const std::string& flag_value);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ergoshadow
