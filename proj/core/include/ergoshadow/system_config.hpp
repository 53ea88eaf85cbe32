#pragma once

#include <string>

#include "ergoshadow/model_systems.hpp"

namespace ergoshadow {

// Parses a system description. Recognised keys (all optional):
//   base.kind        "torus" (default) or "shift"
//   base.matrix      torus: 2x2 integer matrix, default [[2,1],[1,1]]
//                    shift: 2x2 0/1 transition matrix, default all ones
//   fiber.a          torus: number (default 0.5); shift: [a0, a1] (default [-0.5, 0.5])
//   fiber.beta       torus: number (default 0); shift: [b0, b1] (default [0, 0])
//   fiber.modulation torus only: "cos_x1" (default) or "none"
// Throws ConfigError on malformed input.
SkewProductSystem system_from_json(const std::string& text);
SkewProductSystem load_system_file(const std::string& path);
std::string system_to_json(const SkewProductSystem& system);
std::string describe_system(const SkewProductSystem& system);

}  // namespace ergoshadow
