#pragma once

#include <vector>

#include "ergoshadow/model_systems.hpp"

namespace ergoshadow {

struct FiberCycleSolution {
  std::vector<double> fiber;
  double residual = 0.0;  // max_i |f_i(t_i) - t_{i+1}| on the circle
  double log_multiplier = 0.0;
  int iterations = 0;
};

// Newton iteration for the cyclic system t_{i+1} = f_i(t_i), i mod n.
// Each linear step is solved by a single sweep started at the maximum of the
// prefix sums of log f_i', forwards for a contracting cycle and backwards for
// an expanding one, so every partial product met by the sweep is <= 1.
// Throws ConvergenceError on a (numerically) neutral cycle or stagnation.
FiberCycleSolution solve_fiber_cycle(const std::vector<CircleFiberMap>& factors,
                                     std::vector<double> guess, int max_iterations = 60,
                                     double tol = 1e-13);

double fiber_cycle_residual(const std::vector<CircleFiberMap>& factors,
                            const std::vector<double>& fiber);

}  // namespace ergoshadow
