#include <cmath>
#include <cstddef>

#include "ergoshadow/errors.hpp"
#include "ergoshadow/fiber_cycle.hpp"

namespace ergoshadow {
namespace {

void residuals(const std::vector<CircleFiberMap>& factors, const std::vector<double>& t,
               std::vector<double>& r) {
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = circle_diff(t[(i + 1) % n], factors[i](t[i]));
  }
}

// NaN propagates so a broken step is never read as converged.
double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    if (std::isnan(x)) return x;
    m = std::max(m, std::abs(x));
  }
  return m;
}

// Subnormals stick at the smallest step under division by factors near 1
// and then regrow; flush them.
double flush(double v) { return std::abs(v) < 1e-290 ? 0.0 : v; }

}  // namespace

double fiber_cycle_residual(const std::vector<CircleFiberMap>& factors,
                            const std::vector<double>& fiber) {
  std::vector<double> r(fiber.size());
  residuals(factors, fiber, r);
  return max_abs(r);
}

FiberCycleSolution solve_fiber_cycle(const std::vector<CircleFiberMap>& factors,
                                     std::vector<double> guess, int max_iterations, double tol) {
  const std::size_t n = factors.size();
  if (n == 0 || guess.size() != n) throw PreconditionError("fibre cycle size mismatch");
  for (double& x : guess) x = wrap01(x);

  std::vector<double> r(n);
  std::vector<double> g(n);
  std::vector<double> ca(n);
  std::vector<double> cb(n);
  std::vector<double> trial(n);
  residuals(factors, guess, r);
  double res = max_abs(r);

  FiberCycleSolution out;
  int it = 0;
  for (; it < max_iterations && res > tol; ++it) {
    double sum = 0.0;
    double best = 0.0;
    std::size_t e = 0;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = factors[i].derivative(guess[i]);
      sum += std::log(g[i]);
      if (sum > best) {
        best = sum;
        e = (i + 1) % n;
      }
    }
    if (std::abs(sum) < 1e-10) throw ConvergenceError("neutral fibre cycle: log multiplier ~ 0");

    // delta_{i+1} = g_i delta_i + r_i, cyclic. delta_i = ca_i + cb_i * x with x = delta_e.
    double x = 0.0;
    if (sum < 0.0) {
      double c = 0.0;
      double b = 1.0;
      ca[e] = 0.0;
      cb[e] = 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = (e + k) % n;
        c = flush(g[i] * c + r[i]);
        b = flush(g[i] * b);
        if (k + 1 < n) {
          ca[(i + 1) % n] = c;
          cb[(i + 1) % n] = b;
        }
      }
      x = c / (1.0 - b);
    } else {
      double c = 0.0;
      double b = 1.0;
      ca[e] = 0.0;
      cb[e] = 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = (e + n - 1 - k) % n;
        c = flush((c - r[i]) / g[i]);
        b = flush(b / g[i]);
        if (k + 1 < n) {
          ca[i] = c;
          cb[i] = b;
        }
      }
      x = c / (1.0 - b);
    }

    double step = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 30; ++halving) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = wrap01(guess[i] + step * (ca[i] + cb[i] * x));
      residuals(factors, trial, r);
      const double next = max_abs(r);
      if (next < res || next <= tol) {  // false on NaN
        guess.swap(trial);
        res = next;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      residuals(factors, guess, r);
      break;
    }
  }
  if (!(res <= 1e-9)) throw ConvergenceError("fibre cycle solve did not converge");
  out.fiber = std::move(guess);
  out.residual = res;
  out.iterations = it;
  double lm = 0.0;
  for (std::size_t i = 0; i < n; ++i) lm += factors[i].log_derivative(out.fiber[i]);
  out.log_multiplier = lm;
  return out;
}

}  // namespace ergoshadow
