#include "ergoshadow/quasi_shadow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ergoshadow/errors.hpp"
#include "ergoshadow/fiber_cycle.hpp"
#include "ergoshadow/pliss.hpp"

namespace ergoshadow {

__extension__ typedef __int128 i128;

const char* to_string(SplittingSpec s) {
  return s == SplittingSpec::center_in_E ? "E=ss+c,F=uu" : "E=ss,F=c+uu";
}

SplittingSpec splitting_for_exponent(double mixture_exponent) {
  return mixture_exponent < 0.0 ? SplittingSpec::center_in_E : SplittingSpec::center_in_F;
}

const char* to_string(ViolationSide s) {
  switch (s) {
    case ViolationSide::none:
      return "none";
    case ViolationSide::E:
      return "E";
    case ViolationSide::F:
      return "F";
  }
  return "none";
}

const char* to_string(PlanKind k) {
  switch (k) {
    case PlanKind::exact_periodic:
      return "exact_periodic";
    case PlanKind::concatenated:
      return "concatenated";
    case PlanKind::perturbed:
      return "perturbed";
    case PlanKind::gap:
      return "gap";
  }
  return "concatenated";
}

double e_log_norm(const BundleLogRates& r, SplittingSpec split) {
  return split == SplittingSpec::center_in_E ? std::max(r.ss, r.c) : r.ss;
}

double f_log_mininorm(const BundleLogRates& r, SplittingSpec split) {
  return split == SplittingSpec::center_in_F ? std::min(r.c, r.uu) : r.uu;
}

namespace {

constexpr double kLogSlack = 1e-12;

void check_rate(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw PreconditionError("quasi-hyperbolic rate must lie in (0, 1)");
}

}  // namespace

QuasiHyperbolicString check_quasi_hyperbolic(const std::vector<BundleLogRates>& rates, double lambda,
                                             SplittingSpec split) {
  check_rate(lambda);
  if (rates.empty()) throw PreconditionError("empty string");
  const double ll = std::log(lambda);
  const auto n = static_cast<std::int64_t>(rates.size());
  QuasiHyperbolicString q;
  q.length = n;
  q.rate = lambda;
  q.split = split;

  // prod_{i<k} ||Df|E|| <= lambda^k
  double s = 0.0;
  for (std::int64_t k = 1; k <= n; ++k) {
    s += e_log_norm(rates[k - 1], split) - ll;
    if (s > kLogSlack) {
      q.side = ViolationSide::E;
      q.index = k;
      return q;
    }
  }
  // prod_{i=k}^{n-1} m(Df|F) >= lambda^{-(n-k)}
  s = 0.0;
  for (std::int64_t k = n - 1; k >= 0; --k) {
    s += f_log_mininorm(rates[k], split) + ll;
    if (s < -kLogSlack) {
      q.side = ViolationSide::F;
      q.index = k;
      return q;
    }
  }
  q.verified = true;
  return q;
}

std::vector<BundleLogRates> segment_bundle_rates(const SkewProductSystem& system, const OrbitSegment& segment) {
  std::vector<BundleLogRates> out;
  out.reserve(segment.points.size());
  for (std::size_t i = 0; i < segment.points.size(); ++i) {
    BundleLogRates r = bundle_log_rates(system, segment.points[i]);
    if (i < segment.log_derivs.size()) r.c = segment.log_derivs[i];
    out.push_back(r);
  }
  return out;
}

QuasiHyperbolicString check_quasi_hyperbolic(const SkewProductSystem& system, const OrbitSegment& segment,
                                             double lambda, SplittingSpec split) {
  return check_quasi_hyperbolic(segment_bundle_rates(system, segment), lambda, split);
}

std::optional<std::int64_t> quasi_hyperbolic_rotation(const std::vector<BundleLogRates>& cyclic_rates,
                                                      double lambda, SplittingSpec split) {
  check_rate(lambda);
  const std::size_t n = cyclic_rates.size();
  if (n == 0) throw PreconditionError("empty string");
  const double ll = std::log(lambda);

  // F side: end points e whose backward sums of (log m_F + log lambda) stay >= 0.
  std::vector<double> fwd(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) fwd[i] = f_log_mininorm(cyclic_rates[i % n], split) + ll;
  std::vector<bool> end_ok(n, false);
  for (std::size_t i : pliss_scan<double>(fwd, 0.0, kLogSlack)) {
    if (i >= n) end_ok[i % n] = true;
  }
  // E side: start points s whose forward sums of (log lambda - log ||E||) stay >= 0,
  // found as Pliss times of the reversed sequence.
  std::vector<double> rev(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    rev[i] = ll - e_log_norm(cyclic_rates[(2 * n - 1 - i) % n], split);
  }
  std::vector<bool> start_ok(n, false);
  for (std::size_t i : pliss_scan<double>(rev, 0.0, kLogSlack)) {
    if (i >= n) start_ok[(2 * n - i) % n] = true;
  }

  std::vector<BundleLogRates> rotated(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (!start_ok[s] || !end_ok[s]) continue;
    for (std::size_t i = 0; i < n; ++i) rotated[i] = cyclic_rates[(s + i) % n];
    if (check_quasi_hyperbolic(rotated, lambda, split).verified) return static_cast<std::int64_t>(s);
  }
  return std::nullopt;
}

AssemblyTarget AssemblyTarget::from_orbit(const PeriodicOrbit& orbit) {
  if (orbit.is_torus()) throw PreconditionError("assembly targets live on the symbolic base");
  AssemblyTarget t;
  t.word = orbit.word();
  t.fiber_start = orbit.t_star();
  t.periodic = true;
  t.lambda_c = orbit.lambda_c;
  t.measure = empirical_measure(orbit);
  return t;
}

AssemblyTarget AssemblyTarget::from_segment(const SkewProductSystem& system, const Word& word,
                                            double fiber_start) {
  if (system.is_torus()) throw PreconditionError("assembly targets live on the symbolic base");
  if (word.empty()) throw PreconditionError("empty target segment");
  AssemblyTarget t;
  t.word = word;
  t.fiber_start = wrap01(fiber_start);
  t.periodic = false;
  auto it = Itinerary::periodic(word);
  std::vector<PhasePoint> pts;
  pts.reserve(word.size());
  double x = t.fiber_start;
  double s = 0.0;
  for (std::size_t i = 0; i < word.size(); ++i) {
    pts.push_back(symbolic_point(it, static_cast<std::int64_t>(i), x));
    const auto& f = system.symbol_map(word[i]);
    s += f.log_derivative(x);
    x = f(x);
  }
  t.lambda_c = s / static_cast<double>(word.size());
  t.measure = empirical_measure(segment_from_points(system, std::move(pts)));
  return t;
}

namespace {

Word repeat(const Word& w, std::int64_t times) {
  Word out;
  out.reserve(w.size() * static_cast<std::size_t>(std::max<std::int64_t>(times, 0)));
  for (std::int64_t i = 0; i < times; ++i) out.insert(out.end(), w.begin(), w.end());
  return out;
}

void append(Word& dst, const Word& src) { dst.insert(dst.end(), src.begin(), src.end()); }

// t_0 .. t_{n-1} from t_0 = x0; end receives t_n.
std::vector<double> forward_fibers(const SkewProductSystem& system, const Word& w, double x0, double& end) {
  std::vector<double> t(w.size());
  double x = wrap01(x0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    t[i] = x;
    x = system.symbol_map(w[i])(x);
  }
  end = x;
  return t;
}

// t_0 .. t_{n-1} with f_{n-1}(t_{n-1}) = end.
std::vector<double> backward_fibers(const SkewProductSystem& system, const Word& w, double end) {
  std::vector<double> t(w.size());
  double x = wrap01(end);
  for (std::size_t i = w.size(); i-- > 0;) {
    x = system.symbol_map(w[i]).inverse(x);
    t[i] = x;
  }
  return t;
}

OrbitSegment symbolic_segment(const SkewProductSystem& system, const Word& w, const std::vector<double>& t) {
  auto it = Itinerary::periodic(w);
  std::vector<PhasePoint> pts;
  pts.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) pts.push_back(symbolic_point(it, static_cast<std::int64_t>(i), t[i]));
  return segment_from_points(system, std::move(pts));
}

double loops_needed(double radius, double diameter, double log_contraction_per_loop) {
  // smallest N with diameter * exp(N * log_contraction) <= radius
  return std::max(1.0, std::ceil(std::log(radius / diameter) / log_contraction_per_loop));
}

double rate_from(double mix, double power) { return std::exp(-power * std::abs(mix)); }

}  // namespace

PseudoOrbitPlan assemble_pseudo_orbit(const SkewProductSystem& system, const AssemblyTarget& target,
                                      const PeriodicOrbit& anchor, double alpha, double epsilon,
                                      const AssemblyOptions& options) {
  if (system.is_torus() || anchor.is_torus()) {
    throw PreconditionError("concatenated plans need a symbolic base");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw PreconditionError("anchor weight must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  if (!(options.d > 0.0 && options.d < options.diameter)) throw PreconditionError("d must lie in (0, diameter)");
  if (target.word.empty()) throw PreconditionError("empty target");
  if (std::abs(anchor.lambda_c) <= options.tol_hyp) throw PreconditionError("anchor orbit is not hyperbolic");

  const double mix = alpha * anchor.lambda_c + (1.0 - alpha) * target.lambda_c;
  PseudoOrbitPlan plan;
  plan.kind = PlanKind::concatenated;
  plan.alpha = alpha;
  plan.d = options.d;
  plan.mixture_exponent = mix;
  plan.anchor_period = anchor.period();
  plan.split = splitting_for_exponent(mix);

  const Word& u = anchor.word();
  const auto pi_a = static_cast<std::int64_t>(u.size());
  const double t_a = anchor.t_star();

  if (alpha == 1.0) {
    // Degenerate: the anchor orbit itself.
    plan.kind = PlanKind::exact_periodic;
    plan.word = u;
    plan.segment = symbolic_segment(system, u, anchor.fiber);
    plan.loops_m = 1;
    plan.gap = 0.0;
    plan.rate = rate_from(anchor.lambda_c, options.rate_power);
    plan.split = splitting_for_exponent(anchor.lambda_c);
    plan.check = check_quasi_hyperbolic(system, plan.segment, plan.rate, plan.split);
    return plan;
  }

  if (std::abs(mix) <= options.tol_hyp) throw PreconditionError("mixture exponent is not hyperbolic");
  if ((mix > 0.0) != (anchor.lambda_c > 0.0)) {
    throw PreconditionError("mixture and anchor have opposite index; use an anchor of the mixture's index");
  }
  if (circle_dist(t_a, target.fiber_start) > 1e-9) {
    throw PreconditionError("target must start on the anchor's fibre level");
  }

  plan.rate = rate_from(mix, options.rate_power);
  const bool contracting = anchor.lambda_c < 0.0;
  const double loop_log = -std::abs(anchor.lambda_c) * static_cast<double>(pi_a);
  const auto base_nd =
      static_cast<std::int64_t>(loops_needed(options.d / 2.0, options.diameter, loop_log));
  const auto t_unit = target.periodic ? static_cast<std::int64_t>(target.word.size()) : std::int64_t{1};
  const double ratio = alpha / (1.0 - alpha);

  auto follow_word = [&](std::int64_t t) {
    if (target.periodic) return repeat(target.word, t / t_unit);
    return Word(target.word.begin(), target.word.begin() + t);
  };
  auto loops_for = [&](std::int64_t t) {
    return std::max<std::int64_t>(1, std::llround(ratio * static_cast<double>(t) / static_cast<double>(pi_a)));
  };
  auto time_error = [&](std::int64_t t, std::int64_t m, std::int64_t nd) {
    const double tt = static_cast<double>(t);
    return std::abs(static_cast<double>(m * pi_a) / tt - ratio) + 2.0 * static_cast<double>(nd * pi_a) / tt;
  };

  const auto t_limit = target.periodic ? std::numeric_limits<std::int64_t>::max()
                                       : static_cast<std::int64_t>(target.word.size());
  std::int64_t j = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(2.0 * static_cast<double>(base_nd * pi_a) /
                                             (epsilon * static_cast<double>(t_unit)))));
  for (;;) {
    const std::int64_t t = std::min(j * t_unit, t_limit);
    const std::int64_t m = loops_for(t);
    std::int64_t nd = base_nd;
    const double total = static_cast<double>((m + nd) * pi_a + t);
    if (total > static_cast<double>(options.max_length)) throw BudgetExceeded("plan length exceeds budget");
    if (time_error(t, m, nd) < epsilon) {
      const Word v = follow_word(t);
      for (int grow = 0; grow < 64; ++grow, ++nd) {
        if (time_error(t, m, nd) >= epsilon) break;
        Word w;
        std::vector<double> fib;
        double gap = 0.0;
        std::int64_t follow_start = 0;
        if (contracting) {
          // u^m v u^nd forwards from t_a + d/2.
          w = repeat(u, m);
          follow_start = static_cast<std::int64_t>(w.size());
          append(w, v);
          append(w, repeat(u, nd));
          const double x0 = wrap01(t_a + options.d / 2.0);
          double end = 0.0;
          fib = forward_fibers(system, w, x0, end);
          gap = circle_dist(end, x0);
        } else {
          // u^nd v u^m backwards from t_a + d/2.
          w = repeat(u, nd);
          follow_start = static_cast<std::int64_t>(w.size());
          append(w, v);
          append(w, repeat(u, m));
          const double end = wrap01(t_a + options.d / 2.0);
          fib = backward_fibers(system, w, end);
          gap = circle_dist(end, fib.front());
        }
        if (gap > options.d) continue;

        plan.word = std::move(w);
        plan.segment = symbolic_segment(system, plan.word, fib);
        plan.follow_start = follow_start;
        plan.follow_length = t;
        plan.loops_m = m;
        plan.n_d = nd;
        plan.gap = gap;
        plan.check = check_quasi_hyperbolic(system, plan.segment, plan.rate, plan.split);
        const auto follow = empirical_measure(plan.segment, follow_start, follow_start + t);
        plan.follow_distance = weak_star_distance(system, follow, target.measure, options.depth).value;
        if (plan.check.verified && plan.follow_distance < epsilon) return plan;
        break;
      }
    }
    if (t >= t_limit) throw WindowExhausted("stored target segment too short for the requested epsilon");
    j = std::max(j + 1, (j * 5) / 4);
  }
}

PseudoOrbitPlan assemble_gap_pseudo_orbit(const SkewProductSystem& system, const PeriodicOrbit& p,
                                          const PeriodicOrbit& q, double alpha, const GapOptions& options) {
  if (system.is_torus() || p.is_torus() || q.is_torus()) throw PreconditionError("gap plans need a symbolic base");
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  if (!(p.lambda_c > 0.0)) throw PreconditionError("p must have an expanding centre");
  if (!(q.lambda_c < 0.0)) throw PreconditionError("q must have a contracting centre");
  if (!(options.d > 0.0 && options.d < options.diameter)) throw PreconditionError("d must lie in (0, diameter)");

  const double t_q = q.t_star();
  const double t_p = p.t_star();

  // Entry: the symbol fixing q's level with the strongest contraction there.
  int s_in = -1;
  int s_rec = -1;
  for (int s = 0; s < 2; ++s) {
    const auto& f = system.symbol_map(static_cast<std::uint8_t>(s));
    if (circle_dist(f(t_q), t_q) > 1e-12) continue;
    if (f.derivative(t_q) < 1.0 &&
        (s_in < 0 || f.derivative(t_q) < system.symbol_map(static_cast<std::uint8_t>(s_in)).derivative(t_q))) {
      s_in = s;
    }
    if (s_rec < 0 && expansion_factor_check(f, Arc::centered(t_q, options.recovery_radius), options.tau)) s_rec = s;
  }
  if (s_in < 0) throw PreconditionError("no symbol contracts towards q's fibre level");
  if (s_rec < 0) throw PreconditionError("no symbol expands near q's fibre level");

  const Word& wp = p.word();
  const Word& wq = q.word();
  const auto pi_p = static_cast<std::int64_t>(wp.size());
  const auto pi_q = static_cast<std::int64_t>(wq.size());
  const auto total = static_cast<double>(options.total_length);
  const std::int64_t m = std::max<std::int64_t>(1, std::llround(alpha * total / static_cast<double>(pi_p)));
  const std::int64_t nq =
      std::max<std::int64_t>(1, std::llround((1.0 - alpha) * total / static_cast<double>(pi_q)));
  const double end = wrap01(t_p + options.d / 2.0);
  const Word tail_p = repeat(wp, m);
  const Word block_q = repeat(wq, nq);

  // Fibre entering the recovery excursion, then the q block, for k recovery steps.
  auto q_block_ok = [&](std::int64_t k) {
    double x = end;
    for (std::size_t i = tail_p.size(); i-- > 0;) x = system.symbol_map(tail_p[i]).inverse(x);
    const auto& fr = system.symbol_map(static_cast<std::uint8_t>(s_rec));
    for (std::int64_t i = 0; i < k; ++i) x = fr.inverse(x);
    for (std::size_t i = block_q.size(); i-- > 0;) {
      x = system.symbol_map(block_q[i]).inverse(x);
      if (circle_dist(x, q.fiber[i % static_cast<std::size_t>(pi_q)]) > options.d / 2.0) return false;
    }
    return true;
  };
  constexpr std::int64_t kMaxRecovery = 10'000'000;
  std::int64_t hi = 1;
  while (!q_block_ok(hi)) {
    hi *= 2;
    if (hi > kMaxRecovery) throw BudgetExceeded("centre recovery excursion exceeds budget");
  }
  std::int64_t lo = hi / 2;  // lo fails (or is 0)
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (q_block_ok(mid) ? hi : lo) = mid;
  }
  const std::int64_t k = hi;

  // Fibre at the start of the q block, read backwards from the end.
  double x_q = end;
  for (std::size_t i = tail_p.size(); i-- > 0;) x_q = system.symbol_map(tail_p[i]).inverse(x_q);
  for (std::int64_t i = 0; i < k; ++i) x_q = system.symbol_map(static_cast<std::uint8_t>(s_rec)).inverse(x_q);
  for (std::size_t i = block_q.size(); i-- > 0;) x_q = system.symbol_map(block_q[i]).inverse(x_q);

  // Entry steps e ascending, then the fewest p loops nd closing the gap.
  const double loop_log = -p.lambda_c * static_cast<double>(pi_p);
  const auto nd_min = static_cast<std::int64_t>(loops_needed(options.d / 2.0, options.diameter, loop_log));
  const std::int64_t nd_max = 4 * nd_min + 200;
  const auto& f_in = system.symbol_map(static_cast<std::uint8_t>(s_in));
  std::int64_t entry = -1;
  std::int64_t nd = -1;
  double y = x_q;
  for (std::int64_t e = 1; e <= 256 && entry < 0; ++e) {
    y = f_in.inverse(y);
    double z = y;
    for (std::int64_t loops = 1; loops <= nd_max; ++loops) {
      for (std::size_t i = wp.size(); i-- > 0;) z = system.symbol_map(wp[i]).inverse(z);
      if (loops >= nd_min && circle_dist(end, z) <= options.d) {
        entry = e;
        nd = loops;
        break;
      }
    }
  }
  if (entry < 0) throw WindowExhausted("no entry transition closes the gap");

  Word w = repeat(wp, nd);
  append(w, Word(static_cast<std::size_t>(entry), static_cast<std::uint8_t>(s_in)));
  const auto q_start = static_cast<std::int64_t>(w.size());
  append(w, block_q);
  append(w, Word(static_cast<std::size_t>(k), static_cast<std::uint8_t>(s_rec)));
  append(w, tail_p);
  auto fib = backward_fibers(system, w, end);

  PseudoOrbitPlan plan;
  plan.kind = PlanKind::gap;
  plan.word = std::move(w);
  plan.segment = symbolic_segment(system, plan.word, fib);
  plan.follow_start = q_start;
  plan.follow_length = nq * pi_q;
  plan.loops_m = m;
  plan.target_loops = nq;
  plan.transition_k = k;
  plan.entry_steps = entry;
  plan.n_d = nd;
  plan.anchor_period = pi_p;
  plan.alpha = alpha;
  plan.d = options.d;
  plan.gap = circle_dist(end, fib.front());
  plan.mixture_exponent = alpha * p.lambda_c + (1.0 - alpha) * q.lambda_c;
  plan.split = splitting_for_exponent(plan.mixture_exponent);
  const double lam = std::exp(-std::abs(plan.mixture_exponent));
  plan.rate = options.relaxed_rate ? (1.0 + lam) / 2.0 : rate_from(plan.mixture_exponent, options.rate_power);
  plan.check = check_quasi_hyperbolic(system, plan.segment, plan.rate, plan.split);
  const auto follow = empirical_measure(plan.segment, plan.follow_start, plan.follow_start + plan.follow_length);
  plan.follow_distance = weak_star_distance(system, follow, empirical_measure(q), 20).value;
  return plan;
}

namespace {

struct LiftState {
  Eigen::Vector3d z;
  Eigen::Matrix3d jac;
};

// n steps of the lifted skew map with the Jacobian of the composite.
LiftState lifted_iterate(const SkewProductSystem& system, const Eigen::Vector3d& z0, std::int64_t n,
                         bool with_jacobian) {
  const auto& a = system.torus_base().matrix();
  Eigen::Matrix3d step = Eigen::Matrix3d::Zero();
  step(0, 0) = static_cast<double>(a[0][0]);
  step(0, 1) = static_cast<double>(a[0][1]);
  step(1, 0) = static_cast<double>(a[1][0]);
  step(1, 1) = static_cast<double>(a[1][1]);
  LiftState s{z0, Eigen::Matrix3d::Identity()};
  const bool modulated = system.modulation() == Modulation::cos_x1;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x1 = s.z[0];
    const double x2 = s.z[1];
    const double t = s.z[2];
    const auto f = system.torus_fiber_map(x1);
    if (with_jacobian) {
      step(2, 0) = modulated ? -system.torus_a() * std::sin(kTwoPi * x1) * std::sin(kTwoPi * t) : 0.0;
      step(2, 2) = f.derivative(t);
      s.jac = step * s.jac;
    }
    s.z[2] = f.lift(t);
    s.z[0] = static_cast<double>(a[0][0]) * x1 + static_cast<double>(a[0][1]) * x2;
    s.z[1] = static_cast<double>(a[1][0]) * x1 + static_cast<double>(a[1][1]) * x2;
  }
  return s;
}

// Solves F^n(z) - z - W = target on lifts by damped Newton.
Eigen::Vector3d solve_return(const SkewProductSystem& system, Eigen::Vector3d z, std::int64_t n,
                             const Eigen::Vector3d& winding, const Eigen::Vector3d& target, int& iterations) {
  auto residual = [&](const Eigen::Vector3d& x) {
    return Eigen::Vector3d(lifted_iterate(system, x, n, false).z - x - winding - target);
  };
  Eigen::Vector3d r = residual(z);
  for (iterations = 0; iterations < 60; ++iterations) {
    if (r.cwiseAbs().maxCoeff() < 1e-14) return z;
    const auto st = lifted_iterate(system, z, n, true);
    const Eigen::Matrix3d jac = st.jac - Eigen::Matrix3d::Identity();
    const Eigen::Vector3d step = jac.partialPivLu().solve(-r);
    double damp = 1.0;
    Eigen::Vector3d zn = z + step;
    Eigen::Vector3d rn = residual(zn);
    while (rn.cwiseAbs().maxCoeff() > r.cwiseAbs().maxCoeff() && damp > 1e-6) {
      damp *= 0.5;
      zn = z + damp * step;
      rn = residual(zn);
    }
    if (rn.cwiseAbs().maxCoeff() >= r.cwiseAbs().maxCoeff()) {
      if (r.cwiseAbs().maxCoeff() < 1e-12) return z;
      throw ConvergenceError("torus return-map Newton stagnated");
    }
    z = zn;
    r = rn;
  }
  if (r.cwiseAbs().maxCoeff() < 1e-12) return z;
  throw ConvergenceError("torus return-map Newton did not converge");
}

Eigen::Vector3d torus_lift(const PhasePoint& p) { return {p.torus().x1, p.torus().x2, p.t}; }

Eigen::Vector3d winding_of(const SkewProductSystem& system, const Eigen::Vector3d& z, std::int64_t n) {
  const Eigen::Vector3d d = lifted_iterate(system, z, n, false).z - z;
  return d.array().round().matrix();
}

// Exact solution of (A^n - I) x = W mod 1.
RationalTorusPoint snap_base(const TorusBase& base, std::int64_t n, std::int64_t w1, std::int64_t w2) {
  if (n > 40) throw BudgetExceeded("period too large for exact lattice arithmetic");
  auto m = base.power(static_cast<int>(n));
  m[0][0] -= 1;
  m[1][1] -= 1;
  const std::int64_t det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  if (det == 0) throw PreconditionError("A^n - I is singular");
  const std::int64_t dd = std::abs(det);
  i128 n1 = static_cast<i128>(m[1][1]) * w1 - static_cast<i128>(m[0][1]) * w2;
  i128 n2 = -static_cast<i128>(m[1][0]) * w1 + static_cast<i128>(m[0][0]) * w2;
  if (det < 0) {
    n1 = -n1;
    n2 = -n2;
  }
  auto md = [dd](i128 v) {
    i128 r = v % dd;
    if (r < 0) r += dd;
    return static_cast<std::int64_t>(r);
  };
  return {md(n1), md(n2), dd};
}

}  // namespace

PseudoOrbitPlan plan_from_orbit(const SkewProductSystem& system, const PeriodicOrbit& orbit) {
  PseudoOrbitPlan plan;
  plan.kind = PlanKind::exact_periodic;
  std::vector<PhasePoint> pts;
  pts.reserve(static_cast<std::size_t>(orbit.period()));
  for (std::int64_t i = 0; i < orbit.period(); ++i) pts.push_back(orbit.point(i));
  plan.segment = segment_from_points(system, std::move(pts));
  if (orbit.is_torus()) {
    const auto w = winding_of(system, torus_lift(plan.segment.start()), orbit.period());
    plan.winding = {static_cast<std::int64_t>(w[0]), static_cast<std::int64_t>(w[1]), static_cast<std::int64_t>(w[2])};
  } else {
    plan.word = orbit.word();
  }
  plan.anchor_period = orbit.period();
  plan.loops_m = 1;
  plan.d = 0.0;
  plan.gap = 0.0;
  plan.mixture_exponent = orbit.lambda_c;
  plan.split = splitting_for_exponent(orbit.lambda_c);
  if (orbit.lambda_c != 0.0) {
    plan.rate = rate_from(orbit.lambda_c, 0.5);
    plan.check = check_quasi_hyperbolic(system, plan.segment, plan.rate, plan.split);
  }
  return plan;
}

PseudoOrbitPlan perturbed_periodic_plan(const SkewProductSystem& system, const PeriodicOrbit& orbit,
                                        std::int64_t rotation, double d, const std::array<double, 3>& g,
                                        double rate_power) {
  if (!system.is_torus() || !orbit.is_torus()) throw PreconditionError("perturbed plans need the torus base");
  if (!(d >= 0.0 && d < 0.5)) throw PreconditionError("d must lie in [0, 1/2)");
  const double gn = std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
  if (!(gn > 0.0)) throw PreconditionError("direction must be nonzero");
  const std::int64_t n = orbit.period();
  const Eigen::Vector3d z0 = torus_lift(orbit.point(rotation));
  const Eigen::Vector3d w = winding_of(system, z0, n);
  const Eigen::Vector3d target = Eigen::Vector3d(g[0], g[1], g[2]) * (d / gn);
  int it = 0;
  const Eigen::Vector3d x = solve_return(system, z0, n, w, target, it);

  PseudoOrbitPlan plan;
  plan.kind = PlanKind::perturbed;
  plan.segment = make_segment(system, torus_point(x[0], x[1], x[2]), n);
  plan.winding = {static_cast<std::int64_t>(w[0]), static_cast<std::int64_t>(w[1]), static_cast<std::int64_t>(w[2])};
  plan.anchor_period = n;
  plan.loops_m = 1;
  plan.d = d;
  plan.gap = phase_distance(skew_apply(system, plan.segment.points.back(), 1), plan.segment.start());
  plan.mixture_exponent = orbit.lambda_c;
  plan.split = splitting_for_exponent(orbit.lambda_c);
  plan.rate = rate_from(orbit.lambda_c, rate_power);
  plan.check = check_quasi_hyperbolic(system, plan.segment, plan.rate, plan.split);
  return plan;
}

ShadowResult shadow_periodic(const SkewProductSystem& system, const PseudoOrbitPlan& plan,
                             const ShadowingConstants& constants) {
  if (plan.segment.points.empty()) throw PreconditionError("empty plan");
  if (plan.d > constants.d0) throw PreconditionError("plan gap exceeds the shadowing threshold d0");
  ShadowResult res;
  const std::int64_t n = plan.length();
  if (system.is_torus()) {
    const Eigen::Vector3d w(static_cast<double>(plan.winding[0]), static_cast<double>(plan.winding[1]),
                            static_cast<double>(plan.winding[2]));
    const Eigen::Vector3d x =
        solve_return(system, torus_lift(plan.segment.start()), n, w, Eigen::Vector3d::Zero(), res.iterations);
    const auto& base = system.torus_base();
    const RationalTorusPoint exact = snap_base(base, n, plan.winding[0], plan.winding[1]);
    if (circle_dist(exact.x1(), x[0]) > 1e-8 || circle_dist(exact.x2(), x[1]) > 1e-8) {
      throw ConvergenceError("shadow base did not land on the exact periodic point");
    }
    res.orbit = make_periodic_orbit(system, torus_cycle(base, exact, static_cast<int>(n)), x[2]);
    res.residual = reiteration_residual(system, res.orbit);
  } else {
    std::vector<double> guess;
    guess.reserve(static_cast<std::size_t>(n));
    for (const auto& p : plan.segment.points) guess.push_back(p.t);
    res.orbit = make_periodic_orbit(system, plan.word, std::move(guess));
    res.residual = stepwise_residual(system, res.orbit);
  }
  for (std::int64_t i = 0; i < n; ++i) {
    res.max_distance = std::max(res.max_distance, phase_distance(res.orbit.point(i), plan.segment.points[i]));
  }
  res.ratio = plan.d > 0.0 ? res.max_distance / plan.d : 0.0;
  res.within_bound = plan.d > 0.0 ? res.max_distance <= constants.L * plan.d : res.max_distance <= 1e-12;
  return res;
}

ShadowingConstants estimate_shadowing_constant(const std::vector<ShadowSample>& samples, double floor) {
  if (samples.size() < 3) throw PreconditionError("need at least three samples");
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  double rmax = 0.0;
  bool any = false;
  for (const auto& s : samples) {
    if (!(s.d > 0.0)) throw PreconditionError("sample gaps must be positive");
    dmin = std::min(dmin, s.d);
    dmax = std::max(dmax, s.d);
    if (!s.converged) continue;
    any = true;
    rmax = std::max(rmax, s.distance / s.d);
  }
  if (dmax < 10.0 * dmin * (1.0 - 1e-12)) throw PreconditionError("samples must span a decade of d");
  if (!any) throw ConvergenceError("no converged shadowing sample");
  ShadowingConstants c;
  c.L = std::max(floor, 2.0 * rmax);
  c.d0 = dmax;
  return c;
}

double fiber_lipschitz_budget(const TestFunctionFamily& family, std::size_t depth) {
  depth = std::min(depth, family.size());
  double s = 0.0;
  for (std::size_t i = 1; i <= depth; ++i) {
    const auto g = family.at(i);
    const double k = g.torus ? std::abs(g.k[2]) : g.freq;
    s += std::ldexp(kTwoPi * k, -static_cast<int>(i));
  }
  return s;
}

}  // namespace ergoshadow
