#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "ergoshadow/errors.hpp"

namespace ergoshadow {

template <class T>
struct PlissQuery {
  std::vector<T> a;
  T b{};
  T c{};
  T c_prime{};
};

struct PlissResult {
  std::vector<std::size_t> indices;  // 1-based, increasing
  double proportion = 0.0;
};

template <class T>
T default_slack() {
  if constexpr (std::is_floating_point_v<T>) {
    return T(1e-12);
  } else {
    return T(0);
  }
}

// Throws PreconditionError naming the violated condition.
template <class T>
void validate(const PlissQuery<T>& q, T slack = default_slack<T>()) {
  if (!(q.c_prime < q.c)) throw PreconditionError("pliss: c' must be below c");
  if (!(q.c < q.b)) throw PreconditionError("pliss: c must be below b");
  if (q.a.empty()) throw PreconditionError("pliss: empty sequence");
  T sum{};
  for (const T& x : q.a) {
    if (x > q.b + slack) throw PreconditionError("pliss: some a_i exceeds b");
    sum += x;
  }
  if (sum + slack * T(q.a.size()) < q.c * T(q.a.size())) {
    throw PreconditionError("pliss: mean of a is below c");
  }
}

// Index i qualifies iff sum_{j..i}(a - c') >= 0 for every j <= i, that is iff
// the prefix sum S_i is at least the running maximum of S_0..S_{i-1}.
template <class T>
std::vector<std::size_t> pliss_scan(std::span<const T> a, T c_prime, T slack = default_slack<T>()) {
  std::vector<std::size_t> out;
  T s{};
  T running_max{};  // max of S_0 .. S_{i-1}, S_0 = 0
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] - c_prime;
    if (s >= running_max - slack) out.push_back(i + 1);
    if (s > running_max) running_max = s;
  }
  return out;
}

template <class T>
PlissResult pliss_times(const PlissQuery<T>& q, T slack = default_slack<T>()) {
  validate(q, slack);
  PlissResult r;
  r.indices = pliss_scan<T>(std::span<const T>(q.a), q.c_prime, slack);
  r.proportion = static_cast<double>(r.indices.size()) / static_cast<double>(q.a.size());
  return r;
}

// Direct check of every backward sum; O(n^2).
template <class T>
std::vector<std::size_t> pliss_oracle(std::span<const T> a, T c_prime, T slack = default_slack<T>()) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool ok = true;
    T sum{};
    for (std::size_t j = i + 1; j-- > 0;) {
      sum += a[j];
      if (sum < T(i - j + 1) * c_prime - slack) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(i + 1);
  }
  return out;
}

template <class T>
double pliss_lower_bound(const PlissQuery<T>& q) {
  return static_cast<double>((q.c - q.c_prime) / (q.b - q.c_prime));
}

}  // namespace ergoshadow
