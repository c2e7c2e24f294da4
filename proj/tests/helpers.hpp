#pragma once

#include <cmath>
#include <vector>

#include "ni/schedule.hpp"

namespace testing {

// Time on a vp schedule where alpha_bar equals `target`, by bisection.
inline double time_at(const ni::Schedule& s, double target) {
  double lo = s.family() == ni::Family::VpDiscrete ? 0.0 : s.t_min(), hi = s.t_max();
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (s.alpha_bar(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

}  // namespace testing
