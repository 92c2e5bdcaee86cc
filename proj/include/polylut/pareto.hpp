#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace polylut {

/// A design point: a cost (latency or LUT count) and an error rate, both
/// minimized. `label` is carried through untouched.
struct DesignPoint {
  double cost = 0.0;
  double error = 0.0;
  std::string label;

  bool operator==(const DesignPoint&) const = default;
};

/// True when `a` is no worse than `b` in both coordinates and better in one.
bool dominates(const DesignPoint& a, const DesignPoint& b) noexcept;

/// Non-dominated subset, ordered by cost then error (stable for ties).
/// O(n log n): sort, then sweep keeping points below the running best error.
std::vector<DesignPoint> pareto_front(std::vector<DesignPoint> points);

}  // namespace polylut
