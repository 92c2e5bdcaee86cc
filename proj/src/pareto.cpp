#include "polylut/pareto.hpp"

#include <algorithm>
#include <limits>

namespace polylut {

bool dominates(const DesignPoint& a, const DesignPoint& b) noexcept {
  return a.cost <= b.cost && a.error <= b.error && (a.cost < b.cost || a.error < b.error);
}

std::vector<DesignPoint> pareto_front(std::vector<DesignPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const DesignPoint& a, const DesignPoint& b) {
    return a.cost < b.cost || (a.cost == b.cost && a.error < b.error);
  });
  std::vector<DesignPoint> front;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.error < best) {
      front.push_back(p);
      best = p.error;
    } else if (!front.empty() && p.cost == front.back().cost && p.error == front.back().error) {
      // exact duplicate of a front point: neither dominates the other
      front.push_back(p);
    }
  }
  return front;
}

}  // namespace polylut
