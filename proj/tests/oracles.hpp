// Slow reference implementations used only by tests.  They share no code
// with the library versions they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "radiomap/grid.hpp"

namespace oracle {

using CellSet = std::set<std::pair<Eigen::Index, Eigen::Index>>;

// Exhaustive rasterization over every grid cell: a cell is hit when its
// closed square meets the closed segment, except when that intersection is a
// single point coinciding with a segment endpoint.
inline CellSet trace(const radiomap::Link& link, const radiomap::GridSpec& g) {
  const Eigen::Vector2d a = g.to_grid(link.tx_ground());
  const Eigen::Vector2d b = g.to_grid(link.rx_ground());
  const double d[2] = {b.x() - a.x(), b.y() - a.y()};
  const double p[2] = {a.x(), a.y()};
  CellSet out;
  for (Eigen::Index i = 0; i < g.rows; ++i)
    for (Eigen::Index j = 0; j < g.cols; ++j) {
      double t0 = 0.0, t1 = 1.0;
      const double lo[2] = {double(i), double(j)};
      const double hi[2] = {double(i + 1), double(j + 1)};
      bool ok = true;
      for (int k = 0; k < 2 && ok; ++k) {
        if (d[k] == 0.0) {
          if (p[k] < lo[k] || p[k] > hi[k]) ok = false;
          continue;
        }
        double ta = (lo[k] - p[k]) / d[k];
        double tb = (hi[k] - p[k]) / d[k];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) ok = false;
      }
      if (!ok) continue;
      if (t0 == t1 && (t0 == 0.0 || t1 == 1.0)) continue;
      out.emplace(i, j);
    }
  return out;
}

struct HullPoint {
  double s, h;
};

// Gift-wrapping upper hull over a left-to-right profile.  From the current
// point, the next vertex maximizes the slope; ties go to the farthest point.
// Input must start with the left endpoint and end with the right endpoint,
// strictly increasing in s.  Returns the chosen points including endpoints.
inline std::vector<HullPoint> upper_hull(const std::vector<HullPoint>& pts) {
  std::vector<HullPoint> out;
  std::size_t cur = 0;
  out.push_back(pts.front());
  while (cur + 1 < pts.size()) {
    std::size_t best = cur + 1;
    double best_slope =
        (pts[best].h - pts[cur].h) / (pts[best].s - pts[cur].s);
    for (std::size_t k = cur + 2; k < pts.size(); ++k) {
      const double slope = (pts[k].h - pts[cur].h) / (pts[k].s - pts[cur].s);
      if (slope > best_slope || (slope == best_slope && k > best)) {
        best = k;
        best_slope = slope;
      }
    }
    out.push_back(pts[best]);
    cur = best;
  }
  return out;
}

}  // namespace oracle
