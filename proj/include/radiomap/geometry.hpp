#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "radiomap/grid.hpp"

namespace radiomap {

// Cells crossed by the ground projection of a link, in order of increasing
// distance from the transmitter.  For each cell: its index, world center,
// arc-length position s of the center projected onto the ground segment
// (clamped to [0, ground_distance]) and the altitude z of the direct
// tx-rx ray above that projected point.
template <class Scalar>
struct CellTraceT {
  struct Cell {
    Eigen::Index i, j;
    Vector2_t<Scalar> center;
    Scalar s;  // distance from tx along the ground segment
    Scalar z;  // ray altitude at s
  };
  std::vector<Cell> cells;
  Scalar ground_distance = Scalar(0);
};

using CellTrace = CellTraceT<double>;

namespace detail {

// Liang-Barsky clip of the parametric segment a + t*(b-a), t in [0,1],
// against [0,xmax] x [0,ymax].  Returns false if no overlap.
template <class Scalar>
bool clip_segment(const Vector2_t<Scalar>& a, const Vector2_t<Scalar>& b,
                  Scalar xmax, Scalar ymax, Scalar& t0, Scalar& t1) {
  t0 = Scalar(0);
  t1 = Scalar(1);
  const Scalar d[2] = {b.x() - a.x(), b.y() - a.y()};
  const Scalar lo[2] = {Scalar(0), Scalar(0)};
  const Scalar hi[2] = {xmax, ymax};
  const Scalar p0[2] = {a.x(), a.y()};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == Scalar(0)) {
      if (p0[k] < lo[k] || p0[k] > hi[k]) return false;
      continue;
    }
    Scalar ta = (lo[k] - p0[k]) / d[k];
    Scalar tb = (hi[k] - p0[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace detail

// Conservative rasterization of the link's ground segment: every cell whose
// closed square meets the closed segment is reported, including both side
// cells when the segment passes exactly through a grid corner and both rows
// (or columns) when it runs exactly along a grid line.  Cells that touch the
// segment only at one of its endpoints are excluded.  Throws if the segment
// misses the grid entirely.
template <class Scalar>
CellTraceT<Scalar> trace_cells(const LinkT<Scalar>& link,
                               const GridSpecT<Scalar>& grid) {
  link.validate();
  grid.validate();

  const Vector2_t<Scalar> a_full = grid.to_grid(link.tx_ground());
  const Vector2_t<Scalar> b_full = grid.to_grid(link.rx_ground());

  Scalar t0, t1;
  if (!detail::clip_segment(a_full, b_full, Scalar(grid.rows),
                            Scalar(grid.cols), t0, t1))
    throw Error(errc::empty_trace, "link does not cross the grid");

  const Vector2_t<Scalar> seg = b_full - a_full;
  // Clamp the clipped endpoints into the box: rounding in the clip can land
  // them an ulp outside, which would make the walker step across a boundary
  // line it only touches.
  auto boxed = [&](Vector2_t<Scalar> p) {
    p.x() = std::clamp(p.x(), Scalar(0), Scalar(grid.rows));
    p.y() = std::clamp(p.y(), Scalar(0), Scalar(grid.cols));
    return p;
  };
  const Vector2_t<Scalar> a = boxed(a_full + t0 * seg);
  const Vector2_t<Scalar> b = boxed(a_full + t1 * seg);
  const Scalar dx = b.x() - a.x();
  const Scalar dy = b.y() - a.y();

  std::vector<std::pair<Eigen::Index, Eigen::Index>> hit;
  auto emit = [&](Eigen::Index i, Eigen::Index j) {
    if (grid.contains_cell(i, j)) hit.emplace_back(i, j);
  };

  auto entry_index = [](Scalar coord, Scalar dir, Eigen::Index n) {
    Scalar f = std::floor(coord);
    Eigen::Index idx = static_cast<Eigen::Index>(f);
    if (coord == f && dir < Scalar(0)) --idx;  // entering the lower cell
    return std::clamp<Eigen::Index>(idx, 0, n - 1);
  };

  if (dx == Scalar(0) && dy == Scalar(0)) {
    emit(entry_index(a.x(), seg.x() == Scalar(0) ? Scalar(1) : -seg.x(),
                     grid.rows),
         entry_index(a.y(), seg.y() == Scalar(0) ? Scalar(1) : -seg.y(),
                     grid.cols));
  } else if (dy == Scalar(0) && a.y() == std::floor(a.y())) {
    // Horizontal run exactly on a grid line: both adjacent rows block.
    const Eigen::Index jlo = static_cast<Eigen::Index>(a.y()) - 1;
    const Eigen::Index i0 = entry_index(a.x(), dx, grid.rows);
    const Eigen::Index i1 = entry_index(b.x(), -dx, grid.rows);
    for (Eigen::Index i = std::min(i0, i1); i <= std::max(i0, i1); ++i) {
      emit(i, jlo);
      emit(i, jlo + 1);
    }
  } else if (dx == Scalar(0) && a.x() == std::floor(a.x())) {
    const Eigen::Index ilo = static_cast<Eigen::Index>(a.x()) - 1;
    const Eigen::Index j0 = entry_index(a.y(), dy, grid.cols);
    const Eigen::Index j1 = entry_index(b.y(), -dy, grid.cols);
    for (Eigen::Index j = std::min(j0, j1); j <= std::max(j0, j1); ++j) {
      emit(ilo, j);
      emit(ilo + 1, j);
    }
  } else {
    Eigen::Index i = entry_index(a.x(), dx, grid.rows);
    Eigen::Index j = entry_index(a.y(), dy, grid.cols);
    const int sx = dx > Scalar(0) ? 1 : (dx < Scalar(0) ? -1 : 0);
    const int sy = dy > Scalar(0) ? 1 : (dy < Scalar(0) ? -1 : 0);
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    const Scalar tdx = sx ? Scalar(1) / std::abs(dx) : inf;
    const Scalar tdy = sy ? Scalar(1) / std::abs(dy) : inf;
    auto first_crossing = [](Scalar coord, Scalar d) {
      if (d == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
      const Scalar next = d > Scalar(0) ? std::floor(coord) + Scalar(1)
                                        : std::ceil(coord) - Scalar(1);
      return (next - coord) / d;
    };
    Scalar tmx = first_crossing(a.x(), dx);
    Scalar tmy = first_crossing(a.y(), dy);

    while (true) {
      emit(i, j);
      const Scalar tnext = std::min(tmx, tmy);
      if (tnext >= Scalar(1)) break;  // rest of the segment stays inside
      if (tmx == tmy) {
        // Exact corner crossing: the two cells sharing only the corner
        // with the segment still count as touched.
        emit(i + sx, j);
        emit(i, j + sy);
        i += sx;
        j += sy;
        tmx += tdx;
        tmy += tdy;
      } else if (tmx < tmy) {
        i += sx;
        tmx += tdx;
      } else {
        j += sy;
        tmy += tdy;
      }
      if (i < 0 || i >= grid.rows || j < 0 || j >= grid.cols) break;
    }
  }

  if (hit.empty())
    throw Error(errc::empty_trace, "link does not cross the grid");

  const Vector2_t<Scalar> txg = link.tx_ground();
  const Vector2_t<Scalar> rxg = link.rx_ground();
  const Scalar d0 = link.ground_distance();
  const Vector2_t<Scalar> u = (txg - rxg) / d0;

  CellTraceT<Scalar> trace;
  trace.ground_distance = d0;
  trace.cells.reserve(hit.size());
  for (auto [i, j] : hit) {
    typename CellTraceT<Scalar>::Cell c;
    c.i = i;
    c.j = j;
    c.center = grid.cell_center(i, j);
    const Scalar frac =
        std::clamp((c.center - rxg).dot(u) / d0, Scalar(0), Scalar(1));
    c.z = (link.tx.z() - link.rx.z()) * frac + link.rx.z();
    c.s = d0 * (Scalar(1) - frac);
    trace.cells.push_back(c);
  }
  std::sort(trace.cells.begin(), trace.cells.end(),
            [](const auto& p, const auto& q) {
              if (p.s != q.s) return p.s < q.s;
              if (p.i != q.i) return p.i < q.i;
              return p.j < q.j;
            });
  return trace;
}

// Altitude of the direct ray over every traced cell, zero elsewhere.
template <class Scalar>
Matrix2d_t<Scalar> line_feature(const LinkT<Scalar>& link,
                                const GridSpecT<Scalar>& grid) {
  const CellTraceT<Scalar> trace = trace_cells(link, grid);
  Matrix2d_t<Scalar> L = Matrix2d_t<Scalar>::Zero(grid.rows, grid.cols);
  for (const auto& c : trace.cells) L(c.i, c.j) = c.z;
  return L;
}

// 0/1 mask of cells whose center lies inside the ellipse with the link's
// ground endpoints as foci and major axis ground_distance / eccentricity.
template <class Scalar>
Matrix2d_t<Scalar> ellipse_mask(const LinkT<Scalar>& link,
                                const GridSpecT<Scalar>& grid,
                                Scalar eccentricity) {
  link.validate();
  grid.validate();
  if (!(eccentricity > Scalar(0)) || !(eccentricity < Scalar(1)))
    throw Error(errc::invalid_argument, "eccentricity must be in (0, 1)");
  const Vector2_t<Scalar> txg = link.tx_ground();
  const Vector2_t<Scalar> rxg = link.rx_ground();
  const Scalar major = link.ground_distance() / eccentricity;
  Matrix2d_t<Scalar> M(grid.rows, grid.cols);
  for (Eigen::Index j = 0; j < grid.cols; ++j)
    for (Eigen::Index i = 0; i < grid.rows; ++i) {
      const Vector2_t<Scalar> c = grid.cell_center(i, j);
      M(i, j) = ((c - txg).norm() + (c - rxg).norm() <= major) ? Scalar(1)
                                                               : Scalar(0);
    }
  return M;
}

// Obstacle height in excess of the direct ray, restricted to traced cells.
template <class DH, class DL>
Matrix2d_t<typename DH::Scalar> focus_line(const Eigen::MatrixBase<DH>& heights,
                                           const Eigen::MatrixBase<DL>& line) {
  using Scalar = typename DH::Scalar;
  if (heights.rows() != line.rows() || heights.cols() != line.cols())
    throw Error(errc::invalid_argument, "height/line shapes differ");
  return ((heights.array() - line.array()) *
          (line.array() > Scalar(0)).template cast<Scalar>())
      .max(Scalar(0))
      .matrix();
}

// Obstacle heights restricted to an elliptic neighborhood mask.
template <class DH, class DM>
Matrix2d_t<typename DH::Scalar> focus_ellipse(
    const Eigen::MatrixBase<DH>& heights, const Eigen::MatrixBase<DM>& mask) {
  if (heights.rows() != mask.rows() || heights.cols() != mask.cols())
    throw Error(errc::invalid_argument, "height/mask shapes differ");
  return heights.cwiseProduct(mask);
}

// Smooth visibility in [0, 1]: 1 with no intrusion, decaying to 0 as the
// total height excess over the direct ray grows.
template <class Scalar>
Scalar soft_indicator_from_sum(Scalar excess_sum) {
  return Scalar(1) - std::tanh(excess_sum);
}

template <class D>
typename D::Scalar soft_los_indicator(const Eigen::MatrixBase<D>& focused) {
  return soft_indicator_from_sum(focused.sum());
}

// Total height excess over the direct ray along a precomputed trace.
// Equals focus_line(H, line_feature(...)).sum() up to summation order.
template <class Scalar, class DH>
Scalar trace_excess_sum(const CellTraceT<Scalar>& trace,
                        const Eigen::MatrixBase<DH>& heights) {
  Scalar s = Scalar(0);
  for (const auto& c : trace.cells)
    if (c.z > Scalar(0)) s += std::max(heights(c.i, c.j) - c.z, Scalar(0));
  return s;
}

// True when no traced cell reaches the direct ray.
template <class Scalar, class DH>
bool hard_los(const CellTraceT<Scalar>& trace,
              const Eigen::MatrixBase<DH>& heights) {
  for (const auto& c : trace.cells)
    if (heights(c.i, c.j) >= c.z) return false;
  return true;
}

template <class Scalar>
bool hard_los(const LinkT<Scalar>& link, const ObstacleMapT<Scalar>& map) {
  return hard_los(trace_cells(link, map.grid), map.heights);
}

// Piecewise-linear path over the blocking skyline between tx and rx.
// vertices.front() is the transmitter, vertices.back() the receiver; the
// interior vertices lie on obstacle tops.  d holds the N+1 ground hops,
// theta the N non-negative deflection angles.
template <class Scalar>
struct DiffractionPathT {
  struct Vertex {
    Vector2_t<Scalar> ground;
    Scalar alt;
    Eigen::Index cell_i = -1, cell_j = -1;  // -1 for the endpoints
  };
  std::vector<Vertex> vertices;
  std::vector<Scalar> d;
  std::vector<Scalar> theta;
  Scalar ground_distance = Scalar(0);

  int edge_count() const { return static_cast<int>(theta.size()); }

  Scalar curve_length3() const {
    Scalar len = Scalar(0);
    for (std::size_t k = 0; k + 1 < vertices.size(); ++k)
      len += std::hypot(d[k], vertices[k + 1].alt - vertices[k].alt);
    return len;
  }
};

using DiffractionPath = DiffractionPathT<double>;

// Upper convex hull of the obstacle profile seen by a blocked link.  The
// interior hull vertices are the diffracting edges.  If the ray is blocked
// only by cells that exactly graze it, the farthest grazing cell becomes a
// single zero-angle edge.  Throws if the link is not blocked at all.
template <class Scalar, class DH>
DiffractionPathT<Scalar> extract_diffraction_path(
    const LinkT<Scalar>& link, const CellTraceT<Scalar>& trace,
    const Eigen::MatrixBase<DH>& heights) {
  const Scalar d0 = trace.ground_distance;

  struct P {
    Scalar s, h;
    Eigen::Index i, j;
  };
  std::vector<P> profile;
  profile.reserve(trace.cells.size());
  bool blocked = false;
  for (const auto& c : trace.cells) {
    const Scalar h = heights(c.i, c.j);
    if (h >= c.z) blocked = true;
    if (c.s <= Scalar(0) || c.s >= d0) continue;
    if (!profile.empty() && profile.back().s == c.s) {
      if (h > profile.back().h) profile.back() = {c.s, h, c.i, c.j};
      continue;
    }
    profile.push_back({c.s, h, c.i, c.j});
  }
  if (!blocked)
    throw Error(errc::los_path, "link is not blocked; no path to extract");

  std::vector<P> pts;
  pts.reserve(profile.size() + 2);
  pts.push_back({Scalar(0), link.tx.z(), -1, -1});
  pts.insert(pts.end(), profile.begin(), profile.end());
  pts.push_back({d0, link.rx.z(), -1, -1});

  // Monotone-chain upper hull; collinear middle points are dropped so ties
  // resolve to the farthest cell.
  std::vector<P> hull;
  for (const P& p : pts) {
    while (hull.size() >= 2) {
      const P& a = hull[hull.size() - 2];
      const P& b = hull[hull.size() - 1];
      const Scalar cross =
          (b.s - a.s) * (p.h - b.h) - (b.h - a.h) * (p.s - b.s);
      if (cross >= Scalar(0))
        hull.pop_back();
      else
        break;
    }
    hull.push_back(p);
  }

  if (hull.size() == 2) {
    // Blocked only by exact grazing: keep the farthest grazing cell.
    P touch{};
    bool found = false;
    for (const auto& c : trace.cells) {
      if (c.s <= Scalar(0) || c.s >= d0) continue;
      if (heights(c.i, c.j) >= c.z && (!found || c.s > touch.s)) {
        touch = {c.s, heights(c.i, c.j), c.i, c.j};
        found = true;
      }
    }
    if (!found)
      throw Error(errc::los_path,
                  "blockage occurs only at the link endpoints");
    hull.insert(hull.begin() + 1, touch);
  }

  const Vector2_t<Scalar> txg = link.tx_ground();
  const Vector2_t<Scalar> rxg = link.rx_ground();

  DiffractionPathT<Scalar> path;
  path.ground_distance = d0;
  path.vertices.reserve(hull.size());
  for (const P& p : hull) {
    typename DiffractionPathT<Scalar>::Vertex v;
    v.ground = txg + (p.s / d0) * (rxg - txg);
    v.alt = p.h;
    v.cell_i = p.i;
    v.cell_j = p.j;
    path.vertices.push_back(v);
  }
  path.vertices.front().ground = txg;
  path.vertices.back().ground = rxg;

  const std::size_t n = hull.size();
  path.d.resize(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) path.d[k] = hull[k + 1].s - hull[k].s;
  path.theta.resize(n - 2);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const Scalar in = (hull[k].h - hull[k - 1].h) / path.d[k - 1];
    const Scalar out = (hull[k + 1].h - hull[k].h) / path.d[k];
    path.theta[k - 1] = std::max(std::atan(in) - std::atan(out), Scalar(0));
  }
  return path;
}

template <class Scalar>
DiffractionPathT<Scalar> extract_diffraction_path(
    const LinkT<Scalar>& link, const ObstacleMapT<Scalar>& map) {
  return extract_diffraction_path(link, trace_cells(link, map.grid),
                                  map.heights);
}

}  // namespace radiomap
