#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "radiomap/error.hpp"
#include "radiomap/geometry.hpp"
#include "radiomap/grid.hpp"
#include "radiomap/propagation.hpp"

// Obstacle-map-guided placement of an aerial relay serving two users.  The
// goal is the position that maximizes the weaker of the two link gains while
// keeping an unobstructed ray to both users.  Because any point straight
// above a visible point is itself visible, the search can start high on the
// perpendicular bisector plane of the users and walk downward, sliding along
// in-plane circles whenever the next step down would lose visibility.  An
// exhaustive lattice scan over the whole volume serves as the reference the
// guided walk is judged against.

namespace radiomap {

template <class Scalar>
struct RelayQueryT {
  Vector3_t<Scalar> p1 = Vector3_t<Scalar>::Zero();
  Vector3_t<Scalar> p2 = Vector3_t<Scalar>::Zero();
  Scalar z_min = Scalar(10);
  Scalar z_max = Scalar(100);
  // Zero steps/radii mean "derive from the map's cell size": one cell per
  // vertical or lateral step, and circles of one, two and four cells.
  Scalar z_step = Scalar(0);
  Scalar lateral_step = Scalar(0);
  std::vector<Scalar> circle_radii;
  Scalar angle_step_deg = Scalar(5);
  Scalar two_d_height = Scalar(50);  // fixed altitude of the planar scan
  int max_probes = 200000;
  // A circle rescue that does not lead back to a successful descent is a
  // detour; after this many in a row the walk gives up and reports the best
  // position found.
  int max_detours = 12;

  void validate() const {
    if (!p1.allFinite() || !p2.allFinite())
      throw Error(errc::invalid_argument, "user positions must be finite");
    if (p1.template head<2>() == p2.template head<2>())
      throw Error(errc::invalid_argument,
                  "users need distinct ground positions");
    if (!(z_min >= Scalar(0)) || !(z_max >= z_min))
      throw Error(errc::invalid_argument,
                  "altitude bounds need 0 <= z_min <= z_max");
    if (!(z_step >= Scalar(0)) || !(lateral_step >= Scalar(0)))
      throw Error(errc::invalid_argument, "step sizes must be non-negative");
    for (const Scalar r : circle_radii)
      if (!(r > Scalar(0)))
        throw Error(errc::invalid_argument, "circle radii must be positive");
    if (!(angle_step_deg > Scalar(0)) || !(angle_step_deg <= Scalar(120)))
      throw Error(errc::invalid_argument,
                  "angle step must lie in (0, 120] degrees");
    if (!(two_d_height >= Scalar(0)))
      throw Error(errc::invalid_argument,
                  "planar scan altitude must be non-negative");
    if (max_probes < 1)
      throw Error(errc::invalid_argument, "probe budget must be positive");
    if (max_detours < 1)
      throw Error(errc::invalid_argument, "detour budget must be positive");
  }
};

using RelayQuery = RelayQueryT<double>;

template <class Scalar>
struct RelayResultT {
  Vector3_t<Scalar> position = Vector3_t<Scalar>::Zero();
  // Gain of the weaker link, reported as negative attenuation: larger
  // (closer to zero) is better.
  Scalar min_gain = Scalar(0);
  Scalar search_distance = Scalar(0);  // total path flown while probing
  bool double_los = false;
};

using RelayResult = RelayResultT<double>;

// True when the candidate position has an unobstructed direct ray to both
// users.  A probe straight above a user has no ground segment to trace and
// counts as visible for that user (nothing can stand between them).
template <class Scalar>
bool double_los(const Vector3_t<Scalar>& p, const RelayQueryT<Scalar>& q,
                const ObstacleMapT<Scalar>& map) {
  q.validate();
  map.validate();
  if (!p.allFinite())
    throw Error(errc::invalid_argument, "candidate position must be finite");
  for (const Vector3_t<Scalar>* user : {&q.p1, &q.p2}) {
    LinkT<Scalar> link;
    link.tx = p;
    link.rx = *user;
    if (link.tx_ground() == link.rx_ground()) continue;
    if (!hard_los(link, map)) return false;
  }
  return true;
}

namespace detail {

// Query with the zero "use the grid default" steps resolved to meters.
template <class Scalar>
struct ResolvedRelayQueryT {
  RelayQueryT<Scalar> q;
  Scalar z_step;
  Scalar lateral_step;
  std::vector<Scalar> radii;
};

template <class Scalar>
ResolvedRelayQueryT<Scalar> resolve_relay_query(const RelayQueryT<Scalar>& q,
                                                const GridSpecT<Scalar>& grid) {
  ResolvedRelayQueryT<Scalar> r{q, q.z_step, q.lateral_step, q.circle_radii};
  if (r.z_step == Scalar(0)) r.z_step = grid.cell_size;
  if (r.lateral_step == Scalar(0)) r.lateral_step = grid.cell_size;
  if (r.radii.empty())
    r.radii = {grid.cell_size, Scalar(2) * grid.cell_size,
               Scalar(4) * grid.cell_size, Scalar(8) * grid.cell_size};
  return r;
}

// The walk must stay over the mapped area: obstacles are unknown beyond the
// grid, so a probe outside the footprint would see a spuriously clear ray.
template <class Scalar>
bool inside_footprint(const Vector2_t<Scalar>& g, const GridSpecT<Scalar>& grid) {
  const Scalar x = g.x() - grid.origin.x();
  const Scalar y = g.y() - grid.origin.y();
  return x >= Scalar(0) && y >= Scalar(0) &&
         x <= Scalar(grid.rows) * grid.cell_size &&
         y <= Scalar(grid.cols) * grid.cell_size;
}

template <class Scalar>
bool double_los_unchecked(const Vector3_t<Scalar>& p,
                          const RelayQueryT<Scalar>& q,
                          const ObstacleMapT<Scalar>& map) {
  for (const Vector3_t<Scalar>* user : {&q.p1, &q.p2}) {
    LinkT<Scalar> link;
    link.tx = p;
    link.rx = *user;
    if (link.tx_ground() == link.rx_ground()) continue;
    if (!hard_los(link, map)) return false;
  }
  return true;
}

template <class Scalar>
Scalar relay_min_gain(const Vector3_t<Scalar>& p,
                      const RelayQueryT<Scalar>& q,
                      const RadioMapModelT<Scalar>& model) {
  Scalar worst = Scalar(0);
  bool first = true;
  for (const Vector3_t<Scalar>* user : {&q.p1, &q.p2}) {
    LinkT<Scalar> link;
    link.tx = p;
    link.rx = *user;
    Scalar att;
    if (link.tx_ground() == link.rx_ground())
      att = path_loss_db(model.los, link.distance3());
    else
      att = detail::predict_prevalidated(link, model);
    if (first || att > worst) worst = att;
    first = false;
  }
  return -worst;
}

// Shared probe accounting: every visited candidate extends the flown path
// from the previously visited one.
template <class Scalar>
struct ProbeTrackT {
  Vector3_t<Scalar> prev;
  Scalar distance = Scalar(0);
  int probes = 0;
  bool started = false;

  void visit(const Vector3_t<Scalar>& p) {
    if (started) distance += (p - prev).norm();
    prev = p;
    started = true;
    ++probes;
  }
};

}  // namespace detail

// Walks the perpendicular bisector plane of the two users: descend one step
// at a time while both rays stay clear; when the next step down would lose
// visibility, sweep in-plane circles of increasing radius around the
// rejected point and resume from the first visible hit.  The walk starts at
// the ceiling altitude above the users' midpoint (sliding along the plane if
// that spot is shadowed), stays over the mapped footprint, and returns the
// best-gain position it adopted.
template <class Scalar>
RelayResultT<Scalar> place_relay(const RelayQueryT<Scalar>& q,
                                 const RadioMapModelT<Scalar>& model) {
  q.validate();
  model.validate();
  const auto rq = detail::resolve_relay_query(q, model.map.grid);
  const GridSpecT<Scalar>& grid = model.map.grid;

  const Vector2_t<Scalar> mid =
      (q.p1.template head<2>() + q.p2.template head<2>()) / Scalar(2);
  const Vector2_t<Scalar> axis =
      (q.p2.template head<2>() - q.p1.template head<2>()).normalized();
  const Vector2_t<Scalar> across(-axis.y(), axis.x());
  const auto at = [&](Scalar u, Scalar z) {
    const Vector2_t<Scalar> g = mid + u * across;
    return Vector3_t<Scalar>(g.x(), g.y(), z);
  };
  const auto in_bounds = [&](Scalar u, Scalar z) {
    return z >= q.z_min && z <= q.z_max &&
           detail::inside_footprint((mid + u * across).eval(), grid);
  };

  detail::ProbeTrackT<Scalar> track;
  Scalar cur_u = Scalar(0), cur_z = q.z_max;
  bool have = false;

  RelayResultT<Scalar> best;
  bool have_best = false;
  const auto adopt = [&](Scalar u, Scalar z) {
    cur_u = u;
    cur_z = z;
    const Vector3_t<Scalar> p = at(u, z);
    const Scalar gain = detail::relay_min_gain(p, q, model);
    if (!have_best || gain > best.min_gain) {
      best.position = p;
      best.min_gain = gain;
      have_best = true;
    }
  };

  // Positions already adopted during the walk; a circle sweep must not adopt
  // one again (with radius equal to the vertical step, the top of the circle
  // is exactly the point we just descended from).
  std::vector<Vector2_t<Scalar>> adopted;
  const auto already_adopted = [&](Scalar u, Scalar z) {
    for (const auto& a : adopted)
      if (std::abs(a.x() - u) < Scalar(1e-9) &&
          std::abs(a.y() - z) < Scalar(1e-9))
        return true;
    return false;
  };

  const Scalar angle_step = rq.q.angle_step_deg * Scalar(M_PI) / Scalar(180);
  // Sweeps circles around (u, z); the first visible not-yet-adopted hit that
  // does not climb more than one vertical step becomes the new position.
  const auto circle_search = [&](Scalar u, Scalar z) {
    for (const Scalar r : rq.radii) {
      const int n = int(std::ceil(Scalar(2) * Scalar(M_PI) / angle_step));
      for (int s = 0; s < n; ++s) {
        const Scalar a = Scalar(s) * angle_step;
        const Scalar pu = u + r * std::cos(a);
        const Scalar pz = z + r * std::sin(a);
        if (!in_bounds(pu, pz)) continue;
        if (pz > cur_z + rq.z_step) continue;  // keep the walk descending
        if (already_adopted(pu, pz)) continue;
        if (track.probes >= q.max_probes) return false;
        const Vector3_t<Scalar> p = at(pu, pz);
        track.visit(p);
        if (detail::double_los_unchecked(p, q, model.map)) {
          adopted.emplace_back(pu, pz);
          adopt(pu, pz);
          return true;
        }
      }
    }
    return false;
  };

  // Descends from the current position, detouring along circles, until the
  // floor is reached or the detour budget runs out.
  const auto run_descent = [&]() {
    int detours = 0;
    while (cur_z > q.z_min && track.probes < q.max_probes) {
      const Scalar next_z = std::max(cur_z - rq.z_step, q.z_min);
      if (!in_bounds(cur_u, next_z)) break;
      const Vector3_t<Scalar> cand = at(cur_u, next_z);
      track.visit(cand);
      if (detail::double_los_unchecked(cand, q, model.map)) {
        adopted.emplace_back(cur_u, next_z);
        adopt(cur_u, next_z);
        detours = 0;
        continue;
      }
      if (++detours > q.max_detours) break;
      if (!circle_search(cur_u, next_z)) break;
    }
  };

  // Find a visible starting point at the ceiling: the midpoint first, then
  // sliding outward along the plane.
  const Scalar u_limit =
      Scalar(grid.rows + grid.cols) * grid.cell_size;  // covers the footprint
  for (int k = 0; have == false; ++k) {
    const Scalar off = Scalar((k + 1) / 2) * rq.lateral_step;
    const Scalar u = (k % 2 == 0) ? off : -off;
    if (off > u_limit || track.probes >= q.max_probes) break;
    if (!in_bounds(u, q.z_max)) continue;
    const Vector3_t<Scalar> p = at(u, q.z_max);
    track.visit(p);
    if (detail::double_los_unchecked(p, q, model.map)) {
      adopted.emplace_back(u, q.z_max);
      adopt(u, q.z_max);
      have = true;
    }
  }
  if (!have)
    throw Error(errc::no_feasible_point,
                "no mutually visible relay position on the bisector plane");

  run_descent();

  // A walk stuck above the floor may just be starting in a shadowed column;
  // points on the plane are equidistant from both users, so a column that
  // descends further can only do better.  Retry from ceiling starts offset
  // along the plane; the best adopted position overall wins.
  if (best.position.z() > q.z_min) {
    const Scalar sep = (q.p2.template head<2>() - q.p1.template head<2>()).norm();
    const Scalar s = std::max(sep / Scalar(4), Scalar(2) * rq.lateral_step);
    for (const Scalar u0 : {s, -s, Scalar(2) * s, Scalar(-2) * s}) {
      if (track.probes >= q.max_probes) break;
      if (!in_bounds(u0, q.z_max) || already_adopted(u0, q.z_max)) continue;
      const Vector3_t<Scalar> p = at(u0, q.z_max);
      track.visit(p);
      if (!detail::double_los_unchecked(p, q, model.map)) continue;
      adopted.emplace_back(u0, q.z_max);
      adopt(u0, q.z_max);
      run_descent();
    }
  }

  best.search_distance = track.distance;
  best.double_los = true;
  return best;
}

enum class RelaySearchMode { planar, volumetric };

// Reference scan: visits a serpentine lattice over the map footprint (one
// fixed-altitude layer, or stacked layers between the altitude bounds) and
// keeps the mutually visible candidate with the best worst-link gain.
template <class Scalar>
RelayResultT<Scalar> exhaustive_search(const RelayQueryT<Scalar>& q,
                                       const RadioMapModelT<Scalar>& model,
                                       RelaySearchMode mode) {
  q.validate();
  model.validate();
  const auto rq = detail::resolve_relay_query(q, model.map.grid);
  const GridSpecT<Scalar>& g = model.map.grid;

  std::vector<Scalar> zs;
  if (mode == RelaySearchMode::planar) {
    zs.push_back(q.two_d_height);
  } else {
    for (Scalar z = q.z_min; z <= q.z_max + Scalar(1e-9); z += rq.z_step)
      zs.push_back(z);
  }
  const Scalar xext = Scalar(g.rows) * g.cell_size;
  const Scalar yext = Scalar(g.cols) * g.cell_size;
  const int nx = int(std::floor(double(xext / rq.lateral_step))) + 1;
  const int ny = int(std::floor(double(yext / rq.lateral_step))) + 1;

  detail::ProbeTrackT<Scalar> track;
  RelayResultT<Scalar> best;
  bool found = false;
  for (std::size_t layer = 0; layer < zs.size(); ++layer) {
    for (int ix = 0; ix < nx; ++ix) {
      for (int step = 0; step < ny; ++step) {
        const int iy = (ix % 2 == 0) ? step : ny - 1 - step;
        const Vector3_t<Scalar> p(g.origin.x() + Scalar(ix) * rq.lateral_step,
                                  g.origin.y() + Scalar(iy) * rq.lateral_step,
                                  zs[layer]);
        track.visit(p);
        if (!detail::double_los_unchecked(p, q, model.map)) continue;
        const Scalar gain = detail::relay_min_gain(p, q, model);
        if (!found || gain > best.min_gain) {
          best.position = p;
          best.min_gain = gain;
          found = true;
        }
      }
    }
  }
  if (!found)
    throw Error(errc::no_feasible_point,
                "no mutually visible candidate on the scan lattice");
  best.search_distance = track.distance;
  best.double_los = true;
  return best;
}

}  // namespace radiomap
