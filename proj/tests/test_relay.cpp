#include <doctest.h>

#include <cmath>
#include <vector>

#include "radiomap/relay.hpp"
#include "radiomap/rng.hpp"

using namespace radiomap;

namespace {

RadioMapModel model_over(ObstacleMap map) {
  RadioMapModel model;
  model.map = std::move(map);
  model.los = {30.0, 22.0};
  return model;
}

ObstacleMap empty_map(Eigen::Index m = 16, double cell = 10.0) {
  return ObstacleMap::zero({m, m, cell, {0.0, 0.0}});
}

// Rectangular blocks scattered over a 16x16, 10 m grid.
ObstacleMap random_blocks(std::uint64_t seed, int count, double hlo,
                          double hhi) {
  ObstacleMap map = empty_map();
  Rng rng(seed);
  for (int r = 0; r < count; ++r) {
    const Eigen::Index re = Eigen::Index(rng.uniform_index(3)) + 1;
    const Eigen::Index ce = Eigen::Index(rng.uniform_index(3)) + 1;
    const Eigen::Index i0 = Eigen::Index(rng.uniform_index(16 - re));
    const Eigen::Index j0 = Eigen::Index(rng.uniform_index(16 - ce));
    const double h = rng.uniform(hlo, hhi);
    for (Eigen::Index i = i0; i < i0 + re; ++i)
      for (Eigen::Index j = j0; j < j0 + ce; ++j) map.heights(i, j) = h;
  }
  return map;
}

RelayQuery users_query(Vector3_t<double> p1, Vector3_t<double> p2) {
  RelayQuery q;
  q.p1 = p1;
  q.p2 = p2;
  q.z_min = 10.0;
  q.z_max = 100.0;
  return q;
}

}  // namespace

TEST_SUITE("relay.visibility") {

TEST_CASE("empty map sees both users from anywhere above ground") {
  const ObstacleMap map = empty_map();
  const RelayQuery q =
      users_query({30.0, 30.0, 1.5}, {120.0, 110.0, 1.5});
  CHECK(double_los(Vector3_t<double>{80.0, 70.0, 20.0}, q, map));
  CHECK(double_los(Vector3_t<double>{10.0, 150.0, 5.0}, q, map));
  CHECK(double_los(Vector3_t<double>{30.0, 30.0, 50.0}, q, map));  // straight above p1
}

TEST_CASE("wall before one user only breaks the pair") {
  ObstacleMap map = empty_map();
  for (Eigen::Index j = 0; j < 16; ++j) map.heights(5, j) = 60.0;
  const RelayQuery q =
      users_query({20.0, 80.0, 1.5}, {120.0, 80.0, 1.5});
  const Vector3_t<double> p{110.0, 80.0, 30.0};  // east of the wall, near p2
  LinkT<double> to_p2;
  to_p2.tx = p;
  to_p2.rx = q.p2;
  CHECK(hard_los(to_p2, map));
  CHECK_FALSE(double_los(p, q, map));
}

TEST_CASE("matches two independent visibility tests on random scenes") {
  Rng rng(402);
  for (int trial = 0; trial < 60; ++trial) {
    const ObstacleMap map = random_blocks(1000 + trial, 6, 10.0, 50.0);
    const RelayQuery q = users_query(
        {rng.uniform(5.0, 155.0), rng.uniform(5.0, 155.0), 1.5},
        {rng.uniform(5.0, 155.0), rng.uniform(5.0, 155.0), 1.5});
    if (q.p1.head<2>() == q.p2.head<2>()) continue;
    const Vector3_t<double> p{rng.uniform(5.0, 155.0), rng.uniform(5.0, 155.0),
                    rng.uniform(5.0, 90.0)};
    bool expect = true;
    for (const Vector3_t<double>& user : {q.p1, q.p2}) {
      LinkT<double> link;
      link.tx = p;
      link.rx = user;
      if (link.tx_ground() == link.rx_ground()) continue;
      expect = expect && hard_los(link, map);
    }
    CHECK(double_los(p, q, map) == expect);
  }
}

TEST_CASE("visibility persists straight up from any visible point") {
  Rng rng(403);
  for (int trial = 0; trial < 40; ++trial) {
    const ObstacleMap map = random_blocks(2000 + trial, 6, 10.0, 50.0);
    const RelayQuery q = users_query(
        {rng.uniform(5.0, 155.0), rng.uniform(5.0, 155.0), 1.5},
        {rng.uniform(5.0, 155.0), rng.uniform(5.0, 155.0), 1.5});
    if (q.p1.head<2>() == q.p2.head<2>()) continue;
    const Vector3_t<double> p{rng.uniform(5.0, 155.0), rng.uniform(5.0, 155.0),
                    rng.uniform(5.0, 60.0)};
    if (!double_los(p, q, map)) continue;
    for (const double up : {3.0, 17.0, 60.0}) {
      const Vector3_t<double> above = p + Vector3_t<double>{0.0, 0.0, up};
      CHECK(double_los(above, q, map));
    }
  }
}

}  // TEST_SUITE

TEST_SUITE("relay.placement") {

TEST_CASE("empty map settles at the floor directly above the midpoint") {
  const RadioMapModel model = model_over(empty_map());
  const RelayQuery q =
      users_query({40.0, 60.0, 1.5}, {120.0, 100.0, 1.5});
  const RelayResult r = place_relay(q, model);
  CHECK(r.double_los);
  CHECK(r.position.z() == doctest::Approx(q.z_min).epsilon(1e-12));
  CHECK(r.position.x() == doctest::Approx(80.0).epsilon(1e-9));
  CHECK(r.position.y() == doctest::Approx(80.0).epsilon(1e-9));
  // Straight descent: travels exactly the altitude range.
  CHECK(r.search_distance == doctest::Approx(90.0).epsilon(1e-9));

  const RelayResult ex3 =
      exhaustive_search(q, model, RelaySearchMode::volumetric);
  CHECK(ex3.position.z() == doctest::Approx(q.z_min).epsilon(1e-12));
  CHECK(std::abs(ex3.min_gain - r.min_gain) < 0.5);
}

TEST_CASE("clears the shadow of a wall between the users") {
  ObstacleMap map = empty_map();
  for (Eigen::Index j = 0; j < 16; ++j) map.heights(7, j) = 45.0;
  const RadioMapModel model = model_over(std::move(map));
  const RelayQuery q =
      users_query({20.0, 80.0, 1.5}, {130.0, 80.0, 1.5});
  const RelayResult r = place_relay(q, model);
  CHECK(r.double_los);
  CHECK(double_los(r.position, q, model.map));
  // The wall forces the stop well above the floor.
  CHECK(r.position.z() > q.z_min);
}

TEST_CASE("result is deterministic and always mutually visible") {
  for (int trial = 0; trial < 8; ++trial) {
    ObstacleMap scene = random_blocks(3000 + trial, 5, 15.0, 45.0);
    // Keep the users outdoors: a user standing inside a block can never be
    // seen and the query would be infeasible by construction.
    scene.heights(2, 3) = 0.0;
    scene.heights(13, 12) = 0.0;
    const RadioMapModel model = model_over(std::move(scene));
    const RelayQuery q =
        users_query({25.0, 35.0, 1.5}, {135.0, 125.0, 1.5});
    const RelayResult a = place_relay(q, model);
    const RelayResult b = place_relay(q, model);
    CHECK(a.double_los);
    CHECK(double_los(a.position, q, model.map));
    CHECK(a.position == b.position);
    CHECK(a.min_gain == b.min_gain);
    CHECK(a.search_distance == b.search_distance);
  }
}

TEST_CASE("guided walk stays close to the volumetric scan's optimum") {
  for (int trial = 0; trial < 5; ++trial) {
    ObstacleMap scene = random_blocks(4000 + trial, 5, 12.0, 40.0);
    scene.heights(3, 4) = 0.0;
    scene.heights(13, 12) = 0.0;
    const RadioMapModel model = model_over(std::move(scene));
    const RelayQuery q =
        users_query({30.0, 40.0, 1.5}, {130.0, 120.0, 1.5});
    const RelayResult walk = place_relay(q, model);
    const RelayResult scan =
        exhaustive_search(q, model, RelaySearchMode::volumetric);
    CHECK(scan.min_gain - walk.min_gain < 0.5);
    CHECK(walk.search_distance <= 0.05 * scan.search_distance);
  }
}

TEST_CASE("no feasible position raises an explicit error") {
  ObstacleMap map = empty_map();
  for (Eigen::Index j = 0; j < 16; ++j) map.heights(7, j) = 50.0;
  const RadioMapModel model = model_over(std::move(map));
  RelayQuery q = users_query({35.0, 80.0, 1.5}, {125.0, 80.0, 1.5});
  q.z_min = 2.0;
  q.z_max = 5.0;
  try {
    place_relay(q, model);
    FAIL("expected no feasible point");
  } catch (const Error& e) {
    CHECK(e.code() == errc::no_feasible_point);
  }
  try {
    exhaustive_search(q, model, RelaySearchMode::volumetric);
    FAIL("expected no feasible point");
  } catch (const Error& e) {
    CHECK(e.code() == errc::no_feasible_point);
  }
}

TEST_CASE("query validation rejects malformed inputs") {
  const RadioMapModel model = model_over(empty_map());
  RelayQuery q = users_query({40.0, 60.0, 1.5}, {120.0, 100.0, 1.5});
  q.z_min = -1.0;
  CHECK_THROWS_AS(place_relay(q, model), Error);
  q = users_query({40.0, 60.0, 1.5}, {40.0, 60.0, 9.0});
  CHECK_THROWS_AS(place_relay(q, model), Error);
  q = users_query({40.0, 60.0, 1.5}, {120.0, 100.0, 1.5});
  q.circle_radii = {10.0, -5.0};
  CHECK_THROWS_AS(place_relay(q, model), Error);
  q = users_query({40.0, 60.0, 1.5}, {120.0, 100.0, 1.5});
  q.z_max = 5.0;  // below z_min
  CHECK_THROWS_AS(place_relay(q, model), Error);
}

}  // TEST_SUITE

TEST_SUITE("relay.exhaustive") {

TEST_CASE("free space optimum sits at the lowest layer near the midpoint") {
  const RadioMapModel model = model_over(empty_map());
  const RelayQuery q =
      users_query({40.0, 80.0, 1.5}, {120.0, 80.0, 1.5});
  const RelayResult r =
      exhaustive_search(q, model, RelaySearchMode::volumetric);
  CHECK(r.position.z() == doctest::Approx(q.z_min).epsilon(1e-12));
  // Best lattice point minimizes the larger user distance: the midpoint
  // column (equidistant), within one lateral step.
  CHECK(std::abs(r.position.x() - 80.0) <= 10.0 + 1e-9);
  CHECK(std::abs(r.position.y() - 80.0) <= 10.0 + 1e-9);
}

TEST_CASE("adding altitude layers never hurts the best gain") {
  for (int trial = 0; trial < 6; ++trial) {
    const RadioMapModel model =
        model_over(random_blocks(5000 + trial, 5, 12.0, 45.0));
    RelayQuery q = users_query({30.0, 50.0, 1.5}, {130.0, 110.0, 1.5});
    q.two_d_height = 50.0;  // one of the volumetric layers (10, 20, ...)
    const RelayResult planar =
        exhaustive_search(q, model, RelaySearchMode::planar);
    const RelayResult vol =
        exhaustive_search(q, model, RelaySearchMode::volumetric);
    CHECK(vol.min_gain >= planar.min_gain);
  }
}

TEST_CASE("scan reports the serpentine path length") {
  const RadioMapModel model = model_over(empty_map(4, 10.0));
  RelayQuery q = users_query({5.0, 5.0, 1.5}, {31.0, 17.0, 1.5});
  q.lateral_step = 20.0;
  q.two_d_height = 50.0;
  const RelayResult r = exhaustive_search(q, model, RelaySearchMode::planar);
  // 3x3 lattice over a 40 m footprint, 20 m apart, snake order: 8 hops.
  CHECK(r.search_distance == doctest::Approx(8 * 20.0).epsilon(1e-12));
}

}  // TEST_SUITE
