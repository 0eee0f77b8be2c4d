#include <doctest.h>

#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "radiomap/geometry.hpp"
#include "radiomap/rng.hpp"

using namespace radiomap;

namespace {

std::set<std::pair<Eigen::Index, Eigen::Index>> as_set(const CellTrace& t) {
  std::set<std::pair<Eigen::Index, Eigen::Index>> s;
  for (const auto& c : t.cells) s.emplace(c.i, c.j);
  return s;
}

GridSpec unit_grid(Eigen::Index n) { return {n, n, 1.0, {0.0, 0.0}}; }

Link make_link(double x0, double y0, double z0, double x1, double y1,
               double z1) {
  Link l;
  l.tx = {x0, y0, z0};
  l.rx = {x1, y1, z1};
  return l;
}

// Synthetic straight-line trace for profile tests: cell k sits at s = s_k
// along a link of length d0 on the x axis.
CellTrace synthetic_trace(const Link& link, const std::vector<double>& s) {
  CellTrace t;
  t.ground_distance = link.ground_distance();
  const double d0 = t.ground_distance;
  for (std::size_t k = 0; k < s.size(); ++k) {
    CellTrace::Cell c;
    c.i = static_cast<Eigen::Index>(k);
    c.j = 0;
    c.center = {s[k], 0.0};
    c.s = s[k];
    c.z = link.tx.z() + (link.rx.z() - link.tx.z()) * (s[k] / d0);
    t.cells.push_back(c);
  }
  return t;
}

}  // namespace

TEST_SUITE("geometry.trace") {

TEST_CASE("diagonal through a 5x5 grid") {
  const auto t = trace_cells(make_link(0.1, 0.4, 10, 4.9, 4.6, 10),
                             unit_grid(5));
  // Strictly monotone diagonal, no corner hits.
  CHECK(t.cells.size() >= 9);
  CHECK(as_set(t) == oracle::trace(make_link(0.1, 0.4, 10, 4.9, 4.6, 10),
                                   unit_grid(5)));
}

TEST_CASE("exact corner crossings pick up both side cells") {
  const auto t = trace_cells(make_link(0, 0, 10, 3, 3, 10), unit_grid(3));
  const std::set<std::pair<Eigen::Index, Eigen::Index>> expect = {
      {0, 0}, {0, 1}, {1, 0}, {1, 1}, {1, 2}, {2, 1}, {2, 2}};
  CHECK(as_set(t) == expect);
}

TEST_CASE("axis-aligned segment on a grid line blocks both rows") {
  const auto t = trace_cells(make_link(0.5, 2.0, 10, 4.5, 2.0, 10),
                             unit_grid(5));
  std::set<std::pair<Eigen::Index, Eigen::Index>> expect;
  for (Eigen::Index i = 0; i <= 4; ++i) {
    expect.emplace(i, 1);
    expect.emplace(i, 2);
  }
  CHECK(as_set(t) == expect);
}

TEST_CASE("axis-aligned segment inside a row stays in that row") {
  const auto t = trace_cells(make_link(0.5, 2.5, 10, 4.5, 2.5, 10),
                             unit_grid(5));
  std::set<std::pair<Eigen::Index, Eigen::Index>> expect;
  for (Eigen::Index i = 0; i <= 4; ++i) expect.emplace(i, 2);
  CHECK(as_set(t) == expect);
}

TEST_CASE("cells touched only at a segment endpoint are excluded") {
  // Segment ends exactly on the boundary between cells 1 and 2.
  const auto t = trace_cells(make_link(0.5, 0.5, 10, 2.0, 0.5, 10),
                             unit_grid(4));
  const std::set<std::pair<Eigen::Index, Eigen::Index>> expect = {{0, 0},
                                                                  {1, 0}};
  CHECK(as_set(t) == expect);
}

TEST_CASE("partially outside segments are clipped") {
  const auto t = trace_cells(make_link(-3.5, 0.5, 10, 2.5, 0.5, 10),
                             unit_grid(3));
  const std::set<std::pair<Eigen::Index, Eigen::Index>> expect = {
      {0, 0}, {1, 0}, {2, 0}};
  CHECK(as_set(t) == expect);
}

TEST_CASE("segments that miss the grid fail") {
  CHECK_THROWS_WITH_AS(trace_cells(make_link(-5, -5, 10, -1, -2, 10),
                                   unit_grid(4)),
                       "link does not cross the grid", Error);
}

TEST_CASE("cells come back ordered by distance from tx") {
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const auto link =
        make_link(rng.uniform(0, 16), rng.uniform(0, 16), rng.uniform(1, 30),
                  rng.uniform(0, 16), rng.uniform(0, 16), rng.uniform(1, 30));
    const auto t = trace_cells(link, unit_grid(16));
    for (std::size_t k = 1; k < t.cells.size(); ++k)
      CHECK(t.cells[k - 1].s <= t.cells[k].s);
  }
}

TEST_CASE("projection positions and ray altitudes are consistent") {
  const auto link = make_link(1.0, 1.0, 20.0, 9.0, 7.0, 4.0);
  const GridSpec g{10, 10, 1.0, {0.0, 0.0}};
  const auto t = trace_cells(link, g);
  const double d0 = link.ground_distance();
  CHECK(t.ground_distance == doctest::Approx(d0));
  for (const auto& c : t.cells) {
    CHECK(c.s >= 0.0);
    CHECK(c.s <= d0);
    // z interpolates the endpoint altitudes linearly in s.
    const double expect = 20.0 + (4.0 - 20.0) * (c.s / d0);
    CHECK(c.z == doctest::Approx(expect).epsilon(1e-12));
    // The projected point is the closest point of the ground segment.
    const Eigen::Vector2d u = (link.rx_ground() - link.tx_ground()) / d0;
    const Eigen::Vector2d proj = link.tx_ground() + c.s * u;
    const double dproj = (c.center - proj).norm();
    for (double sa : {0.0, 0.25 * d0, 0.5 * d0, 0.9 * d0, d0}) {
      const Eigen::Vector2d q = link.tx_ground() + sa * u;
      CHECK(dproj <= (c.center - q).norm() + 1e-9);
    }
  }
}

TEST_CASE("random segments match the exhaustive oracle") {
  Rng rng(2024);
  for (int rep = 0; rep < 400; ++rep) {
    const GridSpec g = unit_grid(16);
    const auto link =
        make_link(rng.uniform(-2, 18), rng.uniform(-2, 18), 10,
                  rng.uniform(-2, 18), rng.uniform(-2, 18), 10);
    if (link.tx_ground() == link.rx_ground()) continue;
    CellTrace t;
    try {
      t = trace_cells(link, g);
    } catch (const Error&) {
      CHECK(oracle::trace(link, g).empty());
      continue;
    }
    CHECK(as_set(t) == oracle::trace(link, g));
  }
}

TEST_CASE("random segments on scaled/offset grids match the oracle") {
  Rng rng(77);
  for (int rep = 0; rep < 200; ++rep) {
    GridSpec g{24, 18, 2.5, {-10.0, 4.0}};
    const auto link = make_link(rng.uniform(-15, 55), rng.uniform(0, 55), 10,
                                rng.uniform(-15, 55), rng.uniform(0, 55), 10);
    if (link.tx_ground() == link.rx_ground()) continue;
    CellTrace t;
    try {
      t = trace_cells(link, g);
    } catch (const Error&) {
      CHECK(oracle::trace(link, g).empty());
      continue;
    }
    CHECK(as_set(t) == oracle::trace(link, g));
  }
}

}  // TEST_SUITE

TEST_SUITE("geometry.features") {

TEST_CASE("line feature is the ray altitude on traced cells, zero elsewhere") {
  const auto link = make_link(0.5, 0.5, 12.0, 7.5, 5.5, 2.0);
  const GridSpec g = unit_grid(8);
  const auto L = line_feature(link, g);
  const auto t = trace_cells(link, g);
  Matrix2d_t<double> expect = Matrix2d_t<double>::Zero(8, 8);
  for (const auto& c : t.cells) expect(c.i, c.j) = c.z;
  CHECK((L - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(L.maxCoeff() <= 12.0);
  CHECK(L.maxCoeff() > 0.0);
}

TEST_CASE("ellipse mask has the right axes") {
  // Foci 100 m apart, eccentricity 0.5: semi-major 100, semi-minor ~86.6.
  GridSpec g{201, 201, 1.0, {0.0, 0.0}};
  const auto link = make_link(50.5, 100.5, 10, 150.5, 100.5, 10);
  const auto M = ellipse_mask(link, g, 0.5);
  auto at = [&](double wx, double wy) {
    return M(static_cast<Eigen::Index>(wx), static_cast<Eigen::Index>(wy));
  };
  CHECK(at(200, 100) == 1.0);   // focal sum exactly 200: boundary is inside
  CHECK(at(0, 100) == 1.0);     // the opposite vertex, also exactly 200
  CHECK(at(0, 99) == 0.0);      // off axis the sum exceeds the threshold
  CHECK(at(1, 100) == 1.0);
  CHECK(at(100, 186) == 1.0);   // 86 above center: inside
  CHECK(at(100, 188) == 0.0);   // 87.5 above center: outside
  CHECK(at(100, 100) == 1.0);
  // Mask is 0/1 valued.
  CHECK(((M.array() == 0.0) || (M.array() == 1.0)).all());
}

TEST_CASE("ellipse mask rejects bad eccentricity") {
  const auto link = make_link(0, 0, 1, 10, 0, 1);
  CHECK_THROWS_AS(ellipse_mask(link, unit_grid(4), 0.0), Error);
  CHECK_THROWS_AS(ellipse_mask(link, unit_grid(4), 1.0), Error);
}

TEST_CASE("focus_line clips to positive excess on marked cells") {
  Matrix2d_t<double> H(2, 2), L(2, 2);
  H << 2, 0, 1, 3;
  L << 1, 0, 2, 5;
  Matrix2d_t<double> O = focus_line(H, L);
  CHECK(O(0, 0) == 1.0);  // 2 - 1, marked
  CHECK(O(0, 1) == 0.0);  // unmarked
  CHECK(O(1, 0) == 0.0);  // negative excess clips to 0
  CHECK(O(1, 1) == 0.0);
}

TEST_CASE("focus_ellipse is an elementwise product") {
  Matrix2d_t<double> H(2, 2), M(2, 2);
  H << 4, 5, 6, 7;
  M << 1, 0, 0, 1;
  Matrix2d_t<double> O = focus_ellipse(H, M);
  CHECK(O(0, 0) == 4.0);
  CHECK(O(0, 1) == 0.0);
  CHECK(O(1, 0) == 0.0);
  CHECK(O(1, 1) == 7.0);
}

TEST_CASE("soft indicator: 1 when clear, small when intruded") {
  Matrix2d_t<double> O = Matrix2d_t<double>::Zero(3, 3);
  CHECK(soft_los_indicator(O) == 1.0);
  O(1, 1) = 2.0;
  const double v = soft_los_indicator(O);
  CHECK(v == doctest::Approx(1.0 - std::tanh(2.0)).epsilon(1e-15));
  CHECK(v <= 0.04);
  // Monotone decreasing in total intrusion.
  O(1, 1) = 3.0;
  CHECK(soft_los_indicator(O) < v);
}

TEST_CASE("trace_excess_sum matches the dense formula") {
  Rng rng(5);
  const GridSpec g = unit_grid(12);
  for (int rep = 0; rep < 30; ++rep) {
    const auto link =
        make_link(rng.uniform(0, 12), rng.uniform(0, 12), rng.uniform(2, 40),
                  rng.uniform(0, 12), rng.uniform(0, 12), rng.uniform(1, 10));
    if (link.tx_ground() == link.rx_ground()) continue;
    Matrix2d_t<double> H(12, 12);
    for (Eigen::Index jj = 0; jj < 12; ++jj)
      for (Eigen::Index ii = 0; ii < 12; ++ii)
        H(ii, jj) = rng.uniform(0, 30);
    const auto t = trace_cells(link, g);
    const auto L = line_feature(link, g);
    const double dense = focus_line(H, L).sum();
    const double sparse = trace_excess_sum(t, H);
    CHECK(sparse == doctest::Approx(dense).epsilon(1e-12));
  }
}

TEST_CASE("hard_los uses a strict clearance test") {
  const auto link = make_link(0.5, 0.5, 10.0, 8.5, 0.5, 10.0);
  const GridSpec g = unit_grid(9);
  ObstacleMap map = ObstacleMap::zero(g);
  CHECK(hard_los(link, map));
  map.heights(4, 0) = 9.0;
  CHECK(hard_los(link, map));
  map.heights(4, 0) = 10.0;  // exactly grazing blocks
  CHECK_FALSE(hard_los(link, map));
  map.heights(4, 0) = 25.0;
  CHECK_FALSE(hard_los(link, map));
}

}  // TEST_SUITE

TEST_SUITE("geometry.path") {

TEST_CASE("single wall gives one edge on top of the wall") {
  const auto link = make_link(0.5, 4.5, 10.0, 8.5, 4.5, 2.0);
  const GridSpec g = unit_grid(9);
  ObstacleMap map = ObstacleMap::zero(g);
  map.heights(4, 4) = 30.0;
  const auto path = extract_diffraction_path(link, map);
  REQUIRE(path.edge_count() == 1);
  CHECK(path.vertices.size() == 3);
  CHECK(path.vertices[1].alt == 30.0);
  CHECK(path.vertices[1].cell_i == 4);
  CHECK(path.vertices[1].cell_j == 4);
  CHECK(path.theta[0] > 0.0);
  CHECK(path.d.size() == 2);
  CHECK(path.d[0] + path.d[1] ==
        doctest::Approx(link.ground_distance()).epsilon(1e-12));
  // Vertex ground point sits inside the wall cell.
  CHECK(path.vertices[1].ground.x() >= 4.0);
  CHECK(path.vertices[1].ground.x() <= 5.0);
  CHECK(path.vertices[1].ground.y() == doctest::Approx(4.5));
}

TEST_CASE("second lower wall in the shadow is absorbed") {
  const auto link = make_link(0.5, 4.5, 20.0, 12.5, 4.5, 2.0);
  const GridSpec g{13, 9, 1.0, {0.0, 0.0}};
  ObstacleMap map = ObstacleMap::zero(g);
  map.heights(4, 4) = 40.0;
  map.heights(8, 4) = 10.0;  // well below the 40 m skyline
  const auto path = extract_diffraction_path(link, map);
  CHECK(path.edge_count() == 1);
  CHECK(path.vertices[1].alt == 40.0);
}

TEST_CASE("two comparable walls give two edges") {
  const auto link = make_link(0.5, 4.5, 12.0, 12.5, 4.5, 12.0);
  const GridSpec g{13, 9, 1.0, {0.0, 0.0}};
  ObstacleMap map = ObstacleMap::zero(g);
  map.heights(4, 4) = 30.0;
  map.heights(8, 4) = 30.0;
  const auto path = extract_diffraction_path(link, map);
  REQUIRE(path.edge_count() == 2);
  CHECK(path.vertices[1].cell_i == 4);
  CHECK(path.vertices[2].cell_i == 8);
  CHECK(path.theta[0] > 0.0);
  CHECK(path.theta[1] > 0.0);
  const double sum = path.d[0] + path.d[1] + path.d[2];
  CHECK(sum == doctest::Approx(link.ground_distance()).epsilon(1e-12));
}

TEST_CASE("collinear tops keep only the outermost edges") {
  const auto link = make_link(0, 0, 10, 10, 0, 10);
  // Profile with three cells whose tops are collinear at equal height.
  const auto trace = synthetic_trace(link, {3.0, 5.0, 7.0});
  Matrix2d_t<double> H(3, 1);
  H << 20.0, 20.0, 20.0;
  const auto path = extract_diffraction_path(link, trace, H);
  REQUIRE(path.edge_count() == 2);
  CHECK(path.vertices[1].cell_i == 0);  // s = 3
  CHECK(path.vertices[2].cell_i == 2);  // s = 7 (middle absorbed)
  CHECK(path.theta[0] > 0.0);
  CHECK(path.theta[1] > 0.0);
}

TEST_CASE("grazing-only blockage becomes one zero-angle edge") {
  const auto link = make_link(0, 0, 10, 10, 0, 10);
  const auto trace = synthetic_trace(link, {2.0, 6.0});
  Matrix2d_t<double> H(2, 1);
  H << 10.0, 10.0;  // both exactly graze the ray
  const auto path = extract_diffraction_path(link, trace, H);
  REQUIRE(path.edge_count() == 1);
  CHECK(path.vertices[1].cell_i == 1);  // farthest grazing cell, s = 6
  CHECK(path.theta[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("clear links refuse to produce a path") {
  const auto link = make_link(0.5, 0.5, 50.0, 7.5, 7.5, 50.0);
  ObstacleMap map = ObstacleMap::zero(unit_grid(8));
  map.heights.setConstant(5.0);
  CHECK_THROWS_AS(extract_diffraction_path(link, map), Error);
}

TEST_CASE("random blocked profiles match the gift-wrapping oracle") {
  Rng rng(31337);
  int checked = 0;
  while (checked < 200) {
    const double alt_t = rng.uniform(0, 40);
    const double alt_r = rng.uniform(0, 40);
    const auto link = make_link(0, 0, alt_t, 64, 0, alt_r);
    std::vector<double> s;
    for (int k = 0; k < 62; ++k) s.push_back(k + 1.0);
    const auto trace = synthetic_trace(link, s);
    Matrix2d_t<double> H(62, 1);
    bool blocked = false;
    for (int k = 0; k < 62; ++k) {
      H(k, 0) = rng.uniform(0, 45);
      blocked |= (H(k, 0) >= trace.cells[k].z);
    }
    if (!blocked) continue;
    ++checked;

    const auto path = extract_diffraction_path(link, trace, H);

    std::vector<oracle::HullPoint> pts;
    pts.push_back({0.0, alt_t});
    for (int k = 0; k < 62; ++k) pts.push_back({s[k], H(k, 0)});
    pts.push_back({64.0, alt_r});
    const auto hull = oracle::upper_hull(pts);

    REQUIRE(path.vertices.size() == hull.size());
    for (std::size_t k = 0; k < hull.size(); ++k) {
      CHECK(path.vertices[k].alt == hull[k].h);
      if (k > 0) {
        CHECK(path.d[k - 1] ==
              doctest::Approx(hull[k].s - hull[k - 1].s).epsilon(1e-12));
      }
    }
    double sum = 0.0;
    for (double dk : path.d) sum += dk;
    CHECK(sum == doctest::Approx(64.0).epsilon(1e-9));
    for (double th : path.theta) CHECK(th >= 0.0);
  }
}

TEST_CASE("curve length is the 3d polyline length") {
  const auto link = make_link(0, 0, 0, 10, 0, 0);
  const auto trace = synthetic_trace(link, {5.0});
  Matrix2d_t<double> H(1, 1);
  H << 5.0;
  const auto path = extract_diffraction_path(link, trace, H);
  // Two slanted hops of length sqrt(25 + 25).
  CHECK(path.curve_length3() ==
        doctest::Approx(2.0 * std::sqrt(50.0)).epsilon(1e-12));
}

}  // TEST_SUITE
