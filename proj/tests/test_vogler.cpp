#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "radiomap/diffraction.hpp"
#include "radiomap/rng.hpp"
#include "reference_vogler.inc"

using namespace radiomap;

namespace {

VoglerConfig tight_cfg(double lambda) {
  VoglerConfig cfg;
  cfg.wavelength = lambda;
  cfg.series_tolerance = 1e-10;
  cfg.max_series_terms = 120;
  return cfg;
}

std::pair<std::vector<double>, std::vector<double>> geometry(
    const VoglerRef& r) {
  std::vector<double> d(r.d, r.d + r.n + 1);
  std::vector<double> theta(r.theta, r.theta + r.n);
  return {d, theta};
}

}  // namespace

TEST_SUITE("vogler") {

TEST_CASE("series matches the frozen reference geometries") {
  for (const auto& r : kVoglerRef) {
    const auto [d, theta] = geometry(r);
    const auto res = vogler_attenuation(d, theta, tight_cfg(r.lambda_m));
    CHECK(res.converged);
    const Complex want{r.f_re, r.f_im};
    const double rel = std::abs(res.attenuation - want) / std::abs(want);
    INFO("edges=", r.n, " rel=", rel);
    CHECK(rel < 1e-8);
  }
}

TEST_CASE("single edge reduces to the erfc closed form") {
  Rng rng(21);
  VoglerConfig cfg;
  for (int k = 0; k < 200; ++k) {
    const double d1 = rng.uniform(5, 200);
    const double d2 = rng.uniform(5, 200);
    const double th = rng.uniform(0, 0.5);
    const auto res = vogler_attenuation({d1, d2}, {th}, cfg);
    const Complex beta =
        th *
        std::sqrt(M_PI * d1 * d2 / (cfg.wavelength * (d1 + d2))) *
        Complex(std::sqrt(0.5), std::sqrt(0.5));
    const Complex want = 0.5 * erfc_complex(beta);
    CHECK(std::abs(res.attenuation - want) <= 1e-12 * std::abs(want));
    CHECK(res.terms_used == 1);
    CHECK(res.converged);
  }
}

TEST_CASE("grazing knife edges lose 6.02 dB each time the count doubles") {
  VoglerConfig cfg;
  cfg.series_tolerance = 1e-12;
  cfg.max_series_terms = 120;
  const auto one = vogler_attenuation({50, 50}, {0.0}, cfg);
  CHECK(one.excess_loss_db == doctest::Approx(6.0206).epsilon(1e-4));
  const auto two = vogler_attenuation({50, 50, 50}, {0.0, 0.0}, cfg);
  CHECK(std::abs(two.attenuation - Complex(1.0 / 3.0, 0.0)) < 1e-9);
  CHECK(two.excess_loss_db == doctest::Approx(9.5424).epsilon(1e-4));
  const auto three =
      vogler_attenuation({50, 50, 50, 50}, {0.0, 0.0, 0.0}, cfg);
  CHECK(std::abs(three.attenuation - Complex(0.25, 0.0)) < 1e-7);
}

TEST_CASE("clear path attenuates nothing") {
  const auto res = vogler_attenuation({}, {}, VoglerConfig{});
  CHECK(res.attenuation == Complex(1.0, 0.0));
  CHECK(res.excess_loss_db == 0.0);
}

TEST_CASE("direct integration agrees with the frozen references") {
  for (const auto& r : kVoglerRef) {
    if (r.n > 3) continue;
    const auto [d, theta] = geometry(r);
    const Complex got = quadrature_oracle(d, theta, tight_cfg(r.lambda_m));
    const Complex want{r.f_re, r.f_im};
    const double rel = std::abs(got - want) / std::abs(want);
    INFO("edges=", r.n, " rel=", rel);
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("direct integration cross-checks the series on random geometry") {
  Rng rng(99);
  VoglerConfig cfg;
  cfg.series_tolerance = 1e-10;
  cfg.max_series_terms = 120;
  int done = 0;
  while (done < 25) {
    const int n = 2 + static_cast<int>(rng.uniform_index(2));
    std::vector<double> d, theta;
    for (int i = 0; i <= n; ++i) d.push_back(rng.uniform(5, 150));
    for (int i = 0; i < n; ++i) theta.push_back(rng.uniform(0.0, 0.25));
    const auto res = vogler_attenuation(d, theta, cfg);
    if (!res.converged) continue;
    Complex oracle;
    try {
      oracle = quadrature_oracle(d, theta, cfg);
    } catch (const Error&) {
      continue;  // coupling too strong for the direct form
    }
    ++done;
    const double rel = std::abs(res.attenuation - oracle) / std::abs(oracle);
    INFO("n=", n, " rel=", rel);
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("truncated series reports non-convergence") {
  VoglerConfig cfg;
  cfg.max_series_terms = 3;
  const auto res = vogler_attenuation({50, 50, 50}, {0.0, 0.0}, cfg);
  CHECK_FALSE(res.converged);
  CHECK(res.terms_used == 3);
  VoglerConfig full;
  full.max_series_terms = 64;
  CHECK(vogler_attenuation({50, 50, 50}, {0.0, 0.0}, full).converged);
}

TEST_CASE("many edges switch to the per-edge product") {
  VoglerConfig cfg;  // max_edges_exact = 8
  std::vector<double> d(10, 30.0);
  std::vector<double> theta(9, 0.1);
  const auto res = vogler_attenuation(d, theta, cfg);
  CHECK(res.pairwise_fallback);
  double product_db = 0.0;
  for (int i = 0; i < 9; ++i) {
    const auto single =
        vogler_attenuation({d[i], d[i + 1]}, {theta[i]}, cfg);
    product_db += single.excess_loss_db;
  }
  CHECK(res.excess_loss_db == doctest::Approx(product_db).epsilon(1e-10));

  std::vector<double> d8(9, 30.0);
  std::vector<double> t8(8, 0.1);
  CHECK_FALSE(vogler_attenuation(d8, t8, cfg).pairwise_fallback);
}

TEST_CASE("path-based call matches the raw-array call") {
  const Link link{{0.5, 4.5, 10.0}, {8.5, 4.5, 2.0}};
  ObstacleMap map = ObstacleMap::zero({9, 9, 1.0, {0.0, 0.0}});
  map.heights(4, 4) = 30.0;
  const auto path = extract_diffraction_path(link, map);
  VoglerConfig cfg;
  const auto a = vogler_attenuation(path, cfg);
  const auto b = vogler_attenuation(path.d, path.theta, cfg);
  CHECK(a.attenuation == b.attenuation);
}

TEST_CASE("input validation") {
  VoglerConfig cfg;
  CHECK_THROWS_AS(vogler_attenuation({10.0}, {0.1}, cfg), Error);
  CHECK_THROWS_AS(vogler_attenuation({10, 0.0}, {0.1}, cfg), Error);
  CHECK_THROWS_AS(vogler_attenuation({10, 10}, {-0.1}, cfg), Error);
  CHECK_THROWS_AS(quadrature_oracle({10, 10, 10, 10, 10},
                                    {0.1, 0.1, 0.1, 0.1}, cfg),
                  Error);
  VoglerConfig bad;
  bad.series_tolerance = 0.0;
  CHECK_THROWS_AS(vogler_attenuation({10, 10}, {0.1}, bad), Error);
}

TEST_CASE("blocked-link loss combines bent-path loss and edge attenuation") {
  const Link link{{0.5, 4.5, 10.0}, {8.5, 4.5, 2.0}};
  ObstacleMap map = ObstacleMap::zero({9, 9, 1.0, {0.0, 0.0}});
  map.heights(4, 4) = 25.0;
  const PathLossParams pl{30.0, 22.0};
  VoglerConfig cfg;
  const double got = diffraction_loss_db(link, map, pl, cfg);
  const auto path = extract_diffraction_path(link, map);
  const double expect = 30.0 + 22.0 * std::log10(path.curve_length3()) +
                        vogler_attenuation(path, cfg).excess_loss_db;
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  // A clear link has no such decomposition.
  ObstacleMap flat = ObstacleMap::zero(map.grid);
  CHECK_THROWS_AS(diffraction_loss_db(link, flat, pl, cfg), Error);
}

}  // TEST_SUITE
