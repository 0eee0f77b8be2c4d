#include <doctest.h>

#include <cmath>
#include <complex>

#include "radiomap/diffraction.hpp"
#include "radiomap/rng.hpp"
#include "reference_erfc.inc"
#include "reference_ierfc.inc"

using radiomap::Complex;
using radiomap::erfc_complex;
using radiomap::repeated_erfc_integral;

namespace {
double rel_err(Complex got, Complex want) {
  return std::abs(got - want) / std::abs(want);
}
}  // namespace

TEST_SUITE("erfc") {

TEST_CASE("matches the frozen reference table") {
  double worst = 0.0;
  for (const auto& r : kErfcRef) {
    const Complex got = erfc_complex({r.x, r.y});
    const Complex want{r.re, r.im};
    const double e = rel_err(got, want);
    CHECK(e < 2e-12);
    worst = std::max(worst, e);
  }
  // The typical error should be far below the gate.
  CHECK(worst < 1e-12);
}

TEST_CASE("agrees with std::erfc on the real axis") {
  for (double x : {-6.0, -2.5, -1.0, -0.25, 0.0, 0.1, 0.75, 1.5, 3.0, 7.0,
                   15.0, 25.0}) {
    const Complex got = erfc_complex({x, 0.0});
    CHECK(got.imag() == 0.0);
    CHECK(std::abs(got.real() - std::erfc(x)) <=
          1e-13 * std::max(std::erfc(x), 1e-300));
  }
}

TEST_CASE("conjugation symmetry is exact") {
  radiomap::Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Complex z(rng.uniform(-5, 5), rng.uniform(0.01, 5));
    const Complex a = erfc_complex(z);
    const Complex b = erfc_complex(std::conj(z));
    CHECK(a.real() == b.real());
    CHECK(a.imag() == -b.imag());
  }
}

TEST_CASE("reflection identity erfc(z) + erfc(-z) = 2") {
  radiomap::Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const Complex z(rng.uniform(0.01, 4), rng.uniform(-3, 3));
    const Complex s = erfc_complex(z) + erfc_complex(-z);
    CHECK(std::abs(s - 2.0) < 1e-12);
  }
}

TEST_CASE("special values") {
  CHECK(erfc_complex({0.0, 0.0}) == Complex(1.0, 0.0));
  // Large positive real arguments underflow smoothly, not abruptly.
  const Complex tail = erfc_complex({24.0, 0.0});
  CHECK(tail.real() > 0.0);
  CHECK(tail.real() < 1e-200);
}

}  // TEST_SUITE

TEST_SUITE("repeated_erfc") {

TEST_CASE("matches the frozen reference table") {
  for (const auto& r : kIerfcRef) {
    const Complex want{r.re, r.im};
    const Complex got = repeated_erfc_integral(r.m, {r.x, r.y});
    // The achievable relative accuracy is set by the integrand envelope:
    // along the positive real axis |t^m e^{-(t+z)^2}| peaks at
    // t* = (-x + sqrt(x^2 + 2m)) / 2, and when Im z is large the
    // oscillation cancels most of that peak, so the result can sit many
    // orders below the envelope.  We require near-machine accuracy
    // relative to the envelope, which implies 5e-9 relative accuracy
    // whenever little cancellation occurs.
    double env_log = 0.0;  // log of the envelope scale (m = 0 -> exp(y^2))
    if (r.m > 0) {
      const double tstar =
          0.5 * (-r.x + std::sqrt(r.x * r.x + 2.0 * r.m));
      env_log = r.m * std::log(tstar) - (tstar + r.x) * (tstar + r.x) +
                r.y * r.y - std::lgamma(r.m + 1.0);
    } else {
      env_log = std::max(0.0, r.y * r.y - r.x * r.x);
    }
    const double allowed =
        std::max(5e-9 * std::abs(want), 5e-13 * std::exp(env_log));
    CHECK(std::abs(got - want) < allowed);
  }
}

TEST_CASE("value at zero is 1 / (2^m Gamma(m/2 + 1))") {
  for (int m : {0, 1, 2, 3, 5, 8, 13, 21, 34, 55}) {
    const double want =
        1.0 / (std::pow(2.0, m) * std::tgamma(0.5 * m + 1.0));
    const Complex got = repeated_erfc_integral(m, {0.0, 0.0});
    CHECK(std::abs(got.real() - want) <= 1e-12 * want);
    CHECK(std::abs(got.imag()) <= 1e-15 * want);
  }
}

TEST_CASE("outputs satisfy the defining recurrence") {
  for (const Complex z : {Complex(0.8, 0.8), Complex(3.0, 1.0),
                          Complex(6.0, 6.0), Complex(0.0, 2.0)}) {
    for (int m : {2, 3, 5, 7}) {
      const Complex ym = repeated_erfc_integral(m, z);
      const Complex y1 = repeated_erfc_integral(m - 1, z);
      const Complex y2 = repeated_erfc_integral(m - 2, z);
      const Complex rhs = -(z / double(m)) * y1 + y2 / (2.0 * m);
      CHECK(std::abs(ym - rhs) <=
            1e-8 * (std::abs(ym) + std::abs(y1) + std::abs(y2)));
    }
  }
}

TEST_CASE("order limits") {
  CHECK_THROWS_AS(repeated_erfc_integral(-1, {1.0, 0.0}), radiomap::Error);
  CHECK_THROWS_AS(repeated_erfc_integral(161, {1.0, 0.0}), radiomap::Error);
  CHECK_NOTHROW(repeated_erfc_integral(160, {1.0, 1.0}));
}

}  // TEST_SUITE
