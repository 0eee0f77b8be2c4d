#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "radiomap/geometry.hpp"
#include "radiomap/params.hpp"

namespace radiomap {

using Complex = std::complex<double>;

namespace detail {

inline constexpr double kTwoOverSqrtPi = 1.1283791670955125739;

// 20- and 32-point Gauss-Legendre rules on [-1, 1].
inline constexpr std::array<double, 20> kGl20X = {
    -0.99312859918509488, -0.96397192727791381, -0.91223442825132584,
    -0.83911697182221878, -0.7463319064601508,  -0.63605368072651502,
    -0.51086700195082713, -0.37370608871541955, -0.2277858511416451,
    -0.076526521133497338, 0.076526521133497338, 0.2277858511416451,
    0.37370608871541955,  0.51086700195082713,  0.63605368072651502,
    0.7463319064601508,   0.83911697182221878,  0.91223442825132584,
    0.96397192727791381,  0.99312859918509488};
inline constexpr std::array<double, 20> kGl20W = {
    0.017614007139153273, 0.040601429800386217, 0.062672048334109443,
    0.083276741576704671, 0.10193011981724026,  0.11819453196151825,
    0.13168863844917653,  0.14209610931838187,  0.14917298647260366,
    0.15275338713072578,  0.15275338713072578,  0.14917298647260366,
    0.14209610931838187,  0.13168863844917653,  0.11819453196151825,
    0.10193011981724026,  0.083276741576704671, 0.062672048334109443,
    0.040601429800386217, 0.017614007139153273};
inline constexpr std::array<double, 32> kGl32X = {
    -0.99726386184948157, -0.98561151154526838, -0.96476225558750639,
    -0.93490607593773967, -0.8963211557660522,  -0.84936761373256997,
    -0.79448379596794239, -0.73218211874028971, -0.66304426693021523,
    -0.5877157572407623,  -0.50689990893222936, -0.42135127613063533,
    -0.33186860228212767, -0.23928736225213706, -0.14447196158279649,
    -0.04830766568773831,  0.04830766568773831,  0.14447196158279649,
    0.23928736225213706,  0.33186860228212767,  0.42135127613063533,
    0.50689990893222936,  0.5877157572407623,   0.66304426693021523,
    0.73218211874028971,  0.79448379596794239,  0.84936761373256997,
    0.8963211557660522,   0.93490607593773967,  0.96476225558750639,
    0.98561151154526838,  0.99726386184948157};
inline constexpr std::array<double, 32> kGl32W = {
    0.0070186100094692984, 0.016274394730905965, 0.025392065309262427,
    0.034273862913021626,  0.042835898022226426, 0.050998059262376244,
    0.058684093478535704,  0.065822222776361752, 0.072345794108848449,
    0.078193895787070311,  0.083311924226946846, 0.087652093004403908,
    0.091173878695763863,  0.093844399080804566, 0.095638720079274833,
    0.096540088514727812,  0.096540088514727812, 0.095638720079274833,
    0.093844399080804566,  0.091173878695763863, 0.087652093004403908,
    0.083311924226946846,  0.078193895787070311, 0.072345794108848449,
    0.065822222776361752,  0.058684093478535704, 0.050998059262376244,
    0.042835898022226426,  0.034273862913021626, 0.025392065309262427,
    0.016274394730905965,  0.0070186100094692984};

// Composite Gauss-Legendre nodes over [0, upper] in panels of width <= w.
struct CompositeRule {
  std::vector<double> t, w;
};

inline CompositeRule composite_gl32(double upper, double panel_width) {
  CompositeRule r;
  const int panels = std::max(1, static_cast<int>(std::ceil(upper / panel_width)));
  const double pw = upper / panels;
  r.t.reserve(32 * panels);
  r.w.reserve(32 * panels);
  for (int p = 0; p < panels; ++p) {
    const double lo = p * pw;
    for (int k = 0; k < 32; ++k) {
      r.t.push_back(lo + 0.5 * pw * (kGl32X[k] + 1.0));
      r.w.push_back(0.5 * pw * kGl32W[k]);
    }
  }
  return r;
}

inline Complex erf_taylor(Complex z) {
  // erf(z) = 2/sqrt(pi) * sum (-1)^k z^(2k+1) / (k! (2k+1)); |z| < ~3.2.
  const Complex z2 = z * z;
  Complex term = z;
  Complex sum = z;
  for (int k = 1; k < 80; ++k) {
    term *= -z2 / double(k);
    const Complex add = term / double(2 * k + 1);
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
  }
  return kTwoOverSqrtPi * sum;
}

inline double erfi_real(double y) {
  // Imaginary error function for y >= 0, overflowing gracefully.
  if (y > 26.7) return std::numeric_limits<double>::infinity();
  if (y >= 12.0) {
    // Asymptotic: erfi(y) ~ e^(y^2)/(y sqrt(pi)) * sum (2k-1)!!/(2y^2)^k.
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 20; ++k) {
      term *= (2.0 * k - 1.0) / (2.0 * y * y);
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    return std::exp(y * y) / (y * std::sqrt(M_PI)) * sum;
  }
  double term = y, sum = y;
  for (int k = 1; k < 400; ++k) {
    term *= y * y / double(k);
    const double add = term / double(2 * k + 1);
    sum += add;
    if (add < 1e-19 * sum && term < y * y * y) break;
  }
  return kTwoOverSqrtPi * sum;
}

inline Complex erfc_strip(double x, double y) {
  // Near the imaginary axis: erfc(x+iy) = erfc(iy) - 2/sqrt(pi) *
  // integral_0^x exp(-(s+iy)^2) ds, with erfc(iy) = 1 - i erfi(y).
  const Complex base(1.0, -erfi_real(y));
  Complex integral(0.0, 0.0);
  for (int k = 0; k < 20; ++k) {
    const double s = 0.5 * x * (kGl20X[k] + 1.0);
    const Complex e = Complex(s, y);
    integral += 0.5 * x * kGl20W[k] * std::exp(-e * e);
  }
  return base - kTwoOverSqrtPi * integral;
}

inline Complex faddeeva_w(Complex zeta) {
  // Trapezoid approximation of the Faddeeva function for Im(zeta) >= 0.
  constexpr double h = 0.5;
  constexpr int terms = 14;
  const Complex z2 = zeta * zeta;
  Complex sum = 1.0 / zeta;
  for (int n = 1; n <= terms; ++n) {
    const double nh2 = n * h * n * h;
    sum += std::exp(-nh2) * (2.0 * zeta) / (z2 - nh2);
  }
  Complex w = Complex(0.0, h / M_PI) * sum;
  if (zeta.imag() < M_PI / h) {
    // Pole-ladder correction; invalid (and unnecessary) above Im = pi/h.
    w += 2.0 * std::exp(-z2) / (1.0 - std::exp(Complex(0, -2.0 * M_PI / h) * zeta));
  }
  return w;
}

}  // namespace detail

// Complementary error function for complex arguments.  Accuracy is close to
// machine precision except within O(0.01) of the zeros of erfc in the left
// half plane (and their mirror points near erfc = 2), where cancellation in
// the reflection erfc(-z) = 2 - erfc(z) limits the relative error; absolute
// accuracy is maintained there.
inline Complex erfc_complex(Complex z) {
  const double x = z.real(), y = z.imag();
  if (x < 0.0) return 2.0 - erfc_complex(-z);
  if (y < 0.0) return std::conj(erfc_complex(std::conj(z)));
  if (x < 0.5 && x * x + y * y < 10.24) return 1.0 - detail::erf_taylor(z);
  if (x < 0.05) return detail::erfc_strip(x, y);
  // erfc(z) = exp(-z^2) w(iz)
  return std::exp(-z * z) * detail::faddeeva_w(Complex(-y, x));
}

namespace detail {

// Repeated integrals y_m = i^m erfc(z) for m = 0..mmax via the forward
// recurrence y_m = -(z/m) y_{m-1} + y_{m-2}/(2m).  The absolute error stays
// tiny; relative error degrades as m|z| grows, which the series use below
// can absorb (the affected terms carry negligible weight).
inline std::vector<Complex> ierfc_forward(Complex z, int mmax) {
  std::vector<Complex> y(mmax + 1);
  Complex prev2 = kTwoOverSqrtPi * std::exp(-z * z);  // m = -1
  y[0] = erfc_complex(z);
  Complex prev1 = y[0];
  for (int m = 1; m <= mmax; ++m) {
    y[m] = -(z / double(m)) * prev1 + prev2 / (2.0 * m);
    prev2 = prev1;
    prev1 = y[m];
  }
  return y;
}

inline Complex ierfc_quadrature(int m, Complex z) {
  // i^m erfc(z) = 2/sqrt(pi) / m! * integral_0^inf t^m exp(-(t+z)^2) dt,
  // evaluated in log form with oscillation-limited panel widths.
  const double x = z.real(), y = std::abs(z.imag());
  const double peak = 0.5 * (-x + std::sqrt(x * x + 2.0 * m));
  const double upper = peak + 10.0 + std::sqrt(double(m));
  const double panel = std::min(1.0, 12.0 / std::max(1.0, 2.0 * y));
  const CompositeRule rule = composite_gl32(upper, panel);
  const double lg = std::lgamma(double(m) + 1.0);
  Complex sum(0.0, 0.0);
  for (std::size_t k = 0; k < rule.t.size(); ++k) {
    const double t = rule.t[k];
    const Complex tz = t + z;
    const Complex expo = double(m) * std::log(t) - tz * tz - lg;
    sum += rule.w[k] * std::exp(expo);
  }
  return kTwoOverSqrtPi * sum;
}

}  // namespace detail

// Repeated integral of the complementary error function, i^m erfc(z).
// Exact forward recurrence where it is well conditioned, log-domain
// quadrature elsewhere.  m is limited to 160.
inline Complex repeated_erfc_integral(int m, Complex z) {
  if (m < 0) throw Error(errc::invalid_argument, "order must be >= 0");
  if (m > 160)
    throw Error(errc::series_order, "order above 160 is not supported");
  if (m == 0) return erfc_complex(z);
  const double r = std::abs(z);
  const bool recur = (r <= 0.5) || (r <= 1.5 && m <= 32) || (r <= 4.0 && m <= 8);
  if (recur) return detail::ierfc_forward(z, m)[m];
  return detail::ierfc_quadrature(m, z);
}

// Tuning for the multi-edge attenuation series.
struct VoglerConfig {
  double wavelength = 0.05;      // meters
  double series_tolerance = 1e-8;
  int max_series_terms = 64;
  int max_edges_exact = 8;       // beyond: per-edge product approximation

  void validate() const {
    if (!(wavelength > 0.0) || !std::isfinite(wavelength))
      throw Error(errc::invalid_argument, "wavelength must be positive");
    if (!(series_tolerance > 0.0) || series_tolerance > 0.1)
      throw Error(errc::invalid_argument,
                  "series_tolerance must be in (0, 0.1]");
    if (max_series_terms < 1 || max_series_terms > 120)
      throw Error(errc::invalid_argument,
                  "max_series_terms must be in [1, 120]");
    if (max_edges_exact < 1 || max_edges_exact > 16)
      throw Error(errc::invalid_argument,
                  "max_edges_exact must be in [1, 16]");
  }
};

struct VoglerResult {
  Complex attenuation{1.0, 0.0};  // field ratio F
  double excess_loss_db = 0.0;    // -20 log10 |F|
  int terms_used = 0;
  bool converged = true;
  bool pairwise_fallback = false;
};

namespace detail {

struct EdgeGeometry {
  int n = 0;
  std::vector<Complex> beta;
  std::vector<double> alpha;
  double c_n = 1.0;
  Complex sigma{0.0, 0.0};
};

inline EdgeGeometry edge_geometry(const std::vector<double>& d,
                                  const std::vector<double>& theta,
                                  double wavelength) {
  const int n = static_cast<int>(theta.size());
  if (static_cast<int>(d.size()) != n + 1)
    throw Error(errc::invalid_argument,
                "need one more hop than deflection angles");
  for (double dk : d)
    if (!(dk > 0.0))
      throw Error(errc::invalid_argument, "hop lengths must be positive");
  for (double th : theta)
    if (!(th >= 0.0))
      throw Error(errc::invalid_argument, "angles must be non-negative");

  EdgeGeometry g;
  g.n = n;
  const Complex phase45(std::sqrt(0.5), std::sqrt(0.5));  // exp(i pi/4)
  g.beta.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double scale =
        std::sqrt(M_PI * d[i] * d[i + 1] / (wavelength * (d[i] + d[i + 1])));
    g.beta.push_back(theta[i] * scale * phase45);
  }
  g.alpha.reserve(std::max(0, n - 1));
  for (int i = 0; i + 1 < n; ++i)
    g.alpha.push_back(std::sqrt(d[i] * d[i + 2] /
                                ((d[i] + d[i + 1]) * (d[i + 1] + d[i + 2]))));
  if (n >= 2) {
    double num = 0.0;
    for (double dk : d) num += dk;
    for (int i = 1; i < n; ++i) num *= d[i];
    double den = 1.0;
    for (int i = 0; i < n; ++i) den *= d[i] + d[i + 1];
    g.c_n = std::sqrt(num / den);
    for (int i = 0; i + 1 < n; ++i) g.sigma += g.beta[i] * g.beta[i];
  }
  return g;
}

// Powers alpha^0..alpha^mmax per coupling position, precomputed so that no
// power is ever rebuilt by division (which cannot recover from underflow).
inline std::vector<std::vector<double>> alpha_powers(const EdgeGeometry& g,
                                                     int mmax) {
  std::vector<std::vector<double>> p(g.alpha.size());
  for (std::size_t i = 0; i < g.alpha.size(); ++i) {
    p[i].resize(mmax + 1);
    p[i][0] = 1.0;
    for (int k = 1; k <= mmax; ++k) p[i][k] = p[i][k - 1] * g.alpha[i];
  }
  return p;
}

// Triangular memo of the scaled coupling coefficients D(q, j, k) with
// j <= k, one level per inner position q = 2..n-1.
class CouplingMemo {
 public:
  CouplingMemo(const EdgeGeometry& g,
               const std::vector<std::vector<Complex>>& tables,
               const std::vector<std::vector<double>>& apow, int mmax)
      : g_(g), tables_(tables), apow_(apow), filled_(-1) {
    levels_.resize(std::max(0, g.n - 2));
    for (auto& lv : levels_) lv.reserve((mmax + 1) * (mmax + 2) / 2);
  }

  // Ensures all D(q, j, k) with k <= m are available.
  void fill_to(int m) {
    const int n = g_.n;
    for (int k = filled_ + 1; k <= m; ++k) {
      for (int q = n - 1; q >= 2; --q) {
        auto& lv = levels_[q - 2];
        for (int j = 0; j <= k; ++j) {
          Complex v;
          if (q == n - 1) {
            v = apow_[n - 2][j] * tables_[n - 2][k] * tables_[n - 1][j];
          } else {
            v = Complex(0.0, 0.0);
            double bracket = 1.0;  // j!(k-i)! / ((j-i)! k!)
            for (int i = 0; i <= j; ++i) {
              v += bracket * apow_[q - 1][j - i] * tables_[q - 1][k - i] *
                   at(q + 1, i, j);
              if (i < j) bracket *= double(j - i) / double(k - i);
            }
          }
          lv.push_back(v);
        }
      }
      filled_ = k;
    }
  }

  Complex at(int q, int j, int k) const {
    return levels_[q - 2][static_cast<std::size_t>(k) * (k + 1) / 2 + j];
  }

 private:
  const EdgeGeometry& g_;
  const std::vector<std::vector<Complex>>& tables_;
  const std::vector<std::vector<double>>& apow_;
  std::vector<std::vector<Complex>> levels_;
  int filled_;
};

}  // namespace detail

// Field attenuation over a chain of diffracting edges, given the hop
// lengths d (edge_count + 1 of them) and deflection angles theta (radians).
inline VoglerResult vogler_attenuation(const std::vector<double>& d,
                                       const std::vector<double>& theta,
                                       const VoglerConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(theta.size());
  VoglerResult res;
  if (n == 0) return res;

  if (n > cfg.max_edges_exact) {
    // Per-edge product approximation: each edge attenuates independently
    // with its local geometry.
    Complex f(1.0, 0.0);
    const Complex phase45(std::sqrt(0.5), std::sqrt(0.5));
    for (int i = 0; i < n; ++i) {
      const double scale = std::sqrt(M_PI * d[i] * d[i + 1] /
                                     (cfg.wavelength * (d[i] + d[i + 1])));
      f *= 0.5 * erfc_complex(theta[i] * scale * phase45);
    }
    res.attenuation = f;
    res.excess_loss_db = -20.0 * std::log10(std::abs(f));
    res.terms_used = n;
    res.converged = true;
    res.pairwise_fallback = true;
    return res;
  }

  const detail::EdgeGeometry g =
      detail::edge_geometry(d, theta, cfg.wavelength);

  if (n == 1) {
    res.attenuation = 0.5 * erfc_complex(g.beta[0]);
    res.excess_loss_db = -20.0 * std::log10(std::abs(res.attenuation));
    res.terms_used = 1;
    res.converged = true;
    return res;
  }

  const int mmax = cfg.max_series_terms - 1;
  std::vector<std::vector<Complex>> tables;
  tables.reserve(n);
  for (int i = 0; i < n; ++i)
    tables.push_back(detail::ierfc_forward(g.beta[i], mmax));

  const std::vector<std::vector<double>> apow = detail::alpha_powers(g, mmax);
  detail::CouplingMemo memo(g, tables, apow, mmax);

  Complex total(0.0, 0.0);
  int quiet = 0;
  int used = 0;
  bool converged = false;
  double a2 = 1.0;       // n == 2: 2^m m! alpha^m
  double pow2fact = 1.0; // n >= 3: 2^m m!
  for (int m = 0; m <= mmax; ++m) {
    Complex term;
    if (n == 2) {
      term = a2 * tables[0][m] * tables[1][m];
      a2 *= 2.0 * (m + 1) * g.alpha[0];
    } else if (n == 3) {
      Complex s(0.0, 0.0);
      for (int m1 = 0; m1 <= m; ++m1)
        s += apow[0][m - m1] * apow[1][m1] * tables[0][m - m1] * tables[2][m1];
      term = pow2fact * tables[1][m] * s;
      pow2fact *= 2.0 * (m + 1);
    } else {
      memo.fill_to(m);
      Complex s(0.0, 0.0);
      for (int m1 = 0; m1 <= m; ++m1)
        s += apow[0][m - m1] * tables[0][m - m1] * memo.at(2, m1, m);
      term = pow2fact * s;
      pow2fact *= 2.0 * (m + 1);
    }
    total += term;
    used = m + 1;
    if (m >= 1 && std::abs(term) <= cfg.series_tolerance * std::abs(total)) {
      if (++quiet >= 2) {
        converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }

  res.attenuation =
      g.c_n * std::exp(g.sigma) * total / std::pow(2.0, n);
  const double mag = std::abs(res.attenuation);
  res.excess_loss_db = mag > 0.0 ? -20.0 * std::log10(mag)
                                 : std::numeric_limits<double>::infinity();
  res.terms_used = used;
  res.converged = converged;
  return res;
}

template <class Scalar>
VoglerResult vogler_attenuation(const DiffractionPathT<Scalar>& path,
                                const VoglerConfig& cfg) {
  std::vector<double> d(path.d.begin(), path.d.end());
  std::vector<double> theta(path.theta.begin(), path.theta.end());
  return vogler_attenuation(d, theta, cfg);
}

// Direct numeric integration of the attenuation integral, usable for up to
// three edges.  Independent of the series evaluation; intended as a slow
// cross-check.
inline Complex quadrature_oracle(const std::vector<double>& d,
                                 const std::vector<double>& theta,
                                 const VoglerConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(theta.size());
  if (n < 1 || n > 3)
    throw Error(errc::invalid_argument,
                "direct integration supports 1 to 3 edges");
  const detail::EdgeGeometry g =
      detail::edge_geometry(d, theta, cfg.wavelength);

  double alpha_sq = 0.0;
  for (double a : g.alpha) alpha_sq += a * a;
  if (alpha_sq >= 1.0)
    throw Error(errc::invalid_argument,
                "geometry couples too strongly for direct integration");

  const double decay = 1.0 - std::sqrt(alpha_sq);
  const double upper =
      std::max(8.0, std::min(40.0, std::sqrt(40.0 / std::max(decay, 0.025))));

  std::vector<detail::CompositeRule> rules;
  for (int i = 0; i < n; ++i) {
    const double freq = 2.0 * g.beta[i].imag();
    const double panel = std::min(1.0, 16.0 / std::max(1.0, freq));
    rules.push_back(detail::composite_gl32(upper, panel));
  }

  Complex integral(0.0, 0.0);
  if (n == 1) {
    for (std::size_t k = 0; k < rules[0].t.size(); ++k) {
      const Complex tz = rules[0].t[k] + g.beta[0];
      integral += rules[0].w[k] * std::exp(-tz * tz);
    }
  } else if (n == 2) {
    const auto& r1 = rules[0];
    const auto& r2 = rules[1];
    for (std::size_t b = 0; b < r2.t.size(); ++b) {
      const double t2 = r2.t[b];
      const Complex t2z = t2 + g.beta[1];
      Complex inner(0.0, 0.0);
      for (std::size_t a = 0; a < r1.t.size(); ++a) {
        const double t1 = r1.t[a];
        const Complex t1z = t1 + g.beta[0];
        inner += r1.w[a] *
                 std::exp(-t1z * t1z - t2z * t2z + 2.0 * g.alpha[0] * t1 * t2);
      }
      integral += r2.w[b] * inner;
    }
  } else {
    // Split the middle Gaussian between the two couplings so that each
    // pair factor stays bounded; requires alpha1^2 + alpha2^2 < 1.
    const double spare = (1.0 - alpha_sq) / 2.0;
    const double wa = g.alpha[0] * g.alpha[0] + spare;
    const double wb = g.alpha[1] * g.alpha[1] + spare;
    const auto& r1 = rules[0];
    const auto& r2 = rules[1];
    const auto& r3 = rules[2];
    for (std::size_t b = 0; b < r2.t.size(); ++b) {
      const double t2 = r2.t[b];
      const Complex t2z = t2 + g.beta[1];
      Complex left(0.0, 0.0);
      for (std::size_t a = 0; a < r1.t.size(); ++a) {
        const double t1 = r1.t[a];
        const Complex t1z = t1 + g.beta[0];
        left += r1.w[a] * std::exp(-t1z * t1z - wa * (t2z * t2z) +
                                   2.0 * g.alpha[0] * t1 * t2);
      }
      Complex right(0.0, 0.0);
      for (std::size_t c = 0; c < r3.t.size(); ++c) {
        const double t3 = r3.t[c];
        const Complex t3z = t3 + g.beta[2];
        right += r3.w[c] * std::exp(-wb * (t2z * t2z) - t3z * t3z +
                                    2.0 * g.alpha[1] * t2 * t3);
      }
      integral += r2.w[b] * left * right;
    }
  }

  const double front = std::pow(detail::kTwoOverSqrtPi, n);
  return g.c_n * std::exp(g.sigma) * front * integral / std::pow(2.0, n);
}

template <class Scalar>
Complex quadrature_oracle(const DiffractionPathT<Scalar>& path,
                          const VoglerConfig& cfg) {
  std::vector<double> d(path.d.begin(), path.d.end());
  std::vector<double> theta(path.theta.begin(), path.theta.end());
  return quadrature_oracle(d, theta, cfg);
}

// Total loss over a blocked link: log-distance loss along the bent path
// plus the multi-edge excess attenuation.  Throws if the link is clear.
template <class Scalar>
double diffraction_loss_db(const LinkT<Scalar>& link,
                           const ObstacleMapT<Scalar>& map,
                           const PathLossParamsT<Scalar>& pl,
                           const VoglerConfig& cfg) {
  const DiffractionPathT<Scalar> path = extract_diffraction_path(link, map);
  const VoglerResult att = vogler_attenuation(path, cfg);
  return path_loss_db(pl, path.curve_length3()) + att.excess_loss_db;
}

}  // namespace radiomap
