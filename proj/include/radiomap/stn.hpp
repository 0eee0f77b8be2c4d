#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>

#include "radiomap/error.hpp"
#include "radiomap/geometry.hpp"
#include "radiomap/grid.hpp"
#include "radiomap/version.hpp"

// Link-anchored spatial normalization of scatter features.  Every link sees
// its surroundings in a canonical frame: the ground segment is moved to the
// map center, rotated to the horizontal axis, and scaled so the endpoints
// land on the left/right map borders.  A small pluggable regressor then maps
// the normalized feature map to a scattering attenuation in dB.

namespace radiomap {

template <class Scalar>
using FeatureMapT = Matrix2d_t<Scalar>;
using FeatureMap = FeatureMapT<double>;

// Affine resampling parameters.  (dx, dy) translate in normalized [-1, 1]
// output coordinates, (c1, c2) scale, omega rotates.  Positions are measured
// in cell units, so the translation recenters the link midpoint and the
// scales put the link span in proportion to the map size.
//
// The resampler does not evaluate trig on omega; it uses the cached matrix
// entries m11..m22.  stn_params fills them with the algebraically equivalent
// single-division forms (a / M1 and friends), which keeps right-angle
// resampling free of trigonometric rounding noise.
template <class Scalar>
struct AffineParamsT {
  Scalar dx = 0, dy = 0;   // normalized translation
  Scalar c1 = 1, c2 = 1;   // per-axis scale
  Scalar omega = 0;        // radians, in (-3*pi/2, pi/2]

  // Row-scaled resampling matrix: source = [[m11, m12], [m21, m22]] * target
  // + (dx, dy), all in normalized coordinates.  Row 1 carries 1/M1, row 2
  // carries 1/M2, so each source axis is normalized by its own extent.
  Scalar m11 = 1, m12 = 0, m21 = 0, m22 = 1;

  void validate() const {
    if (!(c1 > Scalar(0)) || !(c2 > Scalar(0)))
      throw Error(errc::invalid_argument, "affine scales must be positive");
    for (Scalar v : {dx, dy, omega, m11, m12, m21, m22})
      if (!std::isfinite(double(v)))
        throw Error(errc::invalid_argument, "affine parameters must be finite");
  }
};

using AffineParams = AffineParamsT<double>;

// Builds params from the five classical values; the matrix entries are
// derived as [[c1*cos w, c1*sin w], [-c2*sin w, c2*cos w]].
template <class Scalar>
AffineParamsT<Scalar> affine_from_parameters(Scalar dx, Scalar dy, Scalar c1,
                                             Scalar c2, Scalar omega) {
  AffineParamsT<Scalar> p;
  p.dx = dx;
  p.dy = dy;
  p.c1 = c1;
  p.c2 = c2;
  p.omega = omega;
  const Scalar c = std::cos(omega);
  const Scalar s = std::sin(omega);
  p.m11 = c1 * c;
  p.m12 = c1 * s;
  p.m21 = -c2 * s;
  p.m22 = c2 * c;
  p.validate();
  return p;
}

// Canonicalizing affine parameters for a link on a grid.  With ground
// positions p_t, p_r in cell units and (a, b) = p_t - p_r:
//   dx = (p_t1 + p_r1 - M1) / M1        (midpoint to center, x)
//   dy = (p_t2 + p_r2 - M2) / M2        (midpoint to center, y)
//   c1 = |p_t - p_r| / M1, c2 = |p_t - p_r| / M2
//   omega = -atan(b / a), minus pi when a < 0
// The output x axis then runs from the receiver (left border) to the
// transmitter (right border).
template <class Scalar>
AffineParamsT<Scalar> stn_params(const LinkT<Scalar>& link,
                                 const GridSpecT<Scalar>& grid) {
  link.validate();
  grid.validate();
  const Vector2_t<Scalar> t = grid.to_grid(link.tx_ground());
  const Vector2_t<Scalar> r = grid.to_grid(link.rx_ground());
  const Scalar a = t.x() - r.x();
  const Scalar b = t.y() - r.y();
  const Scalar d0 = std::hypot(a, b);
  if (!(d0 > Scalar(0)))
    throw Error(errc::invalid_argument,
                "link ground projections coincide on the grid");
  const Scalar m1 = Scalar(grid.rows);
  const Scalar m2 = Scalar(grid.cols);
  AffineParamsT<Scalar> p;
  p.dx = (t.x() + r.x() - m1) / m1;
  p.dy = (t.y() + r.y() - m2) / m2;
  p.c1 = d0 / m1;
  p.c2 = d0 / m2;
  p.omega = (a >= Scalar(0)) ? -std::atan(b / a)
                             : -std::atan(b / a) - Scalar(M_PI);
  // Exact forms of c1*cos(omega) etc.: cos(omega) = a/d0, sin(omega) = -b/d0
  // in both branches, so each entry reduces to a single division.
  p.m11 = a / m1;
  p.m12 = -(b / m1);
  p.m21 = b / m2;
  p.m22 = a / m2;
  return p;
}

// Resamples `source` through the affine map.  For output pixel (it, jt) the
// target coordinates are the pixel centers of a [-1, 1]^2 frame; the source
// point is looked up with bilinear weights max(0, 1 - |px - n|) over the
// four neighboring pixels (1-based pixel n sits at continuous coordinate n).
// Source points outside the map contribute 0.  The four weighted terms are
// accumulated in sorted order so that resampling is invariant under symmetry
// permutations of the neighbors.
template <class Derived>
FeatureMapT<typename Derived::Scalar> sample_bilinear(
    const Eigen::MatrixBase<Derived>& source,
    const AffineParamsT<typename Derived::Scalar>& params,
    const GridSpecT<typename Derived::Scalar>& out) {
  using Scalar = typename Derived::Scalar;
  params.validate();
  out.validate();
  const Eigen::Index m1 = source.rows();
  const Eigen::Index m2 = source.cols();
  if (m1 < 1 || m2 < 1)
    throw Error(errc::invalid_argument, "source feature map is empty");
  FeatureMapT<Scalar> F(out.rows, out.cols);
  const Scalar half1 = Scalar(m1) / 2;
  const Scalar half2 = Scalar(m2) / 2;
  for (Eigen::Index jt = 0; jt < out.cols; ++jt) {
    const Scalar yt = Scalar(2 * jt + 1 - out.cols) / Scalar(out.cols);
    for (Eigen::Index it = 0; it < out.rows; ++it) {
      const Scalar xt = Scalar(2 * it + 1 - out.rows) / Scalar(out.rows);
      const Scalar xs = (params.m11 * xt + params.m12 * yt) + params.dx;
      const Scalar ys = (params.m21 * xt + params.m22 * yt) + params.dy;
      // 1-based continuous pixel coordinates of the source point.
      const Scalar px = (xs + Scalar(1)) * half1 + Scalar(0.5);
      const Scalar py = (ys + Scalar(1)) * half2 + Scalar(0.5);
      std::array<Scalar, 4> terms{};
      int count = 0;
      if (px > Scalar(0) && px < Scalar(m1 + 1) && py > Scalar(0) &&
          py < Scalar(m2 + 1)) {
        const auto n0 = static_cast<Eigen::Index>(std::floor(px));
        const auto q0 = static_cast<Eigen::Index>(std::floor(py));
        for (Eigen::Index n = n0; n <= n0 + 1; ++n) {
          if (n < 1 || n > m1) continue;
          const Scalar wx = std::max(Scalar(0), Scalar(1) - std::abs(px - n));
          for (Eigen::Index q = q0; q <= q0 + 1; ++q) {
            if (q < 1 || q > m2) continue;
            const Scalar wy =
                std::max(Scalar(0), Scalar(1) - std::abs(py - q));
            terms[count++] = (wx * wy) * source(n - 1, q - 1);
          }
        }
      }
      std::sort(terms.begin(), terms.begin() + count);
      Scalar acc = 0;
      for (int k = 0; k < count; ++k) acc += terms[k];
      F(it, jt) = acc;
    }
  }
  return F;
}

// Full normalization pipeline: restrict the obstacle field to the elliptic
// neighborhood of the link, then resample it into the canonical link frame.
template <class Scalar>
FeatureMapT<Scalar> scatter_features(const LinkT<Scalar>& link,
                                     const ObstacleMapT<Scalar>& map,
                                     Scalar eccentricity,
                                     const GridSpecT<Scalar>& out) {
  map.validate();
  const Matrix2d_t<Scalar> mask = ellipse_mask(link, map.grid, eccentricity);
  const Matrix2d_t<Scalar> focused = focus_ellipse(map.heights, mask);
  return sample_bilinear(focused, stn_params(link, map.grid), out);
}

// Pooled summary of a feature map, in a fixed versioned order:
//   [mean, max, nonzero fraction, and the four quadrant means
//    (top-left, top-right, bottom-left, bottom-right; floor split)].
inline constexpr int kPooledFeatureCount = 7;

template <class Derived>
Eigen::Matrix<typename Derived::Scalar, kPooledFeatureCount, 1> pooled_features(
    const Eigen::MatrixBase<Derived>& F) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, kPooledFeatureCount, 1> out;
  out.setZero();
  const Eigen::Index r = F.rows(), c = F.cols();
  if (r < 1 || c < 1) return out;
  out[0] = F.mean();
  out[1] = F.maxCoeff();
  out[2] = Scalar((F.array() != Scalar(0)).count()) / Scalar(r * c);
  const Eigen::Index r2 = r / 2, c2 = c / 2;
  const Eigen::Index rl = r - r2, cl = c - c2;
  if (r2 >= 1 && c2 >= 1) {
    out[3] = F.block(0, 0, r2, c2).mean();
    out[4] = F.block(0, c2, r2, cl).mean();
    out[5] = F.block(r2, 0, rl, c2).mean();
    out[6] = F.block(r2, c2, rl, cl).mean();
  } else {
    out[3] = out[4] = out[5] = out[6] = out[0];
  }
  return out;
}

// Regressor from pooled features to a scattering attenuation in dB.  The
// null kind always predicts 0; the linear kind is a dot product with a
// fixed-order pooled-feature vector (see kPoolingVersion).
template <class Scalar>
struct ScatterRegressorT {
  enum class Kind { null, linear };

  Kind kind = Kind::null;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;  // dB per feature unit
  // Size of the canonical frame the features are sampled on.  Recorded so a
  // fitted regressor is always evaluated on the frame it was trained with.
  Eigen::Index out_rows = 16;
  Eigen::Index out_cols = 16;

  void validate() const {
    if (out_rows < 1 || out_cols < 1)
      throw Error(errc::invalid_argument,
                  "regressor frame dimensions must be positive");
    if (kind == Kind::linear && weights.size() != kPooledFeatureCount)
      throw Error(errc::invalid_argument,
                  "linear regressor needs one weight per pooled feature");
    if (kind == Kind::linear && !weights.allFinite())
      throw Error(errc::invalid_argument, "regressor weights must be finite");
  }

  GridSpecT<Scalar> frame() const {
    return {out_rows, out_cols, Scalar(1), Vector2_t<Scalar>::Zero()};
  }
};

using ScatterRegressor = ScatterRegressorT<double>;

template <class Derived>
typename Derived::Scalar scatter_predict(
    const Eigen::MatrixBase<Derived>& F,
    const ScatterRegressorT<typename Derived::Scalar>& r) {
  using Scalar = typename Derived::Scalar;
  r.validate();
  if (r.kind == ScatterRegressorT<Scalar>::Kind::null) return Scalar(0);
  if (F.rows() != r.out_rows || F.cols() != r.out_cols)
    throw Error(errc::invalid_argument,
                "feature map does not match the regressor frame");
  return r.weights.dot(pooled_features(F));
}

}  // namespace radiomap
