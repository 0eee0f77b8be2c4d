#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "radiomap/error.hpp"

namespace radiomap {

template <class Scalar>
using Matrix2d_t = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector2_t = Eigen::Matrix<Scalar, 2, 1>;
template <class Scalar>
using Vector3_t = Eigen::Matrix<Scalar, 3, 1>;

// Axis-aligned uniform grid on the ground plane.  Cell (i, j) covers the
// world rectangle [origin.x + i*h, origin.x + (i+1)*h] x
// [origin.y + j*h, origin.y + (j+1)*h] with h = cell_size.  The first index
// runs along x.
template <class Scalar>
struct GridSpecT {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Scalar cell_size = Scalar(1);
  Vector2_t<Scalar> origin = Vector2_t<Scalar>::Zero();

  void validate() const {
    if (rows < 1 || cols < 1)
      throw Error(errc::invalid_argument, "grid dimensions must be positive");
    if (!(cell_size > Scalar(0)) || !std::isfinite(double(cell_size)))
      throw Error(errc::invalid_argument, "cell_size must be positive");
    if (!origin.allFinite())
      throw Error(errc::invalid_argument, "grid origin must be finite");
  }

  // World -> grid units (continuous).  Grid units span [0, rows] x [0, cols].
  Vector2_t<Scalar> to_grid(const Vector2_t<Scalar>& world) const {
    return (world - origin) / cell_size;
  }

  Vector2_t<Scalar> to_world(const Vector2_t<Scalar>& grid) const {
    return origin + cell_size * grid;
  }

  Vector2_t<Scalar> cell_center(Eigen::Index i, Eigen::Index j) const {
    return origin + cell_size * Vector2_t<Scalar>(Scalar(i) + Scalar(0.5),
                                                  Scalar(j) + Scalar(0.5));
  }

  bool contains_cell(Eigen::Index i, Eigen::Index j) const {
    return i >= 0 && i < rows && j >= 0 && j < cols;
  }

  friend bool operator==(const GridSpecT& a, const GridSpecT& b) {
    return a.rows == b.rows && a.cols == b.cols && a.cell_size == b.cell_size &&
           a.origin == b.origin;
  }
};

// Heights of virtual obstacles, one value per grid cell, meters above ground.
template <class Scalar>
struct ObstacleMapT {
  GridSpecT<Scalar> grid;
  Matrix2d_t<Scalar> heights;  // rows x cols, heights(i, j) >= 0

  void validate() const {
    grid.validate();
    if (heights.rows() != grid.rows || heights.cols() != grid.cols)
      throw Error(errc::invalid_argument, "height matrix does not match grid");
    if (!heights.allFinite() || (heights.array() < Scalar(0)).any())
      throw Error(errc::invalid_argument,
                  "obstacle heights must be finite and non-negative");
  }

  static ObstacleMapT zero(const GridSpecT<Scalar>& g) {
    return {g, Matrix2d_t<Scalar>::Zero(g.rows, g.cols)};
  }
};

// A transmitter/receiver pair.  Positions are world coordinates in meters;
// the third component is altitude above ground.
template <class Scalar>
struct LinkT {
  Vector3_t<Scalar> tx = Vector3_t<Scalar>::Zero();
  Vector3_t<Scalar> rx = Vector3_t<Scalar>::Zero();

  Vector2_t<Scalar> tx_ground() const { return tx.template head<2>(); }
  Vector2_t<Scalar> rx_ground() const { return rx.template head<2>(); }

  Scalar ground_distance() const {
    return (tx_ground() - rx_ground()).norm();
  }

  Scalar distance3() const { return (tx - rx).norm(); }

  void validate() const {
    if (!tx.allFinite() || !rx.allFinite())
      throw Error(errc::invalid_argument, "link endpoints must be finite");
    if (tx_ground() == rx_ground())
      throw Error(errc::invalid_argument,
                  "link endpoints need distinct ground projections");
  }
};

using GridSpec = GridSpecT<double>;
using ObstacleMap = ObstacleMapT<double>;
using Link = LinkT<double>;

}  // namespace radiomap
