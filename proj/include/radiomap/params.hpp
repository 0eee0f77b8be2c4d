#pragma once

#include <cmath>

#include "radiomap/error.hpp"

namespace radiomap {

// Log-distance path loss: loss_db(d) = beta0 + gamma0 * log10(d).
template <class Scalar>
struct PathLossParamsT {
  Scalar beta0 = Scalar(0);
  Scalar gamma0 = Scalar(0);

  void validate() const {
    if (!std::isfinite(double(beta0)))
      throw Error(errc::invalid_argument, "beta0 must be finite");
    if (!(gamma0 > Scalar(0)) || !std::isfinite(double(gamma0)))
      throw Error(errc::invalid_argument,
                  "gamma0 must be positive (loss grows with distance)");
  }
};

using PathLossParams = PathLossParamsT<double>;

template <class Scalar>
Scalar path_loss_db(const PathLossParamsT<Scalar>& p, Scalar distance) {
  if (!(distance > Scalar(0)))
    throw Error(errc::invalid_argument, "path loss needs a positive distance");
  return p.beta0 + p.gamma0 * std::log10(distance);
}

}  // namespace radiomap
