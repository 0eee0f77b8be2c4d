#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "radiomap/diffraction.hpp"
#include "radiomap/error.hpp"
#include "radiomap/geometry.hpp"
#include "radiomap/grid.hpp"
#include "radiomap/params.hpp"
#include "radiomap/rng.hpp"
#include "radiomap/stn.hpp"

// End-to-end forward model: a link's attenuation is the line-of-sight
// log-distance loss when the direct ray clears every obstacle, and the
// knife-edge diffraction loss (plus an optional scattering term) otherwise.
// A soft mode blends the two branches with a smooth visibility indicator so
// the model stays differentiable in the obstacle heights.

namespace radiomap {

enum class IndicatorMode { hard, soft };

template <class Scalar>
struct RadioMapModelT {
  ObstacleMapT<Scalar> map;
  PathLossParamsT<Scalar> los;
  VoglerConfig vogler;
  ScatterRegressorT<Scalar> scatter;
  Scalar eccentricity = Scalar(0.5);
  IndicatorMode indicator_mode = IndicatorMode::hard;

  void validate() const {
    map.validate();
    los.validate();
    vogler.validate();
    scatter.validate();
    if (!(eccentricity > Scalar(0)) || !(eccentricity < Scalar(1)))
      throw Error(errc::invalid_argument, "eccentricity must be in (0, 1)");
  }
};

using RadioMapModel = RadioMapModelT<double>;

template <class Scalar>
struct MeasurementT {
  LinkT<Scalar> link;
  Scalar y = Scalar(0);  // attenuation in dB

  void validate() const {
    link.validate();
    if (!std::isfinite(double(y)))
      throw Error(errc::invalid_argument, "measured attenuation must be finite");
  }
};

using Measurement = MeasurementT<double>;

struct Metrics {
  double mae = 0.0;   // mean absolute error, dB
  double nmae = 0.0;  // sum |y - yhat| / sum |y|
  std::int64_t count = 0;
};

// Free-space branch: log-distance loss over the 3D separation.
template <class Scalar>
Scalar los_gain(const LinkT<Scalar>& link, const PathLossParamsT<Scalar>& p) {
  link.validate();
  return path_loss_db(p, link.distance3());
}

namespace detail {

// Loss of the obstructed branch: bent-path log-distance loss plus the
// multiple-knife-edge attenuation, plus the scattering regressor's term.
// A link whose only blockage sits at the endpoints has no interior edge to
// diffract over and falls back to the line-of-sight branch.
template <class Scalar>
Scalar nlos_loss(const LinkT<Scalar>& link, const CellTraceT<Scalar>& trace,
                 const RadioMapModelT<Scalar>& model) {
  try {
    const DiffractionPathT<Scalar> path =
        extract_diffraction_path(link, trace, model.map.heights);
    const VoglerResult att = vogler_attenuation(path, model.vogler);
    Scalar loss = path_loss_db(model.los, path.curve_length3()) +
                  Scalar(att.excess_loss_db);
    if (model.scatter.kind != ScatterRegressorT<Scalar>::Kind::null) {
      const FeatureMapT<Scalar> F = scatter_features(
          link, model.map, model.eccentricity, model.scatter.frame());
      loss += scatter_predict(F, model.scatter);
    }
    return loss;
  } catch (const Error& e) {
    if (e.code() == errc::los_path) return los_gain(link, model.los);
    throw;
  }
}

// predict_attenuation without the per-call model validation; callers that
// evaluate many links validate once up front.
template <class Scalar>
Scalar predict_prevalidated(const LinkT<Scalar>& link,
                            const RadioMapModelT<Scalar>& model) {
  const CellTraceT<Scalar> trace = trace_cells(link, model.map.grid);
  if (model.indicator_mode == IndicatorMode::hard) {
    if (hard_los(trace, model.map.heights)) return los_gain(link, model.los);
    return nlos_loss(link, trace, model);
  }
  const Scalar indicator =
      soft_indicator_from_sum(trace_excess_sum(trace, model.map.heights));
  const Scalar clear = los_gain(link, model.los);
  if (indicator >= Scalar(1)) return clear;
  const Scalar blocked = nlos_loss(link, trace, model);
  return indicator * clear + (Scalar(1) - indicator) * blocked;
}

}  // namespace detail

template <class Scalar>
Scalar predict_attenuation(const LinkT<Scalar>& link,
                           const RadioMapModelT<Scalar>& model) {
  model.validate();
  return detail::predict_prevalidated(link, model);
}

// Uniform placement of simulated links over the map footprint.
struct SamplingConfig {
  double tx_alt_lo = 50.0;
  double tx_alt_hi = 200.0;
  double rx_height = 1.5;
  // Draws whose ground projections nearly coincide are redrawn; such links
  // have no ground segment to trace.
  double min_ground_separation = 1e-6;

  void validate() const {
    if (!(tx_alt_lo <= tx_alt_hi) || !std::isfinite(tx_alt_lo) ||
        !std::isfinite(tx_alt_hi))
      throw Error(errc::invalid_argument, "transmitter altitude range invalid");
    if (!std::isfinite(rx_height))
      throw Error(errc::invalid_argument, "receiver height must be finite");
    if (!(min_ground_separation >= 0.0))
      throw Error(errc::invalid_argument, "separation must be non-negative");
  }
};

// Draws `n` random links over the true scene and labels each with the hard
// forward model plus Gaussian noise.  Deterministic for a given seed.
inline std::vector<Measurement> generate_measurements(
    const ObstacleMap& truth, const PathLossParams& p, const VoglerConfig& cfg,
    std::int64_t n, double noise_sigma, std::uint64_t seed,
    const SamplingConfig& sampling = {}) {
  if (n < 1) throw Error(errc::invalid_argument, "need at least one sample");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw Error(errc::invalid_argument, "noise sigma must be non-negative");
  sampling.validate();
  RadioMapModel model;
  model.map = truth;
  model.los = p;
  model.vogler = cfg;
  model.indicator_mode = IndicatorMode::hard;
  model.validate();

  const GridSpec& g = truth.grid;
  const double x0 = g.origin.x(), y0 = g.origin.y();
  const double xext = double(g.rows) * g.cell_size;
  const double yext = double(g.cols) * g.cell_size;
  if (!(xext > 0.0) || !(yext > 0.0))
    throw Error(errc::invalid_argument, "degenerate sampling region");

  Rng rng(seed);
  std::vector<Measurement> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Link link;
    int tries = 0;
    for (;;) {
      link.tx = {rng.uniform(x0, x0 + xext), rng.uniform(y0, y0 + yext),
                 rng.uniform(sampling.tx_alt_lo, sampling.tx_alt_hi)};
      link.rx = {rng.uniform(x0, x0 + xext), rng.uniform(y0, y0 + yext),
                 sampling.rx_height};
      const double sep = (link.tx_ground() - link.rx_ground()).norm();
      if (sep > sampling.min_ground_separation) break;
      if (++tries > 1000)
        throw Error(errc::invalid_argument, "degenerate sampling region");
    }
    const double clean = detail::predict_prevalidated(link, model);
    out.push_back({link, clean + rng.normal(0.0, noise_sigma)});
  }
  return out;
}

template <class Scalar>
Metrics evaluate(const RadioMapModelT<Scalar>& model,
                 const std::vector<MeasurementT<Scalar>>& data) {
  if (data.empty())
    throw Error(errc::invalid_argument, "cannot evaluate on empty data");
  model.validate();
  double err_sum = 0.0;
  double mag_sum = 0.0;
  for (const auto& m : data) {
    const double pred = double(detail::predict_prevalidated(m.link, model));
    err_sum += std::abs(double(m.y) - pred);
    mag_sum += std::abs(double(m.y));
  }
  Metrics out;
  out.count = static_cast<std::int64_t>(data.size());
  out.mae = err_sum / double(out.count);
  if (mag_sum > 0.0)
    out.nmae = err_sum / mag_sum;
  else
    out.nmae = err_sum > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return out;
}

}  // namespace radiomap
