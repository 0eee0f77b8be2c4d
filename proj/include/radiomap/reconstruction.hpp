#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radiomap/diffraction.hpp"
#include "radiomap/error.hpp"
#include "radiomap/geometry.hpp"
#include "radiomap/grid.hpp"
#include "radiomap/params.hpp"
#include "radiomap/propagation.hpp"
#include "radiomap/rng.hpp"
#include "radiomap/stn.hpp"

// Model fitting from attenuation measurements.  The pipeline has three
// stages: a two-line clustering that labels each sample as clear-path or
// obstructed, a cross-entropy descent that turns those labels into an initial
// obstacle height map, and a joint mean-squared-error descent that refines
// the path-loss line, the scattering weights and the heights together using
// the smooth visibility blend.  A distance-weighted nearest-neighbor
// regressor serves as a model-free baseline.

namespace radiomap {

namespace detail {

// Least-squares fit of y = beta + gamma * log10(distance3) over a subset of
// samples.  Returns nothing when the subset has fewer than two samples or
// effectively a single distinct distance.
template <class Scalar>
std::optional<std::pair<Scalar, Scalar>> fit_line_subset(
    const std::vector<MeasurementT<Scalar>>& data,
    const std::vector<std::int32_t>& idx) {
  const std::size_t n = idx.size();
  if (n < 2) return std::nullopt;
  Scalar sx = Scalar(0), sy = Scalar(0);
  for (std::int32_t i : idx) {
    sx += std::log10(data[i].link.distance3());
    sy += data[i].y;
  }
  const Scalar xm = sx / Scalar(n);
  const Scalar ym = sy / Scalar(n);
  Scalar sxx = Scalar(0), sxy = Scalar(0);
  for (std::int32_t i : idx) {
    const Scalar dx = std::log10(data[i].link.distance3()) - xm;
    sxx += dx * dx;
    sxy += dx * (data[i].y - ym);
  }
  if (!(sxx > Scalar(n) * Scalar(1e-18))) return std::nullopt;
  const Scalar gamma = sxy / sxx;
  return std::make_pair(ym - gamma * xm, gamma);
}

template <class Scalar>
std::vector<std::int32_t> all_indices(
    const std::vector<MeasurementT<Scalar>>& data) {
  std::vector<std::int32_t> idx(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    idx[i] = static_cast<std::int32_t>(i);
  return idx;
}

}  // namespace detail

// Global log-distance fit ignoring obstruction: the simplest explanation of
// the data and the baseline every fitted model has to beat.  The returned
// parameters are not validated; pathological data can yield a non-positive
// slope.
template <class Scalar>
PathLossParamsT<Scalar> fit_distance_model(
    const std::vector<MeasurementT<Scalar>>& data) {
  for (const auto& m : data) m.validate();
  const auto line = detail::fit_line_subset(data, detail::all_indices(data));
  if (!line)
    throw Error(errc::degenerate_data,
                "need at least two samples at distinct distances");
  return {line->first, line->second};
}

// Outcome of the two-line clustering: line 1 explains the clear-path
// samples, line 2 the obstructed ones, and labels[i] is 0 or 1 accordingly.
template <class Scalar>
struct ClusterStateT {
  Scalar beta1 = Scalar(0);
  Scalar gamma1 = Scalar(0);
  Scalar beta2 = Scalar(0);
  Scalar gamma2 = Scalar(0);
  std::vector<int> labels;
};

using ClusterState = ClusterStateT<double>;

// Alternating assign/refit clustering of the samples around two log-distance
// lines.  Line 2 starts 20 dB above the global fit so the lossier samples
// migrate to it; after the final round each sample goes to the line with the
// smaller absolute residual (ties to line 1) and the line with the smaller
// mean predicted loss over all samples becomes line 1, the clear-path
// cluster.  Deterministic given the data order.
template <class Scalar>
ClusterStateT<Scalar> init_cluster(const std::vector<MeasurementT<Scalar>>& data,
                                   int rounds = 10) {
  if (rounds < 1)
    throw Error(errc::invalid_argument, "rounds must be at least 1");
  for (const auto& m : data) m.validate();
  const auto global = detail::fit_line_subset(data, detail::all_indices(data));
  if (!global)
    throw Error(errc::degenerate_data,
                "need at least two samples at distinct distances");

  const std::size_t n = data.size();
  std::vector<Scalar> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::log10(data[i].link.distance3());

  ClusterStateT<Scalar> st;
  st.beta1 = global->first;
  st.gamma1 = global->second;
  st.beta2 = st.beta1 + Scalar(20);
  st.gamma2 = st.gamma1;
  st.labels.assign(n, 0);

  std::vector<std::int32_t> idx1, idx2;
  auto assign = [&] {
    idx1.clear();
    idx2.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Scalar r1 = std::abs(data[i].y - (st.beta1 + st.gamma1 * x[i]));
      const Scalar r2 = std::abs(data[i].y - (st.beta2 + st.gamma2 * x[i]));
      st.labels[i] = r2 < r1 ? 1 : 0;
      (st.labels[i] ? idx2 : idx1)
          .push_back(static_cast<std::int32_t>(i));
    }
  };

  for (int round = 0; round < rounds; ++round) {
    assign();
    // A cluster that lost all its samples (or collapsed onto one distance)
    // keeps its previous line.
    if (const auto l1 = detail::fit_line_subset(data, idx1)) {
      st.beta1 = l1->first;
      st.gamma1 = l1->second;
    }
    if (const auto l2 = detail::fit_line_subset(data, idx2)) {
      st.beta2 = l2->first;
      st.gamma2 = l2->second;
    }
  }
  assign();

  Scalar xm = Scalar(0);
  for (std::size_t i = 0; i < n; ++i) xm += x[i];
  xm /= Scalar(n);
  const Scalar mean1 = st.beta1 + st.gamma1 * xm;
  const Scalar mean2 = st.beta2 + st.gamma2 * xm;
  if (mean2 < mean1) {
    std::swap(st.beta1, st.beta2);
    std::swap(st.gamma1, st.gamma2);
    for (auto& l : st.labels) l = 1 - l;
  }
  return st;
}

// A link together with its obstruction label: 1 when the direct ray is
// believed blocked, 0 when clear.
template <class Scalar>
struct LabeledLinkT {
  LinkT<Scalar> link;
  int blocked = 0;

  void validate() const {
    link.validate();
    if (blocked != 0 && blocked != 1)
      throw Error(errc::invalid_argument, "label must be 0 or 1");
  }
};

using LabeledLink = LabeledLinkT<double>;

// Descent controls shared by the height initializer and the joint fit.  The
// scale factors multiply learning_rate for the slope, the scattering weights
// and the heights; height gradients are additionally averaged per cell over
// the links that cross it so the step size does not depend on the data
// volume.
template <class Scalar>
struct FitConfigT {
  Scalar learning_rate = Scalar(0.1);
  int epochs = 200;
  int batch_size = 0;  // 0 means full batch
  Scalar height_clamp_max = Scalar(120);
  Scalar init_height = Scalar(40);
  Scalar convergence_tol = Scalar(1e-9);
  std::uint64_t seed = 0;

  int cluster_rounds = 10;
  int patience = 25;
  // Height-initialization stage: its descent wants larger steps and more
  // epochs than the joint refinement, plus a shrinkage pull toward zero so
  // cells keep height only while blocked links defend it — without the pull,
  // clear cells stop just below the lowest training ray and stray clutter
  // blocks held-out links.
  Scalar init_learning_rate = Scalar(0.5);
  int init_epochs = 1500;
  Scalar height_decay = Scalar(0.015);
  Scalar grad_clip = Scalar(2);
  Scalar step_scale_gamma = Scalar(0.25);
  Scalar step_scale_weights = Scalar(0.02);
  Scalar step_scale_heights = Scalar(10);
  bool use_scatter = false;
  bool polish = true;
  VoglerConfig vogler{};
  Scalar eccentricity = Scalar(0.5);
  Eigen::Index stn_rows = 16;
  Eigen::Index stn_cols = 16;

  void validate() const {
    if (!(learning_rate > Scalar(0)) || !std::isfinite(double(learning_rate)))
      throw Error(errc::invalid_argument, "learning_rate must be positive");
    if (epochs < 1)
      throw Error(errc::invalid_argument, "epochs must be at least 1");
    if (batch_size < 0)
      throw Error(errc::invalid_argument, "batch_size must be non-negative");
    if (!(height_clamp_max > Scalar(0)))
      throw Error(errc::invalid_argument, "height_clamp_max must be positive");
    if (!(init_height >= Scalar(0)) || !(init_height <= height_clamp_max))
      throw Error(errc::invalid_argument,
                  "init_height must lie in [0, height_clamp_max]");
    if (!(convergence_tol >= Scalar(0)))
      throw Error(errc::invalid_argument,
                  "convergence_tol must be non-negative");
    if (cluster_rounds < 1 || patience < 1)
      throw Error(errc::invalid_argument,
                  "cluster_rounds and patience must be at least 1");
    if (!(init_learning_rate > Scalar(0)) || init_epochs < 1 ||
        !(height_decay >= Scalar(0)))
      throw Error(errc::invalid_argument,
                  "invalid height-initialization stage settings");
    if (!(grad_clip > Scalar(0)) || !(step_scale_gamma > Scalar(0)) ||
        !(step_scale_weights > Scalar(0)) ||
        !(step_scale_heights > Scalar(0)))
      throw Error(errc::invalid_argument,
                  "gradient clip and step scales must be positive");
    vogler.validate();
    if (!(eccentricity > Scalar(0)) || !(eccentricity < Scalar(1)))
      throw Error(errc::invalid_argument, "eccentricity must be in (0, 1)");
    if (stn_rows < 2 || stn_cols < 2)
      throw Error(errc::invalid_argument,
                  "resampling frame needs at least 2x2 pixels");
  }
};

using FitConfig = FitConfigT<double>;

namespace detail {

// Clip bound keeping the cross-entropy logs finite.
inline constexpr double kIndicatorClip = 1e-7;

// Slimmed trace for repeated height sums: only the cells where the direct
// ray sits above ground, with the ray altitude to clear.
template <class Scalar>
struct TraceCacheT {
  struct Cell {
    Eigen::Index i, j;
    Scalar z;
  };
  std::vector<Cell> cells;
};

template <class Scalar>
TraceCacheT<Scalar> make_trace_cache(const CellTraceT<Scalar>& trace) {
  TraceCacheT<Scalar> out;
  out.cells.reserve(trace.cells.size());
  for (const auto& c : trace.cells)
    if (c.z > Scalar(0)) out.cells.push_back({c.i, c.j, c.z});
  return out;
}

template <class Scalar, class DH>
Scalar cached_excess_sum(const TraceCacheT<Scalar>& t,
                         const Eigen::MatrixBase<DH>& heights) {
  Scalar s = Scalar(0);
  for (const auto& c : t.cells)
    s += std::max(heights(c.i, c.j) - c.z, Scalar(0));
  return s;
}

// Per-sample cross-entropy term and its derivative in the height excess sum
// s.  The blockage probability is 1 minus the smooth visibility 1 - tanh(s).
// The clear-path term -log(1 - tanh s) is evaluated in a log-domain form,
// 2s + log1p(e^{-2s}) - log 2, that stays finite and keeps its slope
// 1 + tanh(s) for arbitrarily deep intrusion.  The obstructed term
// -log(tanh s) has a genuine singularity at s = 0, so its argument is
// floored at the clip bound; it goes flat only where a blocked label meets
// an untouched ray (which has no live height gradient anyway).
template <class Scalar>
Scalar bce_term(Scalar excess_sum, int blocked, Scalar* dloss_ds) {
  const Scalar t = std::tanh(excess_sum);
  if (!blocked) {
    if (dloss_ds) *dloss_ds = Scalar(1) + t;
    return Scalar(2) * excess_sum +
           std::log1p(std::exp(Scalar(-2) * excess_sum)) -
           Scalar(M_LN2);
  }
  if (t < Scalar(kIndicatorClip)) {
    if (dloss_ds) *dloss_ds = Scalar(0);
    return -std::log(Scalar(kIndicatorClip));
  }
  if (dloss_ds) *dloss_ds = -(Scalar(1) - t * t) / t;
  return -std::log(t);
}

// Raises errc::divergence when the loss is non-finite or has sat above its
// best value for `patience` consecutive epochs.
struct DivergenceGuard {
  double best = std::numeric_limits<double>::infinity();
  int bad_run = 0;
  int patience = 25;

  void observe(double loss, int epoch, const char* what) {
    if (!std::isfinite(loss))
      throw Error(errc::divergence,
                  std::string(what) + " became non-finite at epoch " +
                      std::to_string(epoch) + "; lower the learning rate");
    if (loss > best * 1.5 + 1e-9) {
      if (++bad_run >= patience)
        throw Error(errc::divergence,
                    std::string(what) + " rose for " +
                        std::to_string(bad_run) +
                        " consecutive epochs (best " + std::to_string(best) +
                        ", last " + std::to_string(loss) + ", epoch " +
                        std::to_string(epoch) +
                        "); lower the learning rate");
    } else {
      bad_run = 0;
    }
    best = std::min(best, loss);
  }
};

}  // namespace detail

// Mean binary cross-entropy between the obstruction labels and the smooth
// visibility of each link under the map.  When `grad` is given it receives
// the exact gradient with respect to every cell height (same shape as the
// height matrix).
template <class Scalar>
Scalar bce_loss(const std::vector<LabeledLinkT<Scalar>>& data,
                const ObstacleMapT<Scalar>& map,
                Matrix2d_t<Scalar>* grad = nullptr) {
  if (data.empty())
    throw Error(errc::invalid_argument, "cross-entropy needs data");
  map.validate();
  if (grad) *grad = Matrix2d_t<Scalar>::Zero(map.grid.rows, map.grid.cols);
  const Scalar inv_n = Scalar(1) / Scalar(data.size());
  Scalar loss = Scalar(0);
  for (const auto& sample : data) {
    sample.validate();
    const CellTraceT<Scalar> trace = trace_cells(sample.link, map.grid);
    Scalar s = Scalar(0);
    for (const auto& c : trace.cells)
      if (c.z > Scalar(0))
        s += std::max(map.heights(c.i, c.j) - c.z, Scalar(0));
    Scalar dloss_ds = Scalar(0);
    loss += detail::bce_term(s, sample.blocked, grad ? &dloss_ds : nullptr);
    if (grad && dloss_ds != Scalar(0)) {
      for (const auto& c : trace.cells)
        if (c.z > Scalar(0) && map.heights(c.i, c.j) > c.z)
          (*grad)(c.i, c.j) += dloss_ds * inv_n;
    }
  }
  return loss * inv_n;
}

// Learns an initial height map from obstruction labels by gradient descent
// on the cross-entropy above.  Heights start flat at init_height — high
// enough that blocked links already intrude on the ray, since cells below
// every ray receive no gradient — and stay clamped to
// [0, height_clamp_max].  Per-cell gradients are averaged over the links
// crossing the cell and clipped, so the step size is insensitive to the
// number of samples.  Deterministic: full-batch, no randomness.
template <class Scalar>
ObstacleMapT<Scalar> init_obstacle_map(
    const std::vector<LabeledLinkT<Scalar>>& data,
    const GridSpecT<Scalar>& grid, const FitConfigT<Scalar>& cfg) {
  if (data.empty())
    throw Error(errc::invalid_argument, "height initialization needs data");
  cfg.validate();
  grid.validate();

  std::vector<detail::TraceCacheT<Scalar>> traces;
  traces.reserve(data.size());
  Matrix2d_t<Scalar> count = Matrix2d_t<Scalar>::Zero(grid.rows, grid.cols);
  for (const auto& sample : data) {
    sample.validate();
    traces.push_back(detail::make_trace_cache(trace_cells(sample.link, grid)));
    for (const auto& c : traces.back().cells) count(c.i, c.j) += Scalar(1);
  }

  ObstacleMapT<Scalar> map{grid, Matrix2d_t<Scalar>::Constant(
                                     grid.rows, grid.cols, cfg.init_height)};
  Matrix2d_t<Scalar> acc(grid.rows, grid.cols);
  detail::DivergenceGuard guard;
  guard.patience = cfg.patience;
  const Scalar inv_n = Scalar(1) / Scalar(data.size());
  Scalar prev_loss = std::numeric_limits<Scalar>::infinity();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    acc.setZero();
    Scalar loss = Scalar(0);
    for (std::size_t k = 0; k < data.size(); ++k) {
      const Scalar s = detail::cached_excess_sum(traces[k], map.heights);
      Scalar dloss_ds = Scalar(0);
      loss += detail::bce_term(s, data[k].blocked, &dloss_ds);
      if (dloss_ds == Scalar(0)) continue;
      const Scalar clipped =
          std::clamp(dloss_ds, -cfg.grad_clip, cfg.grad_clip);
      for (const auto& c : traces[k].cells)
        if (map.heights(c.i, c.j) > c.z) acc(c.i, c.j) += clipped;
    }
    loss *= inv_n;
    // The update below descends the cross-entropy plus the shrinkage
    // penalty (weighted by how many links cross each cell), so that is the
    // quantity that must trend downward.
    const Scalar objective =
        loss + cfg.height_decay * inv_n *
                   (count.array() * map.heights.array()).sum();
    guard.observe(double(objective), epoch, "height initialization objective");
    for (Eigen::Index j = 0; j < grid.cols; ++j)
      for (Eigen::Index i = 0; i < grid.rows; ++i)
        if (count(i, j) > Scalar(0))
          map.heights(i, j) = std::clamp(
              map.heights(i, j) -
                  cfg.learning_rate *
                      (acc(i, j) / count(i, j) + cfg.height_decay),
              Scalar(0), cfg.height_clamp_max);
    if (std::isfinite(double(prev_loss)) &&
        std::abs(prev_loss - objective) <=
            cfg.convergence_tol * std::max(Scalar(1), std::abs(objective)))
      break;
    prev_loss = objective;
  }
  return map;
}

// Per-link quantities the joint descent treats as locally constant: the
// traced cells, and — when the link was obstructed at the heights the cache
// was built with — the bent-path distance, the knife-edge excess loss and
// the pooled scattering features.  Rebuilt once per epoch so the obstructed
// branch tracks the evolving heights without gradients flowing through the
// edge geometry.
template <class Scalar>
struct SoftFitCacheT {
  struct Entry {
    detail::TraceCacheT<Scalar> trace;
    Scalar log10_d3 = Scalar(0);
    Scalar log10_curve = Scalar(0);
    Scalar excess_db = Scalar(0);
    Eigen::Matrix<Scalar, kPooledFeatureCount, 1> pooled =
        Eigen::Matrix<Scalar, kPooledFeatureCount, 1>::Zero();
    bool has_nlos = false;
  };
  std::vector<Entry> entries;
  Matrix2d_t<Scalar> cell_count;  // links crossing each cell above ground
};

template <class Scalar>
using SoftFitCache = SoftFitCacheT<Scalar>;

template <class Scalar>
SoftFitCacheT<Scalar> build_soft_fit_cache(
    const std::vector<MeasurementT<Scalar>>& data,
    const RadioMapModelT<Scalar>& model,
    const std::vector<CellTraceT<Scalar>>* traces = nullptr) {
  SoftFitCacheT<Scalar> cache;
  cache.entries.reserve(data.size());
  cache.cell_count =
      Matrix2d_t<Scalar>::Zero(model.map.grid.rows, model.map.grid.cols);
  const bool with_scatter =
      model.scatter.kind != ScatterRegressorT<Scalar>::Kind::null;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const CellTraceT<Scalar> local =
        traces ? CellTraceT<Scalar>{} : trace_cells(data[k].link, model.map.grid);
    const CellTraceT<Scalar>& trace = traces ? (*traces)[k] : local;
    typename SoftFitCacheT<Scalar>::Entry e;
    e.trace = detail::make_trace_cache(trace);
    for (const auto& c : e.trace.cells) cache.cell_count(c.i, c.j) += Scalar(1);
    e.log10_d3 = std::log10(data[k].link.distance3());
    e.log10_curve = e.log10_d3;
    const Scalar s = detail::cached_excess_sum(e.trace, model.map.heights);
    if (s > Scalar(0)) {
      try {
        const DiffractionPathT<Scalar> path =
            extract_diffraction_path(data[k].link, trace, model.map.heights);
        const VoglerResult att = vogler_attenuation(path, model.vogler);
        e.log10_curve = std::log10(path.curve_length3());
        e.excess_db = Scalar(att.excess_loss_db);
        if (with_scatter)
          e.pooled = pooled_features(
              scatter_features(data[k].link, model.map, model.eccentricity,
                               model.scatter.frame()));
        e.has_nlos = true;
      } catch (const Error& err) {
        if (err.code() != errc::los_path) throw;
      }
    }
    cache.entries.push_back(std::move(e));
  }
  return cache;
}

// Gradients of the soft-blend mean squared error with respect to every
// trainable quantity.
template <class Scalar>
struct SoftGradsT {
  Scalar beta0 = Scalar(0);
  Scalar gamma0 = Scalar(0);
  Eigen::Matrix<Scalar, kPooledFeatureCount, 1> weights =
      Eigen::Matrix<Scalar, kPooledFeatureCount, 1>::Zero();
  Matrix2d_t<Scalar> heights;
};

using SoftGrads = SoftGradsT<double>;

// Mean squared error of the soft-blend prediction over `data` (or the subset
// given by `subset` indices), with the obstructed-branch geometry frozen in
// `cache`.  The heights enter only through the smooth visibility, so the
// gradient in `grads` is exact for this frozen objective — which is what the
// descent steps on.  Links with no obstructed branch in the cache predict
// the clear-path line regardless of the current heights.
template <class Scalar>
Scalar soft_mse_loss(const std::vector<MeasurementT<Scalar>>& data,
                     const RadioMapModelT<Scalar>& model,
                     const SoftFitCacheT<Scalar>& cache,
                     SoftGradsT<Scalar>* grads = nullptr,
                     const std::vector<std::int32_t>* subset = nullptr) {
  if (cache.entries.size() != data.size())
    throw Error(errc::invalid_argument, "cache does not match the data");
  const std::size_t n = subset ? subset->size() : data.size();
  if (n == 0) throw Error(errc::invalid_argument, "empty batch");
  if (grads) {
    grads->beta0 = Scalar(0);
    grads->gamma0 = Scalar(0);
    grads->weights.setZero();
    grads->heights =
        Matrix2d_t<Scalar>::Zero(model.map.grid.rows, model.map.grid.cols);
  }
  const bool with_scatter =
      model.scatter.kind != ScatterRegressorT<Scalar>::Kind::null;
  const Scalar inv_n = Scalar(1) / Scalar(n);
  Scalar loss = Scalar(0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t k = subset ? std::size_t((*subset)[pos]) : pos;
    const auto& e = cache.entries[k];
    const Scalar g_los = model.los.beta0 + model.los.gamma0 * e.log10_d3;
    Scalar yhat, dy_dgamma;
    Scalar blend = Scalar(0);  // weight of the obstructed branch
    Scalar dy_ds = Scalar(0);
    const Scalar t = std::tanh(detail::cached_excess_sum(e.trace, model.map.heights));
    if (e.has_nlos && t > Scalar(0)) {
      Scalar g_nlos = model.los.beta0 + model.los.gamma0 * e.log10_curve +
                      e.excess_db;
      if (with_scatter) g_nlos += model.scatter.weights.dot(e.pooled);
      const Scalar ind = Scalar(1) - t;  // visibility; blend weight of clear
      blend = t;
      yhat = ind * g_los + blend * g_nlos;
      dy_dgamma = ind * e.log10_d3 + blend * e.log10_curve;
      dy_ds = (Scalar(1) - t * t) * (g_nlos - g_los);
    } else {
      yhat = g_los;
      dy_dgamma = e.log10_d3;
    }
    const Scalar r = yhat - data[k].y;
    loss += r * r;
    if (!grads) continue;
    const Scalar w = Scalar(2) * r * inv_n;
    grads->beta0 += w;
    grads->gamma0 += w * dy_dgamma;
    if (with_scatter && blend > Scalar(0))
      grads->weights += (w * blend) * e.pooled;
    if (dy_ds != Scalar(0)) {
      const Scalar wcell = w * dy_ds;
      for (const auto& c : e.trace.cells)
        if (model.map.heights(c.i, c.j) > c.z)
          grads->heights(c.i, c.j) += wcell;
    }
  }
  return loss * inv_n;
}

// A fitted model with its training diagnostics.
template <class Scalar>
struct FitResultT {
  RadioMapModelT<Scalar> model;
  Scalar final_loss = Scalar(0);
  int epochs_run = 0;
  std::vector<Scalar> loss_history;
};

using FitResult = FitResultT<double>;

// Joint gradient descent of the path-loss line, the scattering weights and
// the obstacle heights on the soft-blend mean squared error, starting from
// the supplied height map.  Each epoch rebuilds the obstructed-branch cache
// at the current heights, then steps every parameter with its scaled
// learning rate; per-cell height gradients are averaged over the links
// crossing the cell and clipped.  Heights stay in [0, height_clamp_max].
// After the descent the clear-path line is refit in closed form on the
// samples the final map classifies as unobstructed.  The returned model
// predicts with the hard visibility switch.
template <class Scalar>
FitResultT<Scalar> fit_model(const std::vector<MeasurementT<Scalar>>& data,
                             const ObstacleMapT<Scalar>& init_map,
                             const FitConfigT<Scalar>& cfg) {
  cfg.validate();
  init_map.validate();
  for (const auto& m : data) m.validate();

  RadioMapModelT<Scalar> model;
  model.map = init_map;
  model.map.heights = init_map.heights.cwiseMin(cfg.height_clamp_max);
  model.vogler = cfg.vogler;
  model.eccentricity = cfg.eccentricity;
  model.indicator_mode = IndicatorMode::soft;
  if (cfg.use_scatter) {
    model.scatter.kind = ScatterRegressorT<Scalar>::Kind::linear;
    model.scatter.weights =
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(kPooledFeatureCount);
    model.scatter.out_rows = cfg.stn_rows;
    model.scatter.out_cols = cfg.stn_cols;
  }

  const auto global = detail::fit_line_subset(data, detail::all_indices(data));
  if (!global)
    throw Error(errc::degenerate_data,
                "need at least two samples at distinct distances");
  model.los.beta0 = global->first;
  model.los.gamma0 = global->second;

  std::vector<CellTraceT<Scalar>> traces;
  traces.reserve(data.size());
  for (const auto& m : data)
    traces.push_back(trace_cells(m.link, model.map.grid));

  const int nsamples = static_cast<int>(data.size());
  const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < nsamples;
  std::vector<std::int32_t> order;
  Rng rng(cfg.seed);

  FitResultT<Scalar> out;
  out.loss_history.reserve(cfg.epochs);
  detail::DivergenceGuard guard;
  guard.patience = cfg.patience;
  SoftGradsT<Scalar> grads;
  Scalar prev_loss = std::numeric_limits<Scalar>::infinity();

  auto apply_step = [&](const SoftGradsT<Scalar>& g,
                        const Matrix2d_t<Scalar>& count) {
    model.los.beta0 -= cfg.learning_rate * g.beta0;
    model.los.gamma0 -=
        cfg.learning_rate * cfg.step_scale_gamma * g.gamma0;
    if (cfg.use_scatter)
      model.scatter.weights -=
          cfg.learning_rate * cfg.step_scale_weights * g.weights;
    const Scalar lr_h = cfg.learning_rate * cfg.step_scale_heights;
    const Scalar scale_n = Scalar(nsamples);
    for (Eigen::Index j = 0; j < model.map.grid.cols; ++j)
      for (Eigen::Index i = 0; i < model.map.grid.rows; ++i) {
        if (!(count(i, j) > Scalar(0))) continue;
        const Scalar normalized =
            std::clamp(g.heights(i, j) * scale_n / count(i, j),
                       -cfg.grad_clip, cfg.grad_clip);
        model.map.heights(i, j) =
            std::clamp(model.map.heights(i, j) - lr_h * normalized, Scalar(0),
                       cfg.height_clamp_max);
      }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const SoftFitCacheT<Scalar> cache =
        build_soft_fit_cache(data, model, &traces);
    Scalar epoch_loss;
    if (!minibatch) {
      epoch_loss = soft_mse_loss(data, model, cache, &grads);
      guard.observe(double(epoch_loss), epoch, "mean squared error");
      apply_step(grads, cache.cell_count);
    } else {
      if (order.empty()) order = detail::all_indices(data);
      for (int i = nsamples - 1; i > 0; --i)
        std::swap(order[i],
                  order[rng.uniform_index(std::uint64_t(i) + 1)]);
      epoch_loss = Scalar(0);
      std::vector<std::int32_t> batch;
      for (int start = 0; start < nsamples; start += cfg.batch_size) {
        const int stop = std::min(start + cfg.batch_size, nsamples);
        batch.assign(order.begin() + start, order.begin() + stop);
        const Scalar batch_loss =
            soft_mse_loss(data, model, cache, &grads, &batch);
        epoch_loss += batch_loss * Scalar(stop - start);
        apply_step(grads, cache.cell_count);
      }
      epoch_loss /= Scalar(nsamples);
      guard.observe(double(epoch_loss), epoch, "mean squared error");
    }
    out.loss_history.push_back(epoch_loss);
    out.epochs_run = epoch + 1;
    if (std::isfinite(double(prev_loss)) &&
        std::abs(prev_loss - epoch_loss) <=
            cfg.convergence_tol * std::max(Scalar(1), std::abs(epoch_loss)))
      break;
    prev_loss = epoch_loss;
  }

  if (cfg.polish) {
    // The clear branch of the hard predictor is exactly a line in the log
    // distance; least squares on the samples the final map leaves
    // unobstructed is its exact minimizer.
    std::vector<std::int32_t> clear;
    for (std::size_t k = 0; k < data.size(); ++k)
      if (hard_los(traces[k], model.map.heights))
        clear.push_back(static_cast<std::int32_t>(k));
    if (const auto line = detail::fit_line_subset(data, clear);
        line && line->second > Scalar(0)) {
      model.los.beta0 = line->first;
      model.los.gamma0 = line->second;
    }
  }

  const SoftFitCacheT<Scalar> final_cache =
      build_soft_fit_cache(data, model, &traces);
  out.final_loss = soft_mse_loss(data, model, final_cache);
  model.indicator_mode = IndicatorMode::hard;
  model.validate();
  out.model = std::move(model);
  return out;
}

// Full reconstruction pipeline: cluster the samples into clear/obstructed,
// learn an initial height map from those labels, then jointly refine
// everything.
template <class Scalar>
FitResultT<Scalar> fit_pipeline(const std::vector<MeasurementT<Scalar>>& data,
                                const GridSpecT<Scalar>& grid,
                                const FitConfigT<Scalar>& cfg) {
  cfg.validate();
  const ClusterStateT<Scalar> clusters = init_cluster(data, cfg.cluster_rounds);
  std::vector<LabeledLinkT<Scalar>> labeled;
  labeled.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    labeled.push_back({data[i].link, clusters.labels[i]});
  FitConfigT<Scalar> init_cfg = cfg;
  init_cfg.learning_rate = cfg.init_learning_rate;
  init_cfg.epochs = cfg.init_epochs;
  const ObstacleMapT<Scalar> init = init_obstacle_map(labeled, grid, init_cfg);
  return fit_model(data, init, cfg);
}

// Gaussian kernel over the 6D link distance used by the nearest-neighbor
// baseline.
template <class Scalar>
Scalar knn_kernel(Scalar dist6, Scalar bandwidth) {
  return std::exp(-dist6 * dist6 / (Scalar(2) * bandwidth * bandwidth));
}

// Distance-weighted k-nearest-neighbor regression in the 6D space of
// transmitter/receiver positions.  Neighbor ties at equal distance resolve
// to the smaller sample index; weights are the Gaussian kernel normalized
// over the k neighbors (computed shifted by the nearest distance so a far
// query cannot underflow every weight).
template <class Scalar>
Scalar knn_predict(const std::vector<MeasurementT<Scalar>>& train,
                   const LinkT<Scalar>& query, int k = 6,
                   Scalar bandwidth = Scalar(50)) {
  if (train.empty())
    throw Error(errc::invalid_argument, "nearest neighbor needs training data");
  if (k < 1 || std::size_t(k) > train.size())
    throw Error(errc::invalid_argument,
                "k must lie in [1, number of training samples]");
  if (!(bandwidth > Scalar(0)))
    throw Error(errc::invalid_argument, "bandwidth must be positive");
  query.validate();

  std::vector<std::pair<Scalar, std::int32_t>> by_dist;
  by_dist.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Scalar d2 = (train[i].link.tx - query.tx).squaredNorm() +
                      (train[i].link.rx - query.rx).squaredNorm();
    by_dist.emplace_back(d2, static_cast<std::int32_t>(i));
  }
  std::partial_sort(by_dist.begin(), by_dist.begin() + k, by_dist.end());

  const Scalar d2min = by_dist.front().first;
  Scalar wsum = Scalar(0), ysum = Scalar(0);
  for (int m = 0; m < k; ++m) {
    const Scalar w = std::exp(-(by_dist[m].first - d2min) /
                              (Scalar(2) * bandwidth * bandwidth));
    wsum += w;
    ysum += w * train[by_dist[m].second].y;
  }
  return ysum / wsum;
}

}  // namespace radiomap
