#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "radiomap/io.hpp"
#include "radiomap/rng.hpp"

// Command-line front end.  Every subcommand reads one run-configuration
// document, optionally overrides the seed and the artifact paths from flags,
// runs the corresponding library operation, and writes its outputs plus a
// manifest that records the effective configuration, its hash and the digest
// of every file produced.  Failures print a single-line JSON object on
// stderr with a stable error code and exit nonzero.

namespace {

using namespace radiomap;

// Options shared by every subcommand.
struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string manifest;  // empty: derived from the primary output path
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration file (JSON)")
      ->required();
  cmd->add_option("--seed", c.seed, "Override the configured seed")
      ->each([&c](const std::string&) { c.seed_set = true; });
  cmd->add_option("--manifest", c.manifest,
                  "Manifest path (default: <primary output>.manifest.json)");
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = load_run_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  return cfg;
}

std::string pick(const std::string& flag_value,
                 const std::string& config_value) {
  return flag_value.empty() ? config_value : flag_value;
}

void finish(const Common& c, const std::string& command, const RunConfig& cfg,
            const std::vector<OutputRecord>& outputs) {
  const std::string manifest_path =
      c.manifest.empty() ? outputs.front().path + ".manifest.json"
                         : c.manifest;
  save_manifest(manifest_path, command, cfg, outputs);
  for (const OutputRecord& o : outputs)
    std::cout << "wrote " << o.path << "\n";
  std::cout << "wrote " << manifest_path << "\n";
}

// Writes `text` and returns the output record for the manifest.
OutputRecord emit(const std::string& name, const std::string& path,
                  const std::string& text) {
  write_text_file(path, text);
  return {name, path, sha256_hex(text)};
}

// How the fitted model file should refer to its obstacle-map file: relative
// to the model's own directory when possible, so the pair stays portable.
std::string reference_from(const std::string& model_path,
                           const std::string& target) {
  const std::filesystem::path base =
      std::filesystem::path(model_path).parent_path();
  if (base.empty()) return target;
  return std::filesystem::path(target).lexically_proximate(base).string();
}

// Random rectangular blocks until the requested fraction of cells is
// covered.  Heights are drawn uniformly; overlapping blocks keep the taller
// height.  Deterministic for a given seed.
ObstacleMap generate_scene(const GridSpec& grid, const SceneConfig& sc,
                           std::uint64_t seed) {
  grid.validate();
  sc.validate();
  ObstacleMap map = ObstacleMap::zero(grid);
  if (sc.density <= 0.0) return map;
  if (!(sc.height_hi > 0.0))
    throw Error(errc::invalid_argument,
                "a positive density needs a positive block height range");

  const double total = double(grid.rows) * double(grid.cols);
  const std::uint64_t spread =
      std::uint64_t(sc.block_cells_hi - sc.block_cells_lo + 1);
  Rng rng(seed);
  std::int64_t covered = 0;
  for (int guard = 0; double(covered) < sc.density * total; ++guard) {
    if (guard > 2000000)
      throw Error(errc::divergence,
                  "scene generation failed to reach the requested density");
    const Eigen::Index di =
        sc.block_cells_lo + Eigen::Index(rng.uniform_index(spread));
    const Eigen::Index dj =
        sc.block_cells_lo + Eigen::Index(rng.uniform_index(spread));
    const Eigen::Index i0 =
        Eigen::Index(rng.uniform_index(std::uint64_t(grid.rows)));
    const Eigen::Index j0 =
        Eigen::Index(rng.uniform_index(std::uint64_t(grid.cols)));
    const double h = rng.uniform(sc.height_lo, sc.height_hi);
    if (!(h > 0.0)) continue;
    const Eigen::Index i1 = std::min(i0 + di - 1, grid.rows - 1);
    const Eigen::Index j1 = std::min(j0 + dj - 1, grid.cols - 1);
    for (Eigen::Index i = i0; i <= i1; ++i)
      for (Eigen::Index j = j0; j <= j1; ++j) {
        if (map.heights(i, j) == 0.0) ++covered;
        map.heights(i, j) = std::max(map.heights(i, j), h);
      }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

int run_gen_scene(const Common& c, const std::string& scene_flag) {
  const RunConfig cfg = load_config(c);
  const std::string scene_path = pick(scene_flag, cfg.paths.scene);
  const ObstacleMap map = generate_scene(cfg.grid, cfg.scene, cfg.seed);
  std::vector<OutputRecord> outs;
  outs.push_back(emit("scene", scene_path, obstacle_map_text(map)));
  finish(c, "gen-scene", cfg, outs);
  return 0;
}

int run_gen_data(const Common& c, const std::string& scene_flag,
                 const std::string& measurements_flag) {
  const RunConfig cfg = load_config(c);
  const ObstacleMap truth =
      load_obstacle_map(pick(scene_flag, cfg.paths.scene));
  const std::vector<Measurement> data = generate_measurements(
      truth, cfg.path_loss, cfg.vogler_with_wavelength(), cfg.data.count,
      cfg.noise_sigma, cfg.seed, cfg.data.sampling);
  std::vector<OutputRecord> outs;
  outs.push_back(emit("measurements",
                      pick(measurements_flag, cfg.paths.measurements),
                      measurements_text(data)));
  finish(c, "gen-data", cfg, outs);
  return 0;
}

int run_fit(const Common& c, const std::string& measurements_flag,
            const std::string& model_flag, const std::string& fitted_flag) {
  const RunConfig cfg = load_config(c);
  const std::vector<Measurement> data =
      load_measurements(pick(measurements_flag, cfg.paths.measurements));

  FitConfig fit_cfg = cfg.fit;
  fit_cfg.vogler = cfg.vogler_with_wavelength();
  fit_cfg.eccentricity = cfg.eccentricity;
  fit_cfg.seed = cfg.seed;
  const FitResult fit = fit_pipeline(data, cfg.grid, fit_cfg);

  const std::string model_path = pick(model_flag, cfg.paths.model);
  const std::string fitted_path = pick(fitted_flag, cfg.paths.fitted_scene);
  const std::string map_ref = reference_from(model_path, fitted_path);

  const std::string map_text = obstacle_map_text(fit.model.map);
  const std::string map_sha = sha256_hex(map_text);
  const std::string model_doc = model_text(fit.model, map_ref, map_sha);
  std::vector<OutputRecord> outs;
  write_text_file(model_path, model_doc);
  outs.push_back({"model", model_path, sha256_hex(model_doc)});
  write_text_file(fitted_path, map_text);
  outs.push_back({"fitted_scene", fitted_path, map_sha});
  finish(c, "fit", cfg, outs);
  std::cout << "final loss " << fit.final_loss << " after " << fit.epochs_run
            << " epochs\n";
  return 0;
}

int run_predict(const Common& c, const std::string& model_flag,
                const std::string& prediction_flag) {
  const RunConfig cfg = load_config(c);
  const RadioMapModel model = load_model(pick(model_flag, cfg.paths.model));

  GridField field;
  field.grid = model.map.grid;
  field.tx = cfg.predict.tx;
  field.rx_height = cfg.predict.rx_height;
  field.values.resize(field.grid.rows, field.grid.cols);
  for (Eigen::Index i = 0; i < field.grid.rows; ++i)
    for (Eigen::Index j = 0; j < field.grid.cols; ++j) {
      const Vector2_t<double> center = field.grid.cell_center(i, j);
      Link link;
      link.tx = field.tx;
      link.rx = {center.x(), center.y(), field.rx_height};
      if (link.tx_ground() == link.rx_ground()) {
        // Straight-down link: nothing to trace, clear by construction.
        const double d = link.distance3();
        if (!(d > 0.0))
          throw Error(errc::invalid_argument,
                      "transmitter coincides with a receiver lattice point");
        field.values(i, j) = path_loss_db(model.los, d);
      } else {
        field.values(i, j) = detail::predict_prevalidated(link, model);
      }
    }

  std::vector<OutputRecord> outs;
  outs.push_back(emit("prediction", pick(prediction_flag, cfg.paths.prediction),
                      grid_field_text(field)));
  finish(c, "predict", cfg, outs);
  return 0;
}

int run_eval(const Common& c, const std::string& model_flag,
             const std::string& measurements_flag,
             const std::string& metrics_flag) {
  const RunConfig cfg = load_config(c);
  const RadioMapModel model = load_model(pick(model_flag, cfg.paths.model));
  const std::vector<Measurement> data =
      load_measurements(pick(measurements_flag, cfg.paths.measurements));
  const Metrics m = evaluate(model, data);
  std::vector<OutputRecord> outs;
  outs.push_back(
      emit("metrics", pick(metrics_flag, cfg.paths.metrics), metrics_text(m)));
  finish(c, "eval", cfg, outs);
  std::cout << "nmae " << m.nmae << " over " << m.count << " samples\n";
  return 0;
}

int run_relay(const Common& c, const std::string& model_flag,
              const std::string& result_flag) {
  const RunConfig cfg = load_config(c);
  const RadioMapModel model = load_model(pick(model_flag, cfg.paths.model));
  const RelayResult r = place_relay(cfg.relay, model);
  std::vector<OutputRecord> outs;
  outs.push_back(
      emit("relay", pick(result_flag, cfg.paths.relay), relay_result_text(r)));
  finish(c, "relay", cfg, outs);
  return 0;
}

void print_error_json(const std::string& code, const std::string& message) {
  json err;
  err["error"] = {{"code", code}, {"message", message}};
  std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radio-map reconstruction and relay placement tools"};
  app.require_subcommand(1);

  Common c_scene, c_data, c_fit, c_predict, c_eval, c_relay;
  std::string scene_out, data_scene, data_out, fit_meas, fit_model, fit_scene;
  std::string pred_model, pred_out, eval_model, eval_meas, eval_out;
  std::string relay_model, relay_out;

  CLI::App* gen_scene =
      app.add_subcommand("gen-scene", "Generate a random obstacle map");
  add_common(gen_scene, c_scene);
  gen_scene->add_option("--scene", scene_out, "Obstacle map output path");

  CLI::App* gen_data = app.add_subcommand(
      "gen-data", "Simulate measurements over an obstacle map");
  add_common(gen_data, c_data);
  gen_data->add_option("--scene", data_scene, "Obstacle map input path");
  gen_data->add_option("--measurements", data_out,
                       "Measurement CSV output path");

  CLI::App* fit = app.add_subcommand(
      "fit", "Reconstruct a radio map model from measurements");
  add_common(fit, c_fit);
  fit->add_option("--measurements", fit_meas, "Measurement CSV input path");
  fit->add_option("--model", fit_model, "Model output path");
  fit->add_option("--fitted-scene", fit_scene,
                  "Learned obstacle map output path");

  CLI::App* predict = app.add_subcommand(
      "predict", "Predict attenuation over the receiver lattice");
  add_common(predict, c_predict);
  predict->add_option("--model", pred_model, "Model input path");
  predict->add_option("--prediction", pred_out, "Prediction output path");

  CLI::App* eval =
      app.add_subcommand("eval", "Evaluate a model against measurements");
  add_common(eval, c_eval);
  eval->add_option("--model", eval_model, "Model input path");
  eval->add_option("--measurements", eval_meas, "Measurement CSV input path");
  eval->add_option("--metrics", eval_out, "Metrics output path");

  CLI::App* relay =
      app.add_subcommand("relay", "Place a relay between two users");
  add_common(relay, c_relay);
  relay->add_option("--model", relay_model, "Model input path");
  relay->add_option("--result", relay_out, "Relay result output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    print_error_json(radiomap::errc::invalid_argument, e.what());
    return 2;
  }

  try {
    if (gen_scene->parsed()) return run_gen_scene(c_scene, scene_out);
    if (gen_data->parsed()) return run_gen_data(c_data, data_scene, data_out);
    if (fit->parsed()) return run_fit(c_fit, fit_meas, fit_model, fit_scene);
    if (predict->parsed()) return run_predict(c_predict, pred_model, pred_out);
    if (eval->parsed()) return run_eval(c_eval, eval_model, eval_meas, eval_out);
    if (relay->parsed()) return run_relay(c_relay, relay_model, relay_out);
  } catch (const radiomap::Error& e) {
    print_error_json(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error_json("internal_error", e.what());
    return 1;
  }
  return 0;
}
