#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "radiomap/error.hpp"
#include "radiomap/grid.hpp"
#include "radiomap/propagation.hpp"
#include "radiomap/reconstruction.hpp"
#include "radiomap/relay.hpp"
#include "radiomap/version.hpp"

// On-disk artifact formats.  Everything is text: JSON documents (two-space
// indent, trailing newline, insertion-ordered keys) and one CSV table for
// measurements.  Numbers are written in shortest round-trip form, so
// serialization is a pure function of the value and write -> read -> write
// reproduces files byte for byte.
//
// Error mapping: unreadable or unwritable files raise io_failure; malformed
// text raises parse_failure with a line/column position; a wrong or missing
// schema tag raises schema_mismatch; a model whose obstacle-map reference no
// longer matches the referenced file's content hash raises hash_mismatch.

namespace radiomap {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// File and digest primitives.

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

// Parses JSON text; on failure reports `source` plus 1-based line and column
// of the offending byte.
json parse_json_text(std::string_view text, const std::string& source);

// Joins `base_dir` and `ref` unless `ref` is absolute.  Used to resolve file
// references stored inside other files relative to the referring file.
std::string resolve_reference(const std::string& base_dir,
                              const std::string& ref);
std::string parent_directory(const std::string& path);

// ---------------------------------------------------------------------------
// Obstacle map: {schema, M1, M2, cell_size, origin, heights} with the height
// matrix flattened row by row.

std::string obstacle_map_text(const ObstacleMap& map);
ObstacleMap parse_obstacle_map(std::string_view text, const std::string& source);
void save_obstacle_map(const std::string& path, const ObstacleMap& map);
ObstacleMap load_obstacle_map(const std::string& path);

// ---------------------------------------------------------------------------
// Measurements: CSV with header tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,atten_db,
// UTF-8, LF line endings.

std::string measurements_text(const std::vector<Measurement>& data);
std::vector<Measurement> parse_measurements(std::string_view text,
                                            const std::string& source);
void save_measurements(const std::string& path,
                       const std::vector<Measurement>& data);
std::vector<Measurement> load_measurements(const std::string& path);

// ---------------------------------------------------------------------------
// Fitted model: path-loss line, scattering weights, diffraction and blend
// settings, plus a reference to the obstacle-map file by path and content
// hash.  The path is resolved relative to the model file's directory.

struct ModelFile {
  RadioMapModel model;     // map left empty; filled in by load_model
  std::string map_path;    // reference as stored in the file
  std::string map_sha256;  // content hash the map file must match
};

std::string model_text(const RadioMapModel& model, const std::string& map_path,
                       const std::string& map_sha256);
ModelFile parse_model(std::string_view text, const std::string& source);

// Hashes the referenced map file itself, so the stored digest always matches
// the bytes on disk at save time.
void save_model(const std::string& path, const RadioMapModel& model,
                const std::string& map_path);
RadioMapModel load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Evaluation metrics.

std::string metrics_text(const Metrics& m);
Metrics parse_metrics(std::string_view text, const std::string& source);
void save_metrics(const std::string& path, const Metrics& m);
Metrics load_metrics(const std::string& path);

// ---------------------------------------------------------------------------
// Predicted attenuation over a lattice of receiver positions at fixed
// transmitter; one value per cell center, ready for heatmap plotting.

struct GridField {
  GridSpec grid;
  Vector3_t<double> tx = Vector3_t<double>::Zero();
  double rx_height = 1.5;
  Matrix2d_t<double> values;  // rows x cols, dB

  void validate() const;
};

std::string grid_field_text(const GridField& f);
GridField parse_grid_field(std::string_view text, const std::string& source);
void save_grid_field(const std::string& path, const GridField& f);
GridField load_grid_field(const std::string& path);

// ---------------------------------------------------------------------------
// Relay placement result.

std::string relay_result_text(const RelayResult& r);
RelayResult parse_relay_result(std::string_view text,
                               const std::string& source);
void save_relay_result(const std::string& path, const RelayResult& r);
RelayResult load_relay_result(const std::string& path);

// ---------------------------------------------------------------------------
// Run configuration: one document drives every subcommand.  Every field has
// a default, so a config file only states what it changes; unknown keys are
// rejected to catch typos.  All randomness flows from the single seed.

struct SceneConfig {
  double density = 0.2;      // target fraction of cells covered by blocks
  double height_lo = 10.0;   // block height range, meters
  double height_hi = 60.0;
  int block_cells_lo = 2;    // block footprint edge length range, cells
  int block_cells_hi = 6;

  void validate() const;
};

struct DataConfig {
  std::int64_t count = 1000;
  SamplingConfig sampling;

  void validate() const;
};

struct PredictConfig {
  Vector3_t<double> tx = Vector3_t<double>(0.0, 0.0, 100.0);
  double rx_height = 1.5;

  void validate() const;
};

struct PathsConfig {
  std::string scene = "scene.json";
  std::string measurements = "measurements.csv";
  std::string model = "model.json";
  std::string fitted_scene = "fitted_scene.json";  // map learned by fit
  std::string metrics = "metrics.json";
  std::string prediction = "prediction.json";
  std::string relay = "relay.json";
};

struct RunConfig {
  GridSpec grid{64, 64, 10.0, Vector2_t<double>::Zero()};
  double wavelength = 0.05;
  double eccentricity = 0.5;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  PathLossParams path_loss{30.0, 22.0};  // truth line for data generation
  VoglerConfig vogler;                     // series knobs; wavelength above
  SceneConfig scene;
  DataConfig data;
  FitConfig fit;
  PredictConfig predict;
  // Default users sit inside the default 640 m x 640 m footprint.
  RelayQuery relay = [] {
    RelayQuery q;
    q.p1 = {160.0, 320.0, 1.5};
    q.p2 = {480.0, 320.0, 1.5};
    return q;
  }();
  PathsConfig paths;

  void validate() const;

  // The diffraction settings with the top-level wavelength applied; the
  // same object is used for generation, fitting and prediction.
  VoglerConfig vogler_with_wavelength() const {
    VoglerConfig v = vogler;
    v.wavelength = wavelength;
    return v;
  }
};

json run_config_json(const RunConfig& cfg);
std::string run_config_text(const RunConfig& cfg);
RunConfig parse_run_config(std::string_view text, const std::string& source);
RunConfig load_run_config(const std::string& path);

// ---------------------------------------------------------------------------
// Run manifest: command, effective seed, the full effective configuration
// with its hash, format versions, and the digest of every file written.
// Deliberately free of timestamps and machine identity so identical runs
// produce identical manifests.

struct OutputRecord {
  std::string name;
  std::string path;
  std::string sha256;
};

std::string manifest_text(const std::string& command, const RunConfig& cfg,
                          const std::vector<OutputRecord>& outputs);
void save_manifest(const std::string& path, const std::string& command,
                   const RunConfig& cfg,
                   const std::vector<OutputRecord>& outputs);

}  // namespace radiomap
