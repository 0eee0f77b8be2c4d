#include "radiomap/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <system_error>

namespace radiomap {

namespace {

std::string dump_doc(const json& j) { return j.dump(2) + "\n"; }

[[noreturn]] void bad_field(const std::string& source, const std::string& label,
                            const char* what) {
  throw Error(errc::parse_failure,
              source + ": field '" + label + "' " + what);
}

const json& require(const json& j, const std::string& source,
                    const std::string& label, const std::string& key) {
  const auto it = j.find(key);
  if (it == j.end()) bad_field(source, label, "is missing");
  return *it;
}

double as_num(const json& v, const std::string& source,
              const std::string& label) {
  if (!v.is_number()) bad_field(source, label, "must be a number");
  return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& source,
                    const std::string& label) {
  if (!v.is_number_integer()) bad_field(source, label, "must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t as_uint(const json& v, const std::string& source,
                      const std::string& label) {
  if (!v.is_number_unsigned() &&
      !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    bad_field(source, label, "must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& source,
             const std::string& label) {
  if (!v.is_boolean()) bad_field(source, label, "must be true or false");
  return v.get<bool>();
}

std::string as_str(const json& v, const std::string& source,
                   const std::string& label) {
  if (!v.is_string()) bad_field(source, label, "must be a string");
  return v.get<std::string>();
}

Vector2_t<double> as_vec2(const json& v, const std::string& source,
                          const std::string& label) {
  if (!v.is_array() || v.size() != 2)
    bad_field(source, label, "must be an array of two numbers");
  return {as_num(v[0], source, label + "[0]"),
          as_num(v[1], source, label + "[1]")};
}

Vector3_t<double> as_vec3(const json& v, const std::string& source,
                          const std::string& label) {
  if (!v.is_array() || v.size() != 3)
    bad_field(source, label, "must be an array of three numbers");
  return {as_num(v[0], source, label + "[0]"),
          as_num(v[1], source, label + "[1]"),
          as_num(v[2], source, label + "[2]")};
}

double num_at(const json& j, const std::string& source,
              const std::string& key) {
  return as_num(require(j, source, key, key), source, key);
}

std::int64_t int_at(const json& j, const std::string& source,
                    const std::string& key) {
  return as_int(require(j, source, key, key), source, key);
}

std::string str_at(const json& j, const std::string& source,
                   const std::string& key) {
  return as_str(require(j, source, key, key), source, key);
}

[[noreturn]] void unknown_field(const std::string& source,
                                const std::string& label) {
  throw Error(errc::parse_failure,
              source + ": unknown field '" + label + "'");
}

void require_schema(const json& j, const char* expected,
                    const std::string& source) {
  const auto it = j.find("schema");
  if (it == j.end() || !it->is_string())
    throw Error(errc::schema_mismatch,
                source + ": missing schema tag, expected '" +
                    std::string(expected) + "'");
  const std::string got = it->get<std::string>();
  if (got != expected)
    throw Error(errc::schema_mismatch, source + ": schema '" + got +
                                           "' where '" + expected +
                                           "' was expected");
}

// Re-raises content-level validation failures with the file they came from.
template <class Fn>
void validate_loaded(const std::string& source, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw Error(errc::parse_failure, source + ": " + e.what());
  }
}

json matrix_json(const Matrix2d_t<double>& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

Matrix2d_t<double> matrix_from_json(const json& v, Eigen::Index rows,
                                    Eigen::Index cols,
                                    const std::string& source,
                                    const std::string& label) {
  if (!v.is_array()) bad_field(source, label, "must be an array of numbers");
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw Error(errc::parse_failure,
                source + ": field '" + label + "' has " +
                    std::to_string(v.size()) + " entries where " +
                    std::to_string(rows * cols) + " were expected");
  Matrix2d_t<double> m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = as_num(v[k], source, label + "[" + std::to_string(k) + "]");
      ++k;
    }
  return m;
}

json vec_json(const Vector2_t<double>& v) { return json::array({v.x(), v.y()}); }

json vec_json(const Vector3_t<double>& v) {
  return json::array({v.x(), v.y(), v.z()});
}

// Shortest text that parses back to exactly the same double.
void append_double(std::string& out, double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, r.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// File and digest primitives.

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(errc::io_failure, "cannot open '" + path + "' for reading");
  std::string text{std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>()};
  if (in.bad())
    throw Error(errc::io_failure, "failed while reading '" + path + "'");
  return text;
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(errc::io_failure, "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out)
    throw Error(errc::io_failure, "failed while writing '" + path + "'");
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw Error(errc::io_failure, "sha-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  return sha256_hex(read_text_file(path));
}

json parse_json_text(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is the 1-based offset of the offending byte; locate it.
    std::size_t idx = e.byte > 0 ? e.byte - 1 : 0;
    idx = std::min(idx, text.size());
    std::size_t line = 1, line_start = 0;
    for (std::size_t i = 0; i < idx; ++i)
      if (text[i] == '\n') {
        ++line;
        line_start = i + 1;
      }
    const std::size_t col = idx - line_start + 1;
    std::string detail = e.what();
    if (const auto cut = detail.find("] "); cut != std::string::npos)
      detail.erase(0, cut + 2);
    throw Error(errc::parse_failure, source + ":" + std::to_string(line) +
                                         ":" + std::to_string(col) + ": " +
                                         detail);
  }
}

std::string parent_directory(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

std::string resolve_reference(const std::string& base_dir,
                              const std::string& ref) {
  const std::filesystem::path p(ref);
  if (p.is_absolute() || base_dir.empty()) return ref;
  return (std::filesystem::path(base_dir) / p).string();
}

// ---------------------------------------------------------------------------
// Obstacle map.

std::string obstacle_map_text(const ObstacleMap& map) {
  map.validate();
  json j;
  j["schema"] = kMapSchema;
  j["M1"] = map.grid.rows;
  j["M2"] = map.grid.cols;
  j["cell_size"] = map.grid.cell_size;
  j["origin"] = vec_json(map.grid.origin);
  j["heights"] = matrix_json(map.heights);
  return dump_doc(j);
}

ObstacleMap parse_obstacle_map(std::string_view text,
                               const std::string& source) {
  const json j = parse_json_text(text, source);
  require_schema(j, kMapSchema, source);
  ObstacleMap map;
  map.grid.rows = int_at(j, source, "M1");
  map.grid.cols = int_at(j, source, "M2");
  map.grid.cell_size = num_at(j, source, "cell_size");
  map.grid.origin =
      as_vec2(require(j, source, "origin", "origin"), source, "origin");
  validate_loaded(source, [&] { map.grid.validate(); });
  map.heights =
      matrix_from_json(require(j, source, "heights", "heights"), map.grid.rows,
                       map.grid.cols, source, "heights");
  validate_loaded(source, [&] { map.validate(); });
  return map;
}

void save_obstacle_map(const std::string& path, const ObstacleMap& map) {
  write_text_file(path, obstacle_map_text(map));
}

ObstacleMap load_obstacle_map(const std::string& path) {
  return parse_obstacle_map(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Measurements.

static constexpr const char* kCsvHeader =
    "tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,atten_db";

std::string measurements_text(const std::vector<Measurement>& data) {
  std::string out = kCsvHeader;
  out.push_back('\n');
  for (const Measurement& m : data) {
    m.validate();
    const double fields[7] = {m.link.tx.x(), m.link.tx.y(), m.link.tx.z(),
                              m.link.rx.x(), m.link.rx.y(), m.link.rx.z(),
                              m.y};
    for (int k = 0; k < 7; ++k) {
      if (k > 0) out.push_back(',');
      append_double(out, fields[k]);
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<Measurement> parse_measurements(std::string_view text,
                                            const std::string& source) {
  auto fail = [&](std::size_t line, std::size_t col, const std::string& what) {
    throw Error(errc::parse_failure, source + ":" + std::to_string(line) +
                                         ":" + std::to_string(col) + ": " +
                                         what);
  };

  std::size_t pos = 0, line_no = 0;
  std::vector<Measurement> out;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    const bool last_without_newline = eol == std::string_view::npos;
    if (last_without_newline) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    ++line_no;

    if (line_no == 1) {
      if (line != kCsvHeader)
        fail(1, 1, std::string("header must be '") + kCsvHeader + "'");
    } else if (line.empty()) {
      fail(line_no, 1, "empty line");
    } else {
      double fields[7];
      std::size_t field_start = 0;
      for (int k = 0; k < 7; ++k) {
        std::size_t field_end = line.find(',', field_start);
        if (k == 6) {
          if (field_end != std::string_view::npos)
            fail(line_no, field_end + 1, "expected 7 fields per row");
          field_end = line.size();
        } else if (field_end == std::string_view::npos) {
          fail(line_no, line.size() + 1, "expected 7 fields per row");
        }
        const char* begin = line.data() + field_start;
        const char* end = line.data() + field_end;
        const auto r = std::from_chars(begin, end, fields[k]);
        if (r.ec != std::errc() || r.ptr != end)
          fail(line_no, field_start + 1, "malformed number");
        field_start = field_end + 1;
      }
      Measurement m;
      m.link.tx = {fields[0], fields[1], fields[2]};
      m.link.rx = {fields[3], fields[4], fields[5]};
      m.y = fields[6];
      try {
        m.validate();
      } catch (const Error& e) {
        fail(line_no, 1, e.what());
      }
      out.push_back(m);
    }
    pos = last_without_newline ? text.size() : eol + 1;
  }
  if (line_no == 0)
    fail(1, 1, std::string("header must be '") + kCsvHeader + "'");
  return out;
}

void save_measurements(const std::string& path,
                       const std::vector<Measurement>& data) {
  write_text_file(path, measurements_text(data));
}

std::vector<Measurement> load_measurements(const std::string& path) {
  return parse_measurements(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Fitted model.

std::string model_text(const RadioMapModel& model, const std::string& map_path,
                       const std::string& map_sha256) {
  model.los.validate();
  model.vogler.validate();
  model.scatter.validate();
  if (!(model.eccentricity > 0.0) || !(model.eccentricity < 1.0))
    throw Error(errc::invalid_argument, "eccentricity must be in (0, 1)");

  json j;
  j["schema"] = kModelSchema;
  j["path_loss"] = {{"beta0", model.los.beta0}, {"gamma0", model.los.gamma0}};
  j["vogler"] = {{"wavelength", model.vogler.wavelength},
                 {"series_tolerance", model.vogler.series_tolerance},
                 {"max_series_terms", model.vogler.max_series_terms},
                 {"max_edges_exact", model.vogler.max_edges_exact}};
  j["eccentricity"] = model.eccentricity;
  j["indicator"] =
      model.indicator_mode == IndicatorMode::hard ? "hard" : "soft";
  json scatter;
  scatter["kind"] =
      model.scatter.kind == ScatterRegressor::Kind::linear ? "linear" : "null";
  scatter["rows"] = model.scatter.out_rows;
  scatter["cols"] = model.scatter.out_cols;
  if (model.scatter.kind == ScatterRegressor::Kind::linear) {
    json w = json::array();
    for (Eigen::Index i = 0; i < model.scatter.weights.size(); ++i)
      w.push_back(model.scatter.weights[i]);
    scatter["weights"] = std::move(w);
  }
  j["scatter"] = std::move(scatter);
  j["obstacle_map"] = {{"path", map_path}, {"sha256", map_sha256}};
  return dump_doc(j);
}

ModelFile parse_model(std::string_view text, const std::string& source) {
  const json j = parse_json_text(text, source);
  require_schema(j, kModelSchema, source);
  ModelFile out;

  const json& pl = require(j, source, "path_loss", "path_loss");
  out.model.los.beta0 = num_at(pl, source, "beta0");
  out.model.los.gamma0 = num_at(pl, source, "gamma0");

  const json& vg = require(j, source, "vogler", "vogler");
  out.model.vogler.wavelength = num_at(vg, source, "wavelength");
  out.model.vogler.series_tolerance = num_at(vg, source, "series_tolerance");
  out.model.vogler.max_series_terms =
      static_cast<int>(int_at(vg, source, "max_series_terms"));
  out.model.vogler.max_edges_exact =
      static_cast<int>(int_at(vg, source, "max_edges_exact"));

  out.model.eccentricity = num_at(j, source, "eccentricity");

  const std::string ind = str_at(j, source, "indicator");
  if (ind == "hard")
    out.model.indicator_mode = IndicatorMode::hard;
  else if (ind == "soft")
    out.model.indicator_mode = IndicatorMode::soft;
  else
    bad_field(source, "indicator", "must be 'hard' or 'soft'");

  const json& sc = require(j, source, "scatter", "scatter");
  const std::string kind = str_at(sc, source, "kind");
  out.model.scatter.out_rows = int_at(sc, source, "rows");
  out.model.scatter.out_cols = int_at(sc, source, "cols");
  if (kind == "linear") {
    out.model.scatter.kind = ScatterRegressor::Kind::linear;
    const json& w = require(sc, source, "weights", "weights");
    if (!w.is_array()) bad_field(source, "weights", "must be an array");
    out.model.scatter.weights.resize(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i)
      out.model.scatter.weights[static_cast<Eigen::Index>(i)] =
          as_num(w[i], source, "weights[" + std::to_string(i) + "]");
  } else if (kind == "null") {
    out.model.scatter.kind = ScatterRegressor::Kind::null;
  } else {
    bad_field(source, "scatter.kind", "must be 'null' or 'linear'");
  }

  const json& ref = require(j, source, "obstacle_map", "obstacle_map");
  out.map_path = str_at(ref, source, "path");
  out.map_sha256 = str_at(ref, source, "sha256");

  validate_loaded(source, [&] {
    out.model.los.validate();
    out.model.vogler.validate();
    out.model.scatter.validate();
    if (!(out.model.eccentricity > 0.0) || !(out.model.eccentricity < 1.0))
      throw Error(errc::invalid_argument, "eccentricity must be in (0, 1)");
  });
  return out;
}

void save_model(const std::string& path, const RadioMapModel& model,
                const std::string& map_path) {
  model.validate();
  const std::string resolved =
      resolve_reference(parent_directory(path), map_path);
  const std::string digest = sha256_file(resolved);
  write_text_file(path, model_text(model, map_path, digest));
}

RadioMapModel load_model(const std::string& path) {
  ModelFile mf = parse_model(read_text_file(path), path);
  const std::string resolved =
      resolve_reference(parent_directory(path), mf.map_path);
  const std::string map_bytes = read_text_file(resolved);
  if (sha256_hex(map_bytes) != mf.map_sha256)
    throw Error(errc::hash_mismatch,
                "obstacle map '" + resolved +
                    "' does not match the content hash recorded in '" + path +
                    "'");
  mf.model.map = parse_obstacle_map(map_bytes, resolved);
  mf.model.validate();
  return std::move(mf.model);
}

// ---------------------------------------------------------------------------
// Metrics.

std::string metrics_text(const Metrics& m) {
  json j;
  j["schema"] = kMetricsSchema;
  j["count"] = m.count;
  j["mae"] = m.mae;
  j["nmae"] = m.nmae;
  return dump_doc(j);
}

Metrics parse_metrics(std::string_view text, const std::string& source) {
  const json j = parse_json_text(text, source);
  require_schema(j, kMetricsSchema, source);
  Metrics m;
  m.count = int_at(j, source, "count");
  m.mae = num_at(j, source, "mae");
  m.nmae = num_at(j, source, "nmae");
  return m;
}

void save_metrics(const std::string& path, const Metrics& m) {
  write_text_file(path, metrics_text(m));
}

Metrics load_metrics(const std::string& path) {
  return parse_metrics(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Prediction grid.

void GridField::validate() const {
  grid.validate();
  if (!tx.allFinite())
    throw Error(errc::invalid_argument, "transmitter must be finite");
  if (!std::isfinite(rx_height) || rx_height < 0.0)
    throw Error(errc::invalid_argument,
                "receiver height must be finite and non-negative");
  if (values.rows() != grid.rows || values.cols() != grid.cols)
    throw Error(errc::invalid_argument, "value matrix does not match grid");
  if (!values.allFinite())
    throw Error(errc::invalid_argument, "field values must be finite");
}

std::string grid_field_text(const GridField& f) {
  f.validate();
  json j;
  j["schema"] = kGridSchema;
  j["M1"] = f.grid.rows;
  j["M2"] = f.grid.cols;
  j["cell_size"] = f.grid.cell_size;
  j["origin"] = vec_json(f.grid.origin);
  j["tx"] = vec_json(f.tx);
  j["rx_height"] = f.rx_height;
  j["values"] = matrix_json(f.values);
  return dump_doc(j);
}

GridField parse_grid_field(std::string_view text, const std::string& source) {
  const json j = parse_json_text(text, source);
  require_schema(j, kGridSchema, source);
  GridField f;
  f.grid.rows = int_at(j, source, "M1");
  f.grid.cols = int_at(j, source, "M2");
  f.grid.cell_size = num_at(j, source, "cell_size");
  f.grid.origin =
      as_vec2(require(j, source, "origin", "origin"), source, "origin");
  validate_loaded(source, [&] { f.grid.validate(); });
  f.tx = as_vec3(require(j, source, "tx", "tx"), source, "tx");
  f.rx_height = num_at(j, source, "rx_height");
  f.values = matrix_from_json(require(j, source, "values", "values"),
                              f.grid.rows, f.grid.cols, source, "values");
  validate_loaded(source, [&] { f.validate(); });
  return f;
}

void save_grid_field(const std::string& path, const GridField& f) {
  write_text_file(path, grid_field_text(f));
}

GridField load_grid_field(const std::string& path) {
  return parse_grid_field(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Relay result.

std::string relay_result_text(const RelayResult& r) {
  json j;
  j["schema"] = kRelayResultSchema;
  j["position"] = vec_json(r.position);
  j["min_gain_db"] = r.min_gain;
  j["search_distance"] = r.search_distance;
  j["double_los"] = r.double_los;
  return dump_doc(j);
}

RelayResult parse_relay_result(std::string_view text,
                               const std::string& source) {
  const json j = parse_json_text(text, source);
  require_schema(j, kRelayResultSchema, source);
  RelayResult r;
  r.position =
      as_vec3(require(j, source, "position", "position"), source, "position");
  r.min_gain = num_at(j, source, "min_gain_db");
  r.search_distance = num_at(j, source, "search_distance");
  r.double_los = as_bool(require(j, source, "double_los", "double_los"),
                         source, "double_los");
  return r;
}

void save_relay_result(const std::string& path, const RelayResult& r) {
  write_text_file(path, relay_result_text(r));
}

RelayResult load_relay_result(const std::string& path) {
  return parse_relay_result(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Run configuration.

void SceneConfig::validate() const {
  if (!(density >= 0.0) || !(density <= 0.95))
    throw Error(errc::invalid_argument,
                "scene density must lie in [0, 0.95]");
  if (!(height_lo >= 0.0) || !(height_hi >= height_lo) ||
      !std::isfinite(height_hi))
    throw Error(errc::invalid_argument,
                "block height range needs 0 <= lo <= hi");
  if (block_cells_lo < 1 || block_cells_hi < block_cells_lo)
    throw Error(errc::invalid_argument,
                "block footprint range needs 1 <= lo <= hi");
}

void DataConfig::validate() const {
  if (count < 1)
    throw Error(errc::invalid_argument, "sample count must be positive");
  sampling.validate();
}

void PredictConfig::validate() const {
  if (!tx.allFinite())
    throw Error(errc::invalid_argument, "transmitter must be finite");
  if (!std::isfinite(rx_height) || rx_height < 0.0)
    throw Error(errc::invalid_argument,
                "receiver height must be finite and non-negative");
}

void RunConfig::validate() const {
  grid.validate();
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
    throw Error(errc::invalid_argument, "wavelength must be positive");
  if (!(eccentricity > 0.0) || !(eccentricity < 1.0))
    throw Error(errc::invalid_argument, "eccentricity must be in (0, 1)");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw Error(errc::invalid_argument, "noise sigma must be non-negative");
  path_loss.validate();
  vogler_with_wavelength().validate();
  scene.validate();
  data.validate();
  fit.validate();
  predict.validate();
  relay.validate();
  const std::string* all[] = {&paths.scene,        &paths.measurements,
                              &paths.model,        &paths.fitted_scene,
                              &paths.metrics,      &paths.prediction,
                              &paths.relay};
  for (const std::string* p : all)
    if (p->empty())
      throw Error(errc::invalid_argument, "output paths must be non-empty");
}

json run_config_json(const RunConfig& cfg) {
  json j;
  j["schema"] = kConfigSchema;
  j["grid"] = {{"rows", cfg.grid.rows},
               {"cols", cfg.grid.cols},
               {"cell_size", cfg.grid.cell_size},
               {"origin", vec_json(cfg.grid.origin)}};
  j["wavelength"] = cfg.wavelength;
  j["eccentricity"] = cfg.eccentricity;
  j["noise_sigma"] = cfg.noise_sigma;
  j["seed"] = cfg.seed;
  j["path_loss"] = {{"beta0", cfg.path_loss.beta0},
                    {"gamma0", cfg.path_loss.gamma0}};
  j["vogler"] = {{"series_tolerance", cfg.vogler.series_tolerance},
                 {"max_series_terms", cfg.vogler.max_series_terms},
                 {"max_edges_exact", cfg.vogler.max_edges_exact}};
  j["scene"] = {{"density", cfg.scene.density},
                {"height_lo", cfg.scene.height_lo},
                {"height_hi", cfg.scene.height_hi},
                {"block_cells_lo", cfg.scene.block_cells_lo},
                {"block_cells_hi", cfg.scene.block_cells_hi}};
  j["data"] = {{"count", cfg.data.count},
               {"tx_alt_lo", cfg.data.sampling.tx_alt_lo},
               {"tx_alt_hi", cfg.data.sampling.tx_alt_hi},
               {"rx_height", cfg.data.sampling.rx_height},
               {"min_ground_separation", cfg.data.sampling.min_ground_separation}};
  j["fit"] = {{"learning_rate", cfg.fit.learning_rate},
              {"epochs", cfg.fit.epochs},
              {"batch_size", cfg.fit.batch_size},
              {"height_clamp_max", cfg.fit.height_clamp_max},
              {"init_height", cfg.fit.init_height},
              {"convergence_tol", cfg.fit.convergence_tol},
              {"cluster_rounds", cfg.fit.cluster_rounds},
              {"patience", cfg.fit.patience},
              {"init_learning_rate", cfg.fit.init_learning_rate},
              {"init_epochs", cfg.fit.init_epochs},
              {"height_decay", cfg.fit.height_decay},
              {"grad_clip", cfg.fit.grad_clip},
              {"step_scale_gamma", cfg.fit.step_scale_gamma},
              {"step_scale_weights", cfg.fit.step_scale_weights},
              {"step_scale_heights", cfg.fit.step_scale_heights},
              {"use_scatter", cfg.fit.use_scatter},
              {"polish", cfg.fit.polish},
              {"stn_rows", cfg.fit.stn_rows},
              {"stn_cols", cfg.fit.stn_cols}};
  j["predict"] = {{"tx", vec_json(cfg.predict.tx)},
                  {"rx_height", cfg.predict.rx_height}};
  json radii = json::array();
  for (const double r : cfg.relay.circle_radii) radii.push_back(r);
  j["relay"] = {{"p1", vec_json(cfg.relay.p1)},
                {"p2", vec_json(cfg.relay.p2)},
                {"z_min", cfg.relay.z_min},
                {"z_max", cfg.relay.z_max},
                {"z_step", cfg.relay.z_step},
                {"lateral_step", cfg.relay.lateral_step},
                {"circle_radii", std::move(radii)},
                {"angle_step_deg", cfg.relay.angle_step_deg},
                {"two_d_height", cfg.relay.two_d_height},
                {"max_probes", cfg.relay.max_probes},
                {"max_detours", cfg.relay.max_detours}};
  j["paths"] = {{"scene", cfg.paths.scene},
                {"measurements", cfg.paths.measurements},
                {"model", cfg.paths.model},
                {"fitted_scene", cfg.paths.fitted_scene},
                {"metrics", cfg.paths.metrics},
                {"prediction", cfg.paths.prediction},
                {"relay", cfg.paths.relay}};
  return j;
}

std::string run_config_text(const RunConfig& cfg) {
  return dump_doc(run_config_json(cfg));
}

namespace {

// Every section override walks the present keys and rejects unknown ones, so
// a misspelled knob fails loudly instead of silently keeping its default.

void read_grid(const json& v, const std::string& source, GridSpec& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "grid." + it.key();
    if (it.key() == "rows")
      out.rows = as_int(it.value(), source, label);
    else if (it.key() == "cols")
      out.cols = as_int(it.value(), source, label);
    else if (it.key() == "cell_size")
      out.cell_size = as_num(it.value(), source, label);
    else if (it.key() == "origin")
      out.origin = as_vec2(it.value(), source, label);
    else
      unknown_field(source, label);
  }
}

void read_path_loss(const json& v, const std::string& source,
                    PathLossParams& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "path_loss." + it.key();
    if (it.key() == "beta0")
      out.beta0 = as_num(it.value(), source, label);
    else if (it.key() == "gamma0")
      out.gamma0 = as_num(it.value(), source, label);
    else
      unknown_field(source, label);
  }
}

void read_vogler(const json& v, const std::string& source, VoglerConfig& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "vogler." + it.key();
    if (it.key() == "series_tolerance")
      out.series_tolerance = as_num(it.value(), source, label);
    else if (it.key() == "max_series_terms")
      out.max_series_terms =
          static_cast<int>(as_int(it.value(), source, label));
    else if (it.key() == "max_edges_exact")
      out.max_edges_exact = static_cast<int>(as_int(it.value(), source, label));
    else
      unknown_field(source, label);
  }
}

void read_scene(const json& v, const std::string& source, SceneConfig& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "scene." + it.key();
    if (it.key() == "density")
      out.density = as_num(it.value(), source, label);
    else if (it.key() == "height_lo")
      out.height_lo = as_num(it.value(), source, label);
    else if (it.key() == "height_hi")
      out.height_hi = as_num(it.value(), source, label);
    else if (it.key() == "block_cells_lo")
      out.block_cells_lo = static_cast<int>(as_int(it.value(), source, label));
    else if (it.key() == "block_cells_hi")
      out.block_cells_hi = static_cast<int>(as_int(it.value(), source, label));
    else
      unknown_field(source, label);
  }
}

void read_data(const json& v, const std::string& source, DataConfig& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "data." + it.key();
    if (it.key() == "count")
      out.count = as_int(it.value(), source, label);
    else if (it.key() == "tx_alt_lo")
      out.sampling.tx_alt_lo = as_num(it.value(), source, label);
    else if (it.key() == "tx_alt_hi")
      out.sampling.tx_alt_hi = as_num(it.value(), source, label);
    else if (it.key() == "rx_height")
      out.sampling.rx_height = as_num(it.value(), source, label);
    else if (it.key() == "min_ground_separation")
      out.sampling.min_ground_separation = as_num(it.value(), source, label);
    else
      unknown_field(source, label);
  }
}

void read_fit(const json& v, const std::string& source, FitConfig& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "fit." + it.key();
    const json& x = it.value();
    if (it.key() == "learning_rate")
      out.learning_rate = as_num(x, source, label);
    else if (it.key() == "epochs")
      out.epochs = static_cast<int>(as_int(x, source, label));
    else if (it.key() == "batch_size")
      out.batch_size = static_cast<int>(as_int(x, source, label));
    else if (it.key() == "height_clamp_max")
      out.height_clamp_max = as_num(x, source, label);
    else if (it.key() == "init_height")
      out.init_height = as_num(x, source, label);
    else if (it.key() == "convergence_tol")
      out.convergence_tol = as_num(x, source, label);
    else if (it.key() == "cluster_rounds")
      out.cluster_rounds = static_cast<int>(as_int(x, source, label));
    else if (it.key() == "patience")
      out.patience = static_cast<int>(as_int(x, source, label));
    else if (it.key() == "init_learning_rate")
      out.init_learning_rate = as_num(x, source, label);
    else if (it.key() == "init_epochs")
      out.init_epochs = static_cast<int>(as_int(x, source, label));
    else if (it.key() == "height_decay")
      out.height_decay = as_num(x, source, label);
    else if (it.key() == "grad_clip")
      out.grad_clip = as_num(x, source, label);
    else if (it.key() == "step_scale_gamma")
      out.step_scale_gamma = as_num(x, source, label);
    else if (it.key() == "step_scale_weights")
      out.step_scale_weights = as_num(x, source, label);
    else if (it.key() == "step_scale_heights")
      out.step_scale_heights = as_num(x, source, label);
    else if (it.key() == "use_scatter")
      out.use_scatter = as_bool(x, source, label);
    else if (it.key() == "polish")
      out.polish = as_bool(x, source, label);
    else if (it.key() == "stn_rows")
      out.stn_rows = as_int(x, source, label);
    else if (it.key() == "stn_cols")
      out.stn_cols = as_int(x, source, label);
    else
      unknown_field(source, label);
  }
}

void read_predict(const json& v, const std::string& source,
                  PredictConfig& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "predict." + it.key();
    if (it.key() == "tx")
      out.tx = as_vec3(it.value(), source, label);
    else if (it.key() == "rx_height")
      out.rx_height = as_num(it.value(), source, label);
    else
      unknown_field(source, label);
  }
}

void read_relay(const json& v, const std::string& source, RelayQuery& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "relay." + it.key();
    const json& x = it.value();
    if (it.key() == "p1")
      out.p1 = as_vec3(x, source, label);
    else if (it.key() == "p2")
      out.p2 = as_vec3(x, source, label);
    else if (it.key() == "z_min")
      out.z_min = as_num(x, source, label);
    else if (it.key() == "z_max")
      out.z_max = as_num(x, source, label);
    else if (it.key() == "z_step")
      out.z_step = as_num(x, source, label);
    else if (it.key() == "lateral_step")
      out.lateral_step = as_num(x, source, label);
    else if (it.key() == "circle_radii") {
      if (!x.is_array()) bad_field(source, label, "must be an array");
      out.circle_radii.clear();
      for (std::size_t i = 0; i < x.size(); ++i)
        out.circle_radii.push_back(
            as_num(x[i], source, label + "[" + std::to_string(i) + "]"));
    } else if (it.key() == "angle_step_deg")
      out.angle_step_deg = as_num(x, source, label);
    else if (it.key() == "two_d_height")
      out.two_d_height = as_num(x, source, label);
    else if (it.key() == "max_probes")
      out.max_probes = static_cast<int>(as_int(x, source, label));
    else if (it.key() == "max_detours")
      out.max_detours = static_cast<int>(as_int(x, source, label));
    else
      unknown_field(source, label);
  }
}

void read_paths(const json& v, const std::string& source, PathsConfig& out) {
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string label = "paths." + it.key();
    if (it.key() == "scene")
      out.scene = as_str(it.value(), source, label);
    else if (it.key() == "measurements")
      out.measurements = as_str(it.value(), source, label);
    else if (it.key() == "model")
      out.model = as_str(it.value(), source, label);
    else if (it.key() == "fitted_scene")
      out.fitted_scene = as_str(it.value(), source, label);
    else if (it.key() == "metrics")
      out.metrics = as_str(it.value(), source, label);
    else if (it.key() == "prediction")
      out.prediction = as_str(it.value(), source, label);
    else if (it.key() == "relay")
      out.relay = as_str(it.value(), source, label);
    else
      unknown_field(source, label);
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& source) {
  const json j = parse_json_text(text, source);
  require_schema(j, kConfigSchema, source);
  RunConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "schema") continue;
    if (k == "grid")
      read_grid(v, source, cfg.grid);
    else if (k == "wavelength")
      cfg.wavelength = as_num(v, source, k);
    else if (k == "eccentricity")
      cfg.eccentricity = as_num(v, source, k);
    else if (k == "noise_sigma")
      cfg.noise_sigma = as_num(v, source, k);
    else if (k == "seed")
      cfg.seed = as_uint(v, source, k);
    else if (k == "path_loss")
      read_path_loss(v, source, cfg.path_loss);
    else if (k == "vogler")
      read_vogler(v, source, cfg.vogler);
    else if (k == "scene")
      read_scene(v, source, cfg.scene);
    else if (k == "data")
      read_data(v, source, cfg.data);
    else if (k == "fit")
      read_fit(v, source, cfg.fit);
    else if (k == "predict")
      read_predict(v, source, cfg.predict);
    else if (k == "relay")
      read_relay(v, source, cfg.relay);
    else if (k == "paths")
      read_paths(v, source, cfg.paths);
    else
      unknown_field(source, k);
  }
  validate_loaded(source, [&] { cfg.validate(); });
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Run manifest.

std::string manifest_text(const std::string& command, const RunConfig& cfg,
                          const std::vector<OutputRecord>& outputs) {
  const json config = run_config_json(cfg);
  json j;
  j["schema"] = kManifestSchema;
  j["command"] = command;
  j["seed"] = cfg.seed;
  j["config_sha256"] = sha256_hex(dump_doc(config));
  j["versions"] = {{"library", kLibraryVersion},
                   {"run-config", kConfigSchema},
                   {"obstacle-map", kMapSchema},
                   {"radio-map-model", kModelSchema},
                   {"metrics", kMetricsSchema},
                   {"grid-field", kGridSchema},
                   {"relay-result", kRelayResultSchema}};
  json outs = json::array();
  for (const OutputRecord& o : outputs)
    outs.push_back(
        {{"name", o.name}, {"path", o.path}, {"sha256", o.sha256}});
  j["outputs"] = std::move(outs);
  j["config"] = config;
  return dump_doc(j);
}

void save_manifest(const std::string& path, const std::string& command,
                   const RunConfig& cfg,
                   const std::vector<OutputRecord>& outputs) {
  write_text_file(path, manifest_text(command, cfg, outputs));
}

}  // namespace radiomap
