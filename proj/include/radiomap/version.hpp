#pragma once

namespace radiomap {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Schema identifiers for on-disk artifacts.  Bump on incompatible change.
inline constexpr const char* kMapSchema = "obstacle-map/1";
inline constexpr const char* kModelSchema = "radio-map-model/1";
inline constexpr const char* kMetricsSchema = "metrics/1";
inline constexpr const char* kManifestSchema = "run-manifest/1";
inline constexpr const char* kConfigSchema = "run-config/1";
inline constexpr const char* kGridSchema = "grid-field/1";
inline constexpr const char* kRelayResultSchema = "relay-result/1";
inline constexpr const char* kPoolingVersion = "pool/1";

}  // namespace radiomap
