#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace radiomap {

// All recoverable failures carry a stable machine-readable code alongside the
// human-readable message.  The CLI surfaces both as JSON on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

namespace errc {
inline constexpr const char* invalid_argument = "invalid_argument";
inline constexpr const char* empty_trace = "empty_trace";
inline constexpr const char* los_path = "los_path";
inline constexpr const char* series_order = "series_order";
inline constexpr const char* io_failure = "io_failure";
inline constexpr const char* parse_failure = "parse_failure";
inline constexpr const char* schema_mismatch = "schema_mismatch";
inline constexpr const char* hash_mismatch = "hash_mismatch";
inline constexpr const char* divergence = "divergence";
inline constexpr const char* degenerate_data = "degenerate_data";
inline constexpr const char* no_feasible_point = "no_feasible_point";
}  // namespace errc

}  // namespace radiomap
