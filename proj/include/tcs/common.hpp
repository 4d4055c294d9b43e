#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace tcs {

// Error taxonomy mirrors the CLI exit codes: validation/contract errors (2),
// file/format errors (3), numeric failures such as non-finite losses (4).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataFormatError : std::runtime_error {
  explicit DataFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

inline bool is_finite(double v) { return std::isfinite(v); }

}  // namespace tcs
