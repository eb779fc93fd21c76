#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rdl {

// Shape or wiring mismatch detected at construction or validation time.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced by a numeric operation; the message names the operation
// and, for network passes, the offending layer.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input is mathematically degenerate for the requested operation, e.g. the
// correlation of a constant vector.
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// IDX container parse failure. The kind distinguishes the three failure
// modes callers care about.
struct IdxError : std::runtime_error {
  enum class Kind { BadMagic, Truncated, CountMismatch, Io };
  Kind kind;
  IdxError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Run configuration rejected. Collects every violated constraint so a bad
// config reports all of its problems at once.
struct ConfigError : std::runtime_error {
  std::vector<std::string> violations;
  explicit ConfigError(std::vector<std::string> v)
      : std::runtime_error(join(v)), violations(std::move(v)) {}
  explicit ConfigError(const std::string& msg)
      : std::runtime_error(msg), violations{msg} {}

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid config:";
    for (const auto& s : v) {
      out += "\n  - " + s;
    }
    return out;
  }
};

}  // namespace rdl
