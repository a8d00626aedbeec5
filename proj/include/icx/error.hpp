#pragma once

#include <stdexcept>
#include <string>

namespace icx {

/// Broad failure classes. The CLI maps them onto exit codes: numerical
/// failures exit with 2, everything else with 1.
enum class ErrorKind {
  io,
  format,
  length,
  validation,
  parameter,
  dimension,
  rank,
  divergence,
  undefined_metric,
  fit,
  generation,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::length: return "length";
    case ErrorKind::validation: return "validation";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::rank: return "rank";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::fit: return "fit";
    case ErrorKind::generation: return "generation";
  }
  return "unknown";
}

inline bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::rank || kind == ErrorKind::divergence ||
         kind == ErrorKind::undefined_metric;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, detail);
}

inline void require(bool cond, ErrorKind kind, const std::string& detail) {
  if (!cond) throw Error(kind, detail);
}

}  // namespace icx
