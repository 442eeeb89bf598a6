#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rydcount {

using AtomCount = std::int64_t;

enum class ErrorKind {
  invalid_argument,
  inconsistent_observation,
  degenerate_distribution,
  ensemble_empty,
  empty_isoline,
  fit_failed,
  io_error,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries one of the kinds above so the
// C layer can map it to a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::invalid_argument, what);
}

}  // namespace rydcount
