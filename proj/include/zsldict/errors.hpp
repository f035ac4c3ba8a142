#pragma once

#include <stdexcept>
#include <string>

namespace zsldict {

enum class ErrorKind {
  invalid_input,        // malformed data, failed validation, I/O
  dimension_mismatch,   // incompatible shapes between model and data
  missing_requirement,  // an optional input needed by this operation is absent
  solver_failure,       // a linear system could not be solved
};

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

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

inline std::string dims(long rows, long cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace zsldict
