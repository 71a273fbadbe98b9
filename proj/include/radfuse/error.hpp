#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace radfuse {

/// Broad failure categories. The CLI maps these onto its error prefix and
/// exit code.
enum class ErrorKind {
  InvalidArgument,
  Io,
  Format,
  Data,
  Numeric,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace radfuse
