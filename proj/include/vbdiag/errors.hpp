#pragma once

#include <stdexcept>
#include <string>

namespace vbdiag {

/// Base class for every failure raised by the diagnostics. `code()` is a
/// stable CamelCase identifier (e.g. "NonFiniteTarget") that the CLI prints
/// as the machine-readable part of an error line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

inline void require(bool cond, const char* code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace vbdiag
