#pragma once

#include <stdexcept>
#include <string>

namespace ope {

enum class ErrorKind {
  OutOfDomain,
  InvalidParams,
  Singular,
  NotApplicable,
  WindowTooSmall,
  NoConvergence,
  IllConditioned,
  Unsupported,
  Config
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ope
