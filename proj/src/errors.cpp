#include "ope_meso/errors.hpp"

namespace ope {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::NotApplicable: return "NotApplicable";
    case ErrorKind::WindowTooSmall: return "WindowTooSmall";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Error";
}

}  // namespace ope
