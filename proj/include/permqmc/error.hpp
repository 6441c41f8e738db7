#pragma once

#include <stdexcept>
#include <string>

namespace permqmc {

enum class Errc {
  invalid_dimension,
  invalid_arguments,
  numerical_failure,
  predictor_error,
  config_error,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_dimension: return "invalid-dimension";
    case Errc::invalid_arguments: return "invalid-arguments";
    case Errc::numerical_failure: return "numerical-failure";
    case Errc::predictor_error: return "predictor-error";
    case Errc::config_error: return "config-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Process exit status used by the command-line tool for each error class.
inline int exit_code(Errc code) {
  switch (code) {
    case Errc::numerical_failure: return 3;
    case Errc::predictor_error: return 4;
    default: return 2;
  }
}

}  // namespace permqmc
