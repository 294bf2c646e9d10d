#pragma once

#include <stdexcept>
#include <string>

namespace thick {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorCategory {
  Usage = 2,        // invalid configuration or unsupported argument combination
  Feasibility = 3,  // refused: the lattice or mode budget cannot resolve the request
  Numerical = 4,    // non-PSD Gram, quadrature non-convergence
  Domain = 5,       // argument outside the mathematical domain of a function
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Feasibility: return "feasibility";
    case ErrorCategory::Numerical: return "numerical";
    case ErrorCategory::Domain: return "domain";
  }
  return "unknown";
}

[[noreturn]] inline void usage_error(const std::string& msg) { throw Error(ErrorCategory::Usage, msg); }
[[noreturn]] inline void feasibility_error(const std::string& msg) {
  throw Error(ErrorCategory::Feasibility, msg);
}
[[noreturn]] inline void numerical_error(const std::string& msg) {
  throw Error(ErrorCategory::Numerical, msg);
}
[[noreturn]] inline void domain_error(const std::string& msg) { throw Error(ErrorCategory::Domain, msg); }

}  // namespace thick
