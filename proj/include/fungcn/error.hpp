#pragma once

#include <stdexcept>
#include <string>

namespace fungcn {

/// Broad failure class; the CLI maps it to a process exit code.
enum class ErrorClass {
  contract,   ///< invalid input, configuration, or shape (exit 2)
  numerical,  ///< a numerical procedure failed (exit 3)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), class_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return class_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass class_;
  std::string kind_;
};

inline Error contract_error(std::string kind, const std::string& message) {
  return Error(ErrorClass::contract, std::move(kind), message);
}

inline Error numerical_error(std::string kind, const std::string& message) {
  return Error(ErrorClass::numerical, std::move(kind), message);
}

}  // namespace fungcn
