#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnb {

// Wrong dimensions, zero-sized layers, mismatched caches.
class shape_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced or consumed by an arithmetic routine.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-range argument values (rewards outside [0,1], empty candidate sets, ...).
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line), message_(what) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

// Raised when an environment cannot provide ground truth it was asked for.
class unsupported_oracle : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace gnb
