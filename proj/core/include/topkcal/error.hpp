#pragma once

#include <stdexcept>
#include <string>

namespace topkcal {

/// Broad failure category; the CLI maps each kind to a distinct exit code.
enum class ErrorKind {
  input,      // unparseable or invalid input data
  alignment,  // truth and predictions do not line up
  config,     // invalid parameters or flags
  data,       // well-formed input that cannot support the computation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Formats "<message> (line <n>)".
std::string at_line(const std::string& message, std::size_t line);

}  // namespace topkcal
